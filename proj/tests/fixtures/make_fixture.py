#!/usr/bin/env python3
"""Writes the golden label-store fixtures with nothing but `struct`.

small_store.slbl: C=5, B=3, T=4, retained=2, bpe=2, k=2 (quantized)
small_full.slbl:  C=4, B=2, T=3, retained=1, bpe=1, k=0 (full logits)

Values are simple closed forms so the C++ test can restate them.
"""
import json
import struct


def header(c, b, t, retained, bpe, k):
    flags = 1 if k else 0
    return b"SLBL" + struct.pack("<HHIIIIII", 1, flags, c, b, t, retained, bpe, k)


def record(epoch, batch, c, b, k, n_images):
    out = struct.pack("<II", epoch, batch)
    idx = [(epoch * 7 + batch * 3 + r) % n_images for r in range(b)]
    out += struct.pack("<%dI" % b, *idx)
    for r in range(b):
        s = 0.25 * (r + 1)
        out += struct.pack("<4f", 1.0 + s, -s, 1.0 - s, s)
    out += struct.pack("<%dB" % b, *[(epoch + batch + r) % 2 for r in range(b)])
    out += struct.pack("<%dI" % b, *[(idx[r] + 1) % n_images for r in range(b)])
    out += struct.pack("<f", 0.125 * (epoch * 2 + batch + 1))
    out += struct.pack("<4I", 0, 0, 0, 0)
    if k:
        ids, vals = [], []
        for r in range(b):
            top = (epoch + batch + r) % c
            second = (top + 2) % c
            ids += [top, second]
            vals += [4.0 + r, 1.5 - 0.5 * batch]
        out += struct.pack("<%dI" % (b * k), *ids)
        out += struct.pack("<%df" % (b * k), *vals)
    else:
        vals = [float(j - r) * 0.5 for r in range(b) for j in range(c)]
        out += struct.pack("<%df" % (b * c), *vals)
    return out


def store(c, b, t, retained, bpe, k, n_images):
    data = header(c, b, t, retained, bpe, k)
    for e in range(retained):
        for i in range(bpe):
            data += record(e, i, c, b, k, n_images)
    return data


def main():
    q = store(5, 3, 4, 2, 2, 2, 10)
    f = store(4, 2, 3, 1, 1, 0, 6)
    with open("small_store.slbl", "wb") as fh:
        fh.write(q)
    with open("small_full.slbl", "wb") as fh:
        fh.write(f)
    # Per-record logits bytes: 3*2*(4+4) = 48 of a 151-byte record.
    expected = {
        "small_store.slbl": {"total_bytes": len(q), "logits_bytes": 4 * 48,
                             "logits_fraction": 4 * 48 / len(q)},
        "small_full.slbl": {"total_bytes": len(f), "logits_bytes": 2 * 4 * 4,
                            "logits_fraction": 2 * 4 * 4 / len(f)},
    }
    with open("expected.json", "w") as fh:
        json.dump(expected, fh, indent=2)
        fh.write("\n")


if __name__ == "__main__":
    main()
