// SPDX-License-Identifier: Apache-2.0
/**
 * @file   test_cli.cpp
 * @brief  In-process runs of the command-line front end.
 */
#include <doctest.h>

#include <slbl/cli.hpp>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = slbl::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Fresh scratch directory per test case.
fs::path scratch(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / ("slbl_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const fs::path kFixtures = SLBL_FIXTURE_DIR;

Run gen(const fs::path &dir, const std::string &seed = "3") {
  return cli({"gen", "--out-dir", dir.string(), "--train-per-class", "40",
              "--test-per-class", "40", "--teacher-iterations", "500", "--seed", seed,
              "--json"});
}

} // namespace

TEST_CASE("usage errors exit 1") {
  const auto none = cli({});
  CHECK(none.code == slbl::cli::kExitUsage);
  CHECK(none.err.find("Usage") != std::string::npos);
  CHECK(none.out.empty());

  const auto unknown = cli({"frobnicate"});
  CHECK(unknown.code == slbl::cli::kExitUsage);
  CHECK_FALSE(unknown.err.empty());

  CHECK(cli({"inspect"}).code == slbl::cli::kExitUsage);
  CHECK(cli({"inspect", "--store", "/nonexistent/x.slbl"}).code == slbl::cli::kExitUsage);
  CHECK(cli({"--help"}).code == slbl::cli::kExitOk);
  const auto sub_help = cli({"relabel", "--help"});
  CHECK(sub_help.code == slbl::cli::kExitOk);
  CHECK(sub_help.out.find("--pruning-rate") != std::string::npos);
}

TEST_CASE("inspect on the golden fixtures") {
  const json expected = json::parse(slurp(kFixtures / "expected.json"));
  for (const std::string name : {"small_store.slbl", "small_full.slbl"}) {
    const auto r = cli({"inspect", "--store", (kFixtures / name).string(), "--json"});
    REQUIRE(r.code == 0);
    CHECK(r.err.empty());
    const json doc = json::parse(r.out);
    CHECK(doc["storage"]["total_bytes"] == expected[name]["total_bytes"]);
    CHECK(doc["storage"]["components"]["logits"]["bytes"] == expected[name]["logits_bytes"]);
    CHECK(std::abs(doc["storage"]["logits_fraction"].get<double>() -
                   expected[name]["logits_fraction"].get<double>()) < 1e-12);
  }
  const auto table = cli({"inspect", "--store", (kFixtures / "small_store.slbl").string()});
  CHECK(table.code == 0);
  CHECK(table.err.find("logits") != std::string::npos);
  CHECK(json::parse(table.out).contains("compression"));
}

TEST_CASE("corrupt and malformed stores exit 2") {
  const fs::path dir = scratch("corrupt");
  std::string bytes = slurp(kFixtures / "small_store.slbl");
  bytes[6] = 0x7f; // unknown flag bits
  std::ofstream(dir / "bad.slbl", std::ios::binary) << bytes;
  const auto r = cli({"inspect", "--store", (dir / "bad.slbl").string()});
  CHECK(r.code == slbl::cli::kExitData);
  CHECK(r.err.find("error:") != std::string::npos);
  CHECK(r.out.empty());

  std::ofstream(dir / "short.slbl", std::ios::binary) << bytes.substr(0, 40);
  CHECK(cli({"inspect", "--store", (dir / "short.slbl").string()}).code ==
        slbl::cli::kExitData);
}

TEST_CASE("gen, relabel, inspect and train round-trip") {
  const fs::path dir = scratch("pipeline");
  const auto g = gen(dir);
  REQUIRE(g.code == 0);
  CHECK(json::parse(g.out)["rows"]["distilled"] == 100);
  for (const char *f : {"train.sfmx", "test.sfmx", "distilled.sfmx", "teacher.json"})
    CHECK(fs::exists(dir / f));

  const std::string store = (dir / "labels.slbl").string();
  const auto rel = cli({"relabel", "--distilled", (dir / "distilled.sfmx").string(),
                        "--teacher", (dir / "teacher.json").string(), "--out", store,
                        "--epochs", "30", "--pruning-rate", "0.5", "--k", "3", "--json"});
  REQUIRE(rel.code == 0);
  CHECK(rel.err.empty());

  const auto ins = cli({"inspect", "--store", store, "--json"});
  REQUIRE(ins.code == 0);
  const json doc = json::parse(ins.out);
  CHECK(doc["header"]["k"] == 3);
  CHECK(doc["header"]["retained_epochs"] == 15);
  CHECK(doc["storage"]["total_bytes"] == fs::file_size(store));
  CHECK(ins.out == rel.out);

  const fs::path report = dir / "report.json";
  const auto tr = cli({"train", "--store", store, "--distilled", (dir / "distilled.sfmx").string(),
                       "--test", (dir / "test.sfmx").string(), "--report", report.string(),
                       "--json"});
  REQUIRE(tr.code == 0);
  CHECK(tr.err.empty());
  const json result = json::parse(tr.out);
  CHECK(result["result"]["teacher_tau"].size() == 30);
  CHECK(result["result"]["test_accuracy"].get<double>() > 0.5);
  CHECK(result["result"]["storage_bytes"] == fs::file_size(store));
  CHECK(json::parse(slurp(report)) == result);

  const auto met = cli({"metrics", "--features", (dir / "distilled.sfmx").string(),
                        "--reference", (dir / "train.sfmx").string(), "--json"});
  REQUIRE(met.code == 0);
  CHECK(json::parse(met.out)["mmd_squared"].get<double>() >= 0.0);

  const std::string synth_out = (dir / "synth.sfmx").string();
  const auto syn = cli({"synth", "--train", (dir / "train.sfmx").string(), "--teacher",
                        (dir / "teacher.json").string(), "--out", synth_out, "--class", "0",
                        "--class", "4", "--ipc", "5", "--iterations", "50", "--json"});
  REQUIRE(syn.code == 0);
  CHECK(fs::exists(synth_out));
}

TEST_CASE("identical invocations write identical files") {
  const fs::path a = scratch("same_a"), b = scratch("same_b");
  REQUIRE(gen(a).code == 0);
  REQUIRE(gen(b).code == 0);
  for (const char *f : {"train.sfmx", "test.sfmx", "distilled.sfmx", "teacher.json"})
    CHECK(slurp(a / f) == slurp(b / f));
  for (const auto &dir : {a, b})
    REQUIRE(cli({"relabel", "--distilled", (dir / "distilled.sfmx").string(), "--teacher",
                 (dir / "teacher.json").string(), "--out", (dir / "s.slbl").string(),
                 "--epochs", "10", "--seed", "5", "--json"})
                .code == 0);
  CHECK(slurp(a / "s.slbl") == slurp(b / "s.slbl"));

  const fs::path c = scratch("same_c");
  REQUIRE(gen(c, "4").code == 0);
  CHECK(slurp(a / "train.sfmx") != slurp(c / "train.sfmx"));
}

TEST_CASE("seed falls back to SLBL_SEED") {
  const fs::path a = scratch("env_a"), b = scratch("env_b");
  REQUIRE(gen(a, "8").code == 0);
  ::setenv("SLBL_SEED", "8", 1);
  const auto r = cli({"gen", "--out-dir", b.string(), "--train-per-class", "40",
                      "--test-per-class", "40", "--teacher-iterations", "500", "--json"});
  ::unsetenv("SLBL_SEED");
  REQUIRE(r.code == 0);
  CHECK(slurp(a / "train.sfmx") == slurp(b / "train.sfmx"));
  CHECK(json::parse(r.out)["task"]["seed"] == 8);
}

TEST_CASE("flags override the config file, which overrides defaults") {
  const fs::path dir = scratch("config");
  REQUIRE(gen(dir).code == 0);
  std::ofstream(dir / "run.toml") << "[relabel]\nk = 2\nepochs = 12\n";
  const std::vector<std::string> base = {
      "--config", (dir / "run.toml").string(), "relabel",
      "--distilled", (dir / "distilled.sfmx").string(),
      "--teacher", (dir / "teacher.json").string(),
      "--out", (dir / "s.slbl").string(), "--json"};

  const auto from_file = cli(base);
  REQUIRE(from_file.code == 0);
  CHECK(json::parse(from_file.out)["header"]["k"] == 2);
  CHECK(json::parse(from_file.out)["header"]["total_epochs"] == 12);

  auto args = base;
  args.insert(args.end(), {"--k", "4"});
  const auto flagged = cli(args);
  REQUIRE(flagged.code == 0);
  CHECK(json::parse(flagged.out)["header"]["k"] == 4);
  CHECK(json::parse(flagged.out)["header"]["total_epochs"] == 12);

  const auto defaults = cli(std::vector<std::string>(base.begin() + 2, base.end()));
  REQUIRE(defaults.code == 0);
  CHECK(json::parse(defaults.out)["header"]["k"] == 0);
  CHECK(json::parse(defaults.out)["header"]["total_epochs"] == 300);
}

TEST_CASE("out-of-range values are usage errors") {
  const fs::path dir = scratch("range");
  REQUIRE(gen(dir).code == 0);
  const auto r = cli({"relabel", "--distilled", (dir / "distilled.sfmx").string(), "--teacher",
                      (dir / "teacher.json").string(), "--out", (dir / "s.slbl").string(),
                      "--k", "50"});
  CHECK(r.code == slbl::cli::kExitUsage);
  CHECK(cli({"gen", "--out-dir", dir.string(), "--classes", "1"}).code == slbl::cli::kExitUsage);
}

TEST_CASE("small pareto sweep emits a sorted table") {
  const auto r = cli({"pareto", "--train-per-class", "30", "--test-per-class", "30",
                      "--teacher-iterations", "300", "--epochs", "10", "--pruning-rates", "0",
                      "0.5", "--ks", "0", "2", "--seeds", "0", "1", "--jobs", "2", "--json"});
  REQUIRE(r.code == 0);
  CHECK(r.err.empty());
  const json doc = json::parse(r.out);
  const auto &points = doc["table"]["points"];
  REQUIRE(points.size() == 4);
  for (std::size_t i = 1; i < points.size(); ++i)
    CHECK(points[i - 1]["storage_bytes"] <= points[i]["storage_bytes"]);
}
