// SPDX-License-Identifier: Apache-2.0
/**
 * @file   report_json.cpp
 * @brief  JSON views of reports produced by the library.
 */
#include <slbl/report_json.hpp>

#include <slbl/errors.hpp>

namespace slbl {

using nlohmann::json;

json to_json(const StoreHeader &h) {
  return {{"num_classes", h.num_classes},
          {"batch_size", h.batch_size},
          {"total_epochs", h.total_epochs},
          {"retained_epochs", h.retained_epochs},
          {"batches_per_epoch", h.batches_per_epoch},
          {"k", h.k},
          {"quantized", h.quantized()}};
}

json to_json(const StorageBreakdown &b) {
  json components = json::object();
  for (std::size_t i = 0; i < kStorageComponentCount; ++i) {
    const auto c = static_cast<StorageComponent>(i);
    components[std::string(component_name(c))] = {
        {"bytes", b.of(c)}, {"fraction", b.fraction(c)}};
  }
  return {{"total_bytes", b.total_bytes},
          {"components", components},
          {"logits_fraction", b.fraction(StorageComponent::Logits)},
          {"logits_supervision_share",
           b.supervision_share(StorageComponent::Logits)},
          {"auxiliary_bytes", b.auxiliary_bytes()}};
}

json to_json(const CompressionReport &r) {
  return {{"theoretical_ratio", r.theoretical_z_ratio},
          {"actual_ratio", r.actual_ratio},
          {"baseline_bytes", r.baseline_bytes},
          {"baseline_logit_bytes", r.baseline_logit_bytes},
          {"store_bytes", r.store_bytes}};
}

json to_json(const DiversityReport &r) {
  json per_class = json::array();
  for (const auto &c : r.per_class)
    per_class.push_back({{"class_id", c.class_id},
                         {"mean", c.mean},
                         {"std", c.std},
                         {"pairs", c.pairs}});
  json out = {{"per_class", per_class},
              {"skipped_classes", r.skipped_classes},
              {"overall_mean_cosine", r.overall_mean},
              {"overall_std_cosine", r.overall_std}};
  if (r.mmd_squared)
    out["mmd_squared"] = *r.mmd_squared;
  if (r.bandwidth)
    out["bandwidth"] = *r.bandwidth;
  return out;
}

json to_json(const TrainResult &r) {
  return {{"epoch_loss", r.epoch_loss},
          {"teacher_tau", r.teacher_tau},
          {"student_tau", r.student_tau},
          {"calibrated_tau", r.calibrated_tau},
          {"stored_epoch", r.stored_epoch},
          {"test_accuracy", r.test_accuracy},
          {"storage_bytes", r.storage_bytes},
          {"compression", to_json(r.compression)}};
}

json to_json(const ParetoTable &t) {
  json points = json::array();
  for (const auto &p : t.points)
    points.push_back({{"pruning_rate", p.pruning_rate},
                      {"k", p.k},
                      {"storage_bytes", p.storage_bytes},
                      {"theoretical_ratio", p.theoretical_ratio},
                      {"actual_ratio", p.actual_ratio},
                      {"accuracies", p.accuracies},
                      {"mean_accuracy", p.mean_accuracy},
                      {"non_dominated", p.non_dominated}});
  return {{"points", points}};
}

json to_json(const TaskSpec &s) {
  return {{"num_classes", s.num_classes},
          {"dim", s.dim},
          {"train_per_class", s.train_per_class},
          {"test_per_class", s.test_per_class},
          {"separation", s.separation},
          {"noise", s.noise},
          {"ipc", s.ipc},
          {"distilled_noise", s.distilled_noise},
          {"distilled_source", s.distilled_source == DistilledSource::NoisyClassMeans
                                   ? "class_means"
                                   : "synth"},
          {"seed", s.seed}};
}

json to_json(const TrainConfig &c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"pruning_rate", c.pruning_rate},
          {"k", c.k},
          {"dkr", c.dkr},
          {"ca", c.ca},
          {"fixed_tau", c.fixed_tau},
          {"schedule",
           {{"initial_tau", c.schedule.initial_tau},
            {"decay_factor", c.schedule.decay_factor},
            {"step_epochs", c.schedule.step_epochs},
            {"floor_tau", c.schedule.floor_tau}}},
          {"scale_kd_by_tau_squared", c.scale_kd_by_tau_squared},
          {"label_smoothing", c.label_smoothing},
          {"shuffle_reuse", c.shuffle_reuse},
          {"seed", c.seed}};
}

json to_json(const LinearClassifier &m) {
  return {{"num_classes", m.num_classes},
          {"dim", m.dim},
          {"weights", m.weights},
          {"bias", m.bias}};
}

LinearClassifier classifier_from_json(const json &doc) {
  LinearClassifier m;
  try {
    m.num_classes = doc.at("num_classes").get<std::uint32_t>();
    m.dim = doc.at("dim").get<std::size_t>();
    m.weights = doc.at("weights").get<std::vector<double>>();
    m.bias = doc.at("bias").get<std::vector<double>>();
    m.validate();
  } catch (const json::exception &e) {
    throw FormatError(std::string("bad classifier document: ") + e.what());
  } catch (const std::invalid_argument &e) {
    throw FormatError(std::string("bad classifier document: ") + e.what());
  }
  return m;
}

json inspect_report(const StoreHeader &header) {
  const StorageBreakdown b = storage_breakdown(header);
  return {{"header", to_json(header)},
          {"storage", to_json(b)},
          {"compression", to_json(compression_report(b, BaselineShape::of(header)))}};
}

} // namespace slbl
