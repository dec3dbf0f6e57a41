// SPDX-License-Identifier: Apache-2.0
/**
 * @file   report_json.hpp
 * @brief  JSON views of reports produced by the library.
 */
#ifndef SLBL_REPORT_JSON_HPP_
#define SLBL_REPORT_JSON_HPP_

#include <slbl/diversity.hpp>
#include <slbl/label_store.hpp>
#include <slbl/trainer.hpp>

#include <json.hpp>

namespace slbl {

nlohmann::json to_json(const StoreHeader &header);
nlohmann::json to_json(const StorageBreakdown &breakdown);
nlohmann::json to_json(const CompressionReport &report);
nlohmann::json to_json(const DiversityReport &report);
nlohmann::json to_json(const TrainResult &result);
nlohmann::json to_json(const ParetoTable &table);
nlohmann::json to_json(const TaskSpec &spec);
nlohmann::json to_json(const TrainConfig &cfg);

nlohmann::json to_json(const LinearClassifier &model);
/// Inverse of to_json(LinearClassifier); throws FormatError on a bad document.
LinearClassifier classifier_from_json(const nlohmann::json &doc);

/// Header + breakdown + compression, as printed by `slbl inspect`.
nlohmann::json inspect_report(const StoreHeader &header);

} // namespace slbl

#endif // SLBL_REPORT_JSON_HPP_
