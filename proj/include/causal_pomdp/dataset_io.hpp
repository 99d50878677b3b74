#pragma once

#include <filesystem>
#include <iosfwd>

#include <json.hpp>

#include "causal_pomdp/pomdp.hpp"

namespace causal_pomdp {

// Datasets are JSON lines: {"regime": 0|1, "obs": [...], "actions": [...], "weight": w}.
// "weight" is omitted when it equals 1.

void write_dataset(const RegimeDataset& data, std::ostream& out);
void write_dataset(const RegimeDataset& data, const std::filesystem::path& path);

/// Parses a dataset and range-checks symbols against the given alphabets
/// (pass 0 to skip a check). Throws ParseError carrying the 1-based line.
RegimeDataset read_dataset(std::istream& in, int n_obs = 0, int n_actions = 0);
RegimeDataset read_dataset(const std::filesystem::path& path, int n_obs = 0, int n_actions = 0);

nlohmann::json table_to_json(const Table& t);
Table table_from_json(const nlohmann::json& j);

nlohmann::json pomdp_to_json(const TabularPOMDP& pomdp);
/// Parses and validates.
TabularPOMDP pomdp_from_json(const nlohmann::json& j);

nlohmann::json policy_to_json(const Policy& policy);
Policy policy_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);

} // namespace causal_pomdp
