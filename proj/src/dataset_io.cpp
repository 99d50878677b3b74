#include "causal_pomdp/dataset_io.hpp"

#include <fstream>
#include <sstream>

namespace causal_pomdp {

using nlohmann::json;

void write_dataset(const RegimeDataset& data, std::ostream& out) {
  for (const Episode& ep : data) {
    json j;
    j["regime"] = ep.regime;
    j["obs"] = ep.observations;
    j["actions"] = ep.actions;
    if (ep.weight != 1.0) j["weight"] = ep.weight;
    out << j.dump() << '\n';
  }
}

void write_dataset(const RegimeDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_dataset(data, out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

namespace {

std::vector<int> symbols(const json& j, const char* key, int limit, std::size_t line) {
  if (!j.contains(key)) throw ParseError(std::string("missing field \"") + key + "\"", line);
  const json& arr = j.at(key);
  if (!arr.is_array()) throw ParseError(std::string("\"") + key + "\" must be an array", line);
  std::vector<int> out;
  out.reserve(arr.size());
  for (const json& v : arr) {
    if (!v.is_number_integer()) throw ParseError(std::string("non-integer symbol in \"") + key + "\"", line);
    const auto x = v.get<long long>();
    if (x < 0 || (limit > 0 && x >= limit))
      throw ParseError(std::string("symbol ") + std::to_string(x) + " out of range in \"" + key + "\"", line);
    out.push_back(static_cast<int>(x));
  }
  return out;
}

} // namespace

RegimeDataset read_dataset(std::istream& in, int n_obs, int n_actions) {
  RegimeDataset data;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line);
    }
    if (!j.is_object()) throw ParseError("record must be a JSON object", line);
    Episode ep;
    if (!j.contains("regime") || !j["regime"].is_number_integer())
      throw ParseError("missing or non-integer field \"regime\"", line);
    ep.regime = j["regime"].get<int>();
    if (ep.regime != 0 && ep.regime != 1) throw ParseError("regime must be 0 or 1", line);
    ep.observations = symbols(j, "obs", n_obs, line);
    ep.actions = symbols(j, "actions", n_actions, line);
    if (ep.observations.size() != ep.actions.size() + 1)
      throw ParseError("expected one more observation than actions", line);
    if (j.contains("weight")) {
      if (!j["weight"].is_number()) throw ParseError("\"weight\" must be a number", line);
      ep.weight = j["weight"].get<double>();
      if (!(ep.weight >= 0.0)) throw ParseError("weight must be nonnegative", line);
    }
    data.push_back(std::move(ep));
  }
  return data;
}

RegimeDataset read_dataset(const std::filesystem::path& path, int n_obs, int n_actions) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_dataset(in, n_obs, n_actions);
}

json table_to_json(const Table& t) { return t.to_rows(); }

Table table_from_json(const json& j) {
  return Table::from_rows(j.get<std::vector<std::vector<double>>>());
}

json pomdp_to_json(const TabularPOMDP& p) {
  json j;
  j["n_states"] = p.n_states;
  j["n_obs"] = p.n_obs;
  j["n_actions"] = p.n_actions;
  j["horizon"] = p.horizon;
  j["init"] = p.init;
  j["trans"] = table_to_json(p.trans);
  j["obs"] = table_to_json(p.obs);
  j["reward"] = p.reward;
  return j;
}

TabularPOMDP pomdp_from_json(const json& j) {
  TabularPOMDP p;
  try {
    p.n_states = j.at("n_states").get<int>();
    p.n_obs = j.at("n_obs").get<int>();
    p.n_actions = j.at("n_actions").get<int>();
    p.horizon = j.at("horizon").get<int>();
    p.init = j.at("init").get<std::vector<double>>();
    p.trans = table_from_json(j.at("trans"));
    p.obs = table_from_json(j.at("obs"));
    p.reward = j.at("reward").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("environment document: ") + e.what());
  }
  validate_pomdp(p);
  return p;
}

json policy_to_json(const Policy& policy) {
  return {{"kind", policy.kind == PolicyKind::privileged ? "privileged" : "standard"},
          {"probs", table_to_json(policy.probs)}};
}

Policy policy_from_json(const json& j) {
  Policy p;
  const auto kind = j.value("kind", std::string("privileged"));
  if (kind == "privileged")
    p.kind = PolicyKind::privileged;
  else if (kind == "standard")
    p.kind = PolicyKind::standard;
  else
    throw ValidationError("unknown policy kind \"" + kind + "\"");
  p.probs = table_from_json(j.at("probs"));
  return p;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON in ") + path.string() + ": " + e.what(), 1);
  }
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

} // namespace causal_pomdp
