#include "causal_pomdp/environments.hpp"

#include "causal_pomdp/dataset_io.hpp"

namespace causal_pomdp {

using nlohmann::json;

namespace {

// Privileged policies over the confounder (light or tiger side), one row per
// confounder value.
const json kDoorScenarios = json::parse(R"({
  "noisy_good":        [[0.9, 0.1], [0.4, 0.6]],
  "random":            [[0.5, 0.5], [0.5, 0.5]],
  "perfect_good":      [[1.0, 0.0], [0.0, 1.0]],
  "perfect_bad":       [[0.0, 1.0], [1.0, 0.0]],
  "positively_biased": [[0.8, 0.2], [1.0, 0.0]],
  "negatively_biased": [[1.0, 0.0], [0.8, 0.2]]
})");

const json kTigerScenarios = json::parse(R"({
  "noisy_good":               [[0.05, 0.3, 0.65], [0.05, 0.8, 0.15]],
  "random":                   "uniform",
  "very_good":                [[0.05, 0.0, 0.95], [0.05, 0.95, 0.0]],
  "very_bad":                 [[0.05, 0.95, 0.0], [0.05, 0.0, 0.95]],
  "optimistic_right_biased":  [[0.05, 0.20, 0.75], [0.05, 0.95, 0.00]],
  "pessimistic_right_biased": [[0.05, 0.95, 0.0], [0.05, 0.20, 0.75]]
})");

const char* const kDoorOrder[] = {"noisy_good", "random", "perfect_good",
                                  "perfect_bad", "positively_biased", "negatively_biased"};
const char* const kTigerOrder[] = {"noisy_good", "random", "very_good",
                                   "very_bad", "optimistic_right_biased", "pessimistic_right_biased"};

TabularPOMDP door_pomdp() {
  using namespace door;
  TabularPOMDP p;
  p.n_states = 4;
  p.n_obs = 2;
  p.n_actions = 2;
  p.horizon = 1;
  p.init = {0.6, 0.4, 0.0, 0.0};
  p.trans = Table(8, 4, 0.0);
  auto set = [&](int s, int a, int s2) { p.trans(s * 2 + a, s2) = 1.0; };
  set(kRed, kButtonA, kOpenState);
  set(kRed, kButtonB, kClosedState);
  set(kGreen, kButtonA, kClosedState);
  set(kGreen, kButtonB, kOpenState);
  for (int a = 0; a < 2; ++a) {
    set(kClosedState, a, kClosedState);
    set(kOpenState, a, kOpenState);
  }
  // the door is closed until a button is pressed
  p.obs = Table::from_rows({{1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
  p.reward = {0.0, 1.0};
  return p;
}

TabularPOMDP tiger_pomdp() {
  using namespace tiger;
  const Table side = tiger_side_transition();
  // p(reward event | tiger, action)
  const double event[2][3][3] = {
      {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, // tiger left: listen, open left, open right
      {{1, 0, 0}, {0, 0, 1}, {0, 1, 0}}, // tiger right
  };
  const double roar[2][2] = {{0.85, 0.15}, {0.15, 0.85}};

  TabularPOMDP p;
  p.n_states = 6;
  p.n_obs = 6;
  p.n_actions = 3;
  p.horizon = kHorizon;
  p.init.assign(6, 0.0);
  p.init[state(kLeft, kListenCost)] = 0.5;
  p.init[state(kRight, kListenCost)] = 0.5;
  p.trans = Table(18, 6, 0.0);
  for (int t = 0; t < 2; ++t)
    for (int e = 0; e < 3; ++e)
      for (int a = 0; a < 3; ++a)
        for (int t2 = 0; t2 < 2; ++t2)
          for (int e2 = 0; e2 < 3; ++e2)
            p.trans(state(t, e) * 3 + a, state(t2, e2)) = side(t * 3 + a, t2) * event[t][a][e2];
  p.obs = Table(6, 6, 0.0);
  for (int t = 0; t < 2; ++t)
    for (int e = 0; e < 3; ++e)
      for (int r = 0; r < 2; ++r) p.obs(state(t, e), observation(r, e)) = roar[t][r];
  const double event_reward[3] = {-1.0, -100.0, 10.0};
  p.reward.resize(6);
  for (int o = 0; o < 6; ++o) p.reward[o] = event_reward[event_of(o)];
  return p;
}

Policy expand_policy(const json& spec, const std::vector<int>& row_of_state, int n_actions) {
  Policy p{PolicyKind::privileged, Table(row_of_state.size(), n_actions)};
  if (spec.is_string() && spec.get<std::string>() == "uniform") {
    for (double& v : p.probs.data()) v = 1.0 / n_actions;
    return p;
  }
  const Table compact = table_from_json(spec);
  for (std::size_t s = 0; s < row_of_state.size(); ++s) {
    const int r = row_of_state[s];
    for (int a = 0; a < n_actions; ++a) p.probs(s, a) = r < 0 ? 1.0 / n_actions : compact(r, a);
  }
  return p;
}

Environment build(std::string name, TabularPOMDP pomdp, const json& scenarios,
                  const char* const* order, std::size_t n, const std::vector<int>& row_of_state) {
  Environment env;
  env.name = std::move(name);
  env.standard_policy = Policy::uniform(pomdp.n_actions);
  for (std::size_t i = 0; i < n; ++i) {
    Policy p = expand_policy(scenarios.at(order[i]), row_of_state, pomdp.n_actions);
    validate_policy(p, pomdp);
    env.scenarios.emplace_back(order[i], std::move(p));
  }
  env.pomdp = std::move(pomdp);
  validate_pomdp(env.pomdp);
  return env;
}

} // namespace

Table tiger_side_transition() {
  return Table::from_rows({
      {1.0, 0.0}, {0.5, 0.5}, {0.5, 0.5}, // left: listen, open left, open right
      {0.0, 1.0}, {0.5, 0.5}, {0.5, 0.5}, // right
  });
}

Scenario Environment::scenario(std::string_view scenario_name) const {
  for (const auto& [n, p] : scenarios)
    if (n == scenario_name) return {n, p, standard_policy};
  std::string known;
  for (const auto& [n, p] : scenarios) known += (known.empty() ? "" : ", ") + n;
  throw ValidationError("unknown scenario \"" + std::string(scenario_name) + "\" for " + name +
                        " (known: " + known + ")");
}

std::vector<std::string> Environment::scenario_names() const {
  std::vector<std::string> out;
  for (const auto& s : scenarios) out.push_back(s.first);
  return out;
}

Environment door_environment() {
  // post-press states never act within the horizon; they get uniform rows
  return build("door", door_pomdp(), kDoorScenarios, kDoorOrder, std::size(kDoorOrder),
               {0, 1, -1, -1});
}

Environment tiger_environment() {
  return build("tiger", tiger_pomdp(), kTigerScenarios, kTigerOrder, std::size(kTigerOrder),
               {0, 0, 0, 1, 1, 1});
}

std::pair<TabularPOMDP, Scenario> make_door(std::string_view scenario_name) {
  Environment env = door_environment();
  Scenario sc = env.scenario(scenario_name);
  return {std::move(env.pomdp), std::move(sc)};
}

std::pair<TabularPOMDP, Scenario> make_tiger(std::string_view scenario_name) {
  Environment env = tiger_environment();
  Scenario sc = env.scenario(scenario_name);
  return {std::move(env.pomdp), std::move(sc)};
}

json environment_to_json(const Environment& env) {
  json j;
  j["name"] = env.name;
  j["pomdp"] = pomdp_to_json(env.pomdp);
  j["standard_policy"] = policy_to_json(env.standard_policy);
  json sc = json::array();
  for (const auto& [n, p] : env.scenarios) sc.push_back({{"name", n}, {"policy", policy_to_json(p)}});
  j["scenarios"] = sc;
  return j;
}

Environment environment_from_json(const json& j) {
  Environment env;
  try {
    env.name = j.value("name", std::string("custom"));
    env.pomdp = pomdp_from_json(j.at("pomdp"));
    env.standard_policy = j.contains("standard_policy") ? policy_from_json(j.at("standard_policy"))
                                                        : Policy::uniform(env.pomdp.n_actions);
    if (j.contains("scenarios"))
      for (const json& s : j.at("scenarios"))
        env.scenarios.emplace_back(s.at("name").get<std::string>(), policy_from_json(s.at("policy")));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("environment document: ") + e.what());
  }
  validate_policy(env.standard_policy, env.pomdp);
  if (env.standard_policy.kind != PolicyKind::standard || !env.standard_policy.exploratory())
    throw ValidationError("standard policy must be a strictly positive standard policy");
  for (const auto& [n, p] : env.scenarios) validate_policy(p, env.pomdp);
  return env;
}

Environment load_environment(const std::string& name_or_path) {
  if (name_or_path == "door") return door_environment();
  if (name_or_path == "tiger") return tiger_environment();
  if (!std::filesystem::exists(name_or_path))
    throw ValidationError("unknown environment \"" + name_or_path + "\"");
  return environment_from_json(read_json_file(name_or_path));
}

} // namespace causal_pomdp
