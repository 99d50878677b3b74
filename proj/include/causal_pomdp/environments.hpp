#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "causal_pomdp/pomdp.hpp"

namespace causal_pomdp {

/// A named behaviour setting: the privileged (state-conditioned) expert that
/// produces observational data and the standard policy used for
/// interventional data.
struct Scenario {
  std::string name;
  Policy privileged_policy;
  Policy standard_policy;
};

/// An environment plus its registry of privileged-policy scenarios.
struct Environment {
  std::string name;
  TabularPOMDP pomdp;
  Policy standard_policy;
  std::vector<std::pair<std::string, Policy>> scenarios;

  Scenario scenario(std::string_view scenario_name) const;
  std::vector<std::string> scenario_names() const;
};

namespace door {
// Hidden states: the light before the press, then the door after it.
inline constexpr int kRed = 0, kGreen = 1, kClosedState = 2, kOpenState = 3;
inline constexpr int kClosed = 0, kOpen = 1; // observations
inline constexpr int kButtonA = 0, kButtonB = 1;
} // namespace door

namespace tiger {
inline constexpr int kLeft = 0, kRight = 1;
inline constexpr int kListen = 0, kOpenLeft = 1, kOpenRight = 2;
// Reward events folded into states and observations.
inline constexpr int kListenCost = 0, kTigerEvent = 1, kTreasureEvent = 2;
inline constexpr int kHorizon = 50;
constexpr int state(int tiger_side, int event) { return tiger_side * 3 + event; }
constexpr int observation(int roar_side, int event) { return roar_side * 3 + event; }
constexpr int roar_of(int observation) { return observation / 3; }
constexpr int event_of(int observation) { return observation % 3; }
} // namespace tiger

Environment door_environment();
Environment tiger_environment();

/// Door bandit with the privileged policy of the named scenario.
std::pair<TabularPOMDP, Scenario> make_door(std::string_view scenario_name);
/// Tiger problem (H = 50) with the privileged policy of the named scenario.
std::pair<TabularPOMDP, Scenario> make_tiger(std::string_view scenario_name);

/// Compact p(tiger_{t+1} | tiger_t, action) from the original tiger tables,
/// row tiger * 3 + action.
Table tiger_side_transition();

nlohmann::json environment_to_json(const Environment& env);
Environment environment_from_json(const nlohmann::json& j);

/// "door", "tiger", or a path to an environment JSON document.
Environment load_environment(const std::string& name_or_path);

} // namespace causal_pomdp
