#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "causal_pomdp/random.hpp"
#include "causal_pomdp/types.hpp"

namespace causal_pomdp {

/// Discrete POMDP with tabular dynamics. Rewards live on observations, so
/// the return of a trajectory is the sum of reward(o_t) for t = 0..H.
struct TabularPOMDP {
  int n_states = 0;
  int n_obs = 0;
  int n_actions = 0;
  int horizon = 1;
  Distribution init;          // p_init(s_0)
  Table trans;                // row s * n_actions + a -> p(s' | s, a)
  Table obs;                  // row s -> p(o | s)
  std::vector<double> reward; // r(o)

  std::span<const double> trans_row(int s, int a) const {
    return trans.row(static_cast<std::size_t>(s) * n_actions + a);
  }
  bool operator==(const TabularPOMDP&) const = default;
};

/// Checks shapes and that every probability row is normalized. Returns the
/// argument unchanged; throws ValidationError naming the first violation.
const TabularPOMDP& validate_pomdp(const TabularPOMDP& pomdp);

enum class PolicyKind { standard, privileged };

/// Tabular behaviour policy.
///  - standard with one row: ignores the history entirely
///  - standard with n_obs rows: conditions on the last observation
///  - privileged with n_states rows: conditions on the hidden state
struct Policy {
  PolicyKind kind = PolicyKind::standard;
  Table probs;

  static Policy uniform(int n_actions);
  static Policy constant(int n_actions, int action);

  bool history_independent() const { return kind == PolicyKind::standard && probs.rows() == 1; }
  bool exploratory() const;
  std::span<const double> row(int last_obs, int state) const;
};

void validate_policy(const Policy& policy, const TabularPOMDP& pomdp);

/// Non-owning view of an action-conditioned hidden chain: a prior over hidden
/// units, a transition table (row h * n_actions + a) and an emission table.
/// Both the true POMDP and a learned latent model expose one.
struct HiddenChain {
  int n_hidden = 0;
  int n_actions = 0;
  int n_obs = 0;
  std::span<const double> prior;
  const Table* transition = nullptr;
  const Table* emission = nullptr;
};

HiddenChain chain_of(const TabularPOMDP& pomdp);

/// Forward filter over a HiddenChain. Holds the normalized posterior over
/// hidden units given the observed prefix. The chain's tables must outlive
/// the filter.
class BeliefFilter {
public:
  explicit BeliefFilter(const HiddenChain& chain);

  /// Marginal of the first observation.
  Distribution initial_observation() const;
  void observe_first(int observation);
  /// Predictive distribution of the next observation under `action`.
  Distribution predict(int action) const;
  void advance(int action, int observation);

  const Distribution& belief() const { return belief_; }
  std::size_t step() const { return step_; }
  bool started() const { return started_; }
  const HiddenChain& chain() const { return chain_; }

private:
  HiddenChain chain_;
  Distribution belief_;
  std::size_t step_ = 0;
  bool started_ = false;
};

/// Runs the filter over a whole history. Throws ImpossibleHistory.
BeliefFilter filter_history(const HiddenChain& chain, const History& history);

/// Ancestral sample from the augmented POMDP. Privileged policies are only
/// allowed in regime 0.
Episode sample_episode(const TabularPOMDP& pomdp, const Policy& policy, int regime, Rng& rng);

RegimeDataset sample_dataset(const TabularPOMDP& pomdp, const Policy& policy, int regime,
                             std::size_t count, std::uint64_t seed, std::uint64_t first_index = 0);

/// Ground-truth interventional transition p(o_{t+1} | h_t, do(a_t)),
/// filtered on the true state space.
Distribution true_transition(const TabularPOMDP& pomdp, const History& history, int action);

/// Exact probability of an episode's observations and actions under the
/// environment and a behaviour policy (regime is taken from the policy kind).
double trajectory_probability(const TabularPOMDP& pomdp, const Policy& policy,
                              const Episode& episode);

/// Every episode with positive probability, weighted by its probability.
/// Intended for small problems only; throws if more than `max_episodes`.
RegimeDataset enumerate_episodes(const TabularPOMDP& pomdp, const Policy& policy, int regime,
                                 double total_weight = 1.0, std::size_t max_episodes = 1'000'000);

} // namespace causal_pomdp
