#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <string>

#include "causal_pomdp/latent_model.hpp"
#include "causal_pomdp/pomdp.hpp"

namespace causal_pomdp {

/// Filtered latent posterior q(z_t | h_t, i = 1).
struct BeliefVector {
  Distribution probs;
  std::size_t step = 0;
};

/// Forward recursion over the learned model in the interventional regime.
/// Throws ImpossibleHistory when the model gives the history zero mass.
BeliefVector filter_belief(const AugmentedModel& model, const History& history);

/// Deconfounded next-observation distribution q(o_{t+1} | h_t, do(a_t)).
Distribution recovered_transition(const AugmentedModel& model, const History& history, int action);

/// Backdoor adjustment p(y | do(a)) = sum_c p(c) p(y | c, a).
/// `conditional` has one row per (confounder c, action a) at index c * n_actions + a.
/// Returns one row per action.
Table deconfound_bandit(std::span<const double> prior, const Table& conditional, int n_actions);

/// Interval for the product over t of recovered q(o_{t+1} | h_t, a_t, i=1)
/// given observational-regime quantities.
struct BoundEnvelope {
  double lower = 0.0;
  double upper = 1.0;
  bool supported = false; // false: cell unseen in the observational regime, bounds vacuous
  std::string cell;
};

BoundEnvelope theorem1_bounds(std::span<const double> obs_policy_probs,
                              std::span<const double> obs_transition_probs);

/// Per-step observational-regime conditionals along one trajectory:
/// p(a_t | h_t, i=0) and p(o_{t+1} | h_t, a_t, i=0). Empty when the prefix
/// has zero observational probability.
struct ObservationalSteps {
  std::vector<double> policy;
  std::vector<double> transition;
  bool supported = true;
};

/// Exact quantities from a known environment and privileged policy.
ObservationalSteps exact_observational_steps(const TabularPOMDP& pomdp, const Policy& privileged,
                                             const Episode& trajectory);
/// The fitted model's own observational-regime conditionals.
ObservationalSteps model_observational_steps(const AugmentedModel& model, const Episode& trajectory);

/// Empirical prefix counts of regime-0 episodes.
class ObservationalCounts {
public:
  explicit ObservationalCounts(const RegimeDataset& data);
  ObservationalSteps steps(const Episode& trajectory) const;
  double count(const std::vector<int>& prefix) const;

private:
  std::map<std::vector<int>, double> prefix_weight_;
};

/// Product over t of recovered q(o_{t+1} | h_t, a_t, i=1); zero when the
/// model assigns the prefix no mass.
double recovered_product(const AugmentedModel& model, const Episode& trajectory);

std::string cell_key(const Episode& trajectory);

struct BoundRow {
  BoundEnvelope envelope;
  double estimate = 0.0;
};

/// Envelopes for every trajectory of `steps` transitions that is reachable
/// under the data or environment, together with the model's estimate.
std::vector<BoundRow> bound_table(const AugmentedModel& model,
                                  const std::function<ObservationalSteps(const Episode&)>& reference,
                                  int steps);

/// CSV with header cell,lower,upper,estimate,supported.
void write_bound_report(const std::vector<BoundRow>& rows, std::ostream& out);

} // namespace causal_pomdp
