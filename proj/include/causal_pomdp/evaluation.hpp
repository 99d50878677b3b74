#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

#include "causal_pomdp/latent_model.hpp"
#include "causal_pomdp/planning.hpp"
#include "causal_pomdp/pomdp.hpp"

namespace causal_pomdp {

enum class EvalMode { exact, monte_carlo };

EvalMode parse_eval_mode(const std::string& s);

/// A value with the standard error of its Monte-Carlo estimate (zero in
/// exact mode).
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Expected Jensen-Shannon divergence (nats) between the next-observation
/// models of two chains, over trajectories driven by a uniformly random
/// policy:
///   1/2 E_p[log p(o_0)/m(o_0) + sum_t log p(o_{t+1}|h_t,a_t)/m(...)]
/// + 1/2 E_q[same with q], m = (p + q) / 2.
/// Exact mode enumerates every trajectory and throws std::length_error past
/// `max_nodes`; Monte-Carlo mode samples `n_trajectories` per expectation.
Estimate js_divergence(const HiddenChain& p, const HiddenChain& q, int horizon, EvalMode mode,
                       int n_trajectories = 100, std::uint64_t seed = 0, std::size_t max_nodes = 5'000'000);

Estimate js_divergence(const AugmentedModel& model, const TabularPOMDP& pomdp, EvalMode mode,
                       int n_trajectories = 100, std::uint64_t seed = 0);

/// E[sum_{t=0}^{H} r(o_t)] on the true environment with `controller` acting
/// on observable histories.
Estimate expected_reward(const Controller& controller, const TabularPOMDP& pomdp, EvalMode mode,
                         int n_trajectories = 100, std::uint64_t seed = 0,
                         std::size_t max_nodes = 5'000'000);

class DegenerateSample : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

/// Two-sided Welch t-test with Welch-Satterthwaite degrees of freedom.
/// Throws DegenerateSample when a sample has fewer than two points or zero
/// variance.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> xs);
/// Standard error of the mean; zero for fewer than two points.
double standard_error(std::span<const double> xs);

} // namespace causal_pomdp
