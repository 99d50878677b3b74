#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include <json.hpp>

#include "causal_pomdp/pomdp.hpp"
#include "causal_pomdp/random.hpp"
#include "causal_pomdp/types.hpp"

namespace causal_pomdp {

inline constexpr double kProbabilityFloor = 1e-12;

/// Tabular latent model of the augmented POMDP:
///   q(z_0) q(o_0|z_0) prod_t q(a_t|z_t,i) q(z_{t+1}|z_t,a_t) q(o_{t+1}|z_{t+1})
/// with the interventional-regime policy left unmodelled (it does not depend
/// on z and cancels from every causal query).
struct AugmentedModel {
  int n_latent = 0;
  int n_obs = 0;
  int n_actions = 0;
  Distribution latent_prior; // q(z_0)
  Table emission;            // row z -> q(o | z)
  Table latent_trans;        // row z * n_actions + a -> q(z' | z, a)
  Table obs_policy;          // row z -> q(a | z, i = 0)
  double regime_prior = 0.5; // q(i = 1); only used for sampling

  std::span<const double> trans_row(int z, int a) const {
    return latent_trans.row(static_cast<std::size_t>(z) * n_actions + a);
  }
  HiddenChain chain() const { return {n_latent, n_actions, n_obs, latent_prior, &latent_trans, &emission}; }
  bool operator==(const AugmentedModel&) const = default;
};

void validate_model(const AugmentedModel& model, double tol = 1e-9);

/// Near-uniform rows with small uniform noise, normalized.
AugmentedModel random_model(int n_latent, int n_obs, int n_actions, Rng& rng, double noise = 0.1);

/// Embeds a POMDP in a latent model with |Z| >= |S|; extra latent units are
/// unreachable. `privileged` (if given) becomes the observational policy.
AugmentedModel embed_pomdp(const TabularPOMDP& pomdp, int n_latent, const Policy* privileged = nullptr);

/// Raises every entry to at least `eps` and renormalizes each row.
void apply_floor(AugmentedModel& model, double eps = kProbabilityFloor);

struct ForwardResult {
  double log_prob = 0.0;            // log q(tau | i); -inf when impossible
  std::vector<Distribution> beliefs; // filtered posteriors over Z, one per observation
  std::optional<std::size_t> failed_step;
};

/// Scaled forward recursion. In regime 0 each step includes q(a_t | z_t, i=0).
ForwardResult forward_log_likelihood(const AugmentedModel& model, const Episode& episode);

/// Weighted sum of episode log-likelihoods.
double dataset_objective(const AugmentedModel& model, const RegimeDataset& data);

/// Expected sufficient statistics from forward-backward.
struct ExpectedCounts {
  Distribution prior;
  Table emission;
  Table trans;
  Table policy;
  double log_likelihood = 0.0;
  double total_weight = 0.0;
};

ExpectedCounts expected_counts(const AugmentedModel& model, const RegimeDataset& data);

/// One Baum-Welch step. Rows with no expected mass keep their previous
/// values; all rows are floored at kProbabilityFloor.
AugmentedModel em_step(const AugmentedModel& model, const RegimeDataset& data);

/// Unconstrained parameterization: each row is the softmax of a score row.
struct ModelScores {
  int n_latent = 0, n_obs = 0, n_actions = 0;
  Table prior; // 1 x Z
  Table emission;
  Table trans;
  Table policy;

  std::size_t size() const;
  double& at(std::size_t i);
  double at(std::size_t i) const;
};

ModelScores scores_from_model(const AugmentedModel& model);
AugmentedModel model_from_scores(const ModelScores& scores);
ModelScores zero_scores_like(const ModelScores& scores);

/// Gradient of the negative weighted objective with respect to the scores.
/// Uses d log L / d s_k = n_k - (sum_j n_j) p_k with expected counts n.
ModelScores negative_objective_gradient(const ModelScores& scores, const RegimeDataset& data,
                                        double* objective = nullptr);

enum class FitMethod { em, gradient };

FitMethod parse_fit_method(const std::string& s);
std::string to_string(FitMethod m);

struct FitConfig {
  FitMethod method = FitMethod::gradient;
  int latent_size = 32;
  int n_restarts = 1;
  int max_epochs = 500;
  int steps_per_epoch = 50;
  int batch_size = 32;
  double learning_rate = 1e-2;
  int plateau_patience = 10;
  int stop_patience = 20;
  double em_tolerance = 1e-9;
  std::uint64_t seed = 0;
  double init_noise = 0.1;

  void validate() const;
};

struct FitResult {
  AugmentedModel model;
  double objective = -std::numeric_limits<double>::infinity();
  int best_restart = 0;
  int epochs = 0;
  std::vector<double> restart_objectives;
};

/// Fits n_restarts independent initializations and keeps the best.
FitResult fit(const RegimeDataset& data, const FitConfig& config, int n_obs, int n_actions);
/// Same, with alphabet sizes inferred from the largest symbols in the data.
FitResult fit(const RegimeDataset& data, const FitConfig& config);

nlohmann::json model_to_json(const AugmentedModel& model);
AugmentedModel model_from_json(const nlohmann::json& j);

} // namespace causal_pomdp
