#include <algorithm>
#include <cmath>

#include "causal_pomdp/latent_model.hpp"
#include "causal_pomdp/parallel.hpp"

namespace causal_pomdp {

namespace {

struct Adam {
  double lr;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<double> m, v;
  long step = 0;

  explicit Adam(double learning_rate, std::size_t n) : lr(learning_rate), m(n, 0.0), v(n, 0.0) {}

  void apply(ModelScores& params, const ModelScores& grad) {
    ++step;
    const double c1 = 1.0 - std::pow(beta1, step);
    const double c2 = 1.0 - std::pow(beta2, step);
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = grad.at(i);
      m[i] = beta1 * m[i] + (1.0 - beta1) * g;
      v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
      params.at(i) -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
};

double regime_one_fraction(const RegimeDataset& data) {
  double w1 = 0.0, w = 0.0;
  for (const Episode& ep : data) {
    w += ep.weight;
    if (ep.regime == 1) w1 += ep.weight;
  }
  return w > 0.0 ? w1 / w : 0.5;
}

struct RestartOutcome {
  AugmentedModel model;
  double objective;
  int epochs;
};

RestartOutcome fit_em(const RegimeDataset& data, const FitConfig& cfg, AugmentedModel model,
                      double total_weight) {
  double prev = -std::numeric_limits<double>::infinity();
  int epoch = 0;
  for (; epoch < cfg.max_epochs; ++epoch) {
    AugmentedModel next = em_step(model, data);
    const double obj = dataset_objective(next, data);
    const bool converged = obj - prev < cfg.em_tolerance * std::max(1.0, total_weight);
    model = std::move(next);
    prev = obj;
    if (converged) {
      ++epoch;
      break;
    }
  }
  return {std::move(model), prev, epoch};
}

RestartOutcome fit_gradient(const RegimeDataset& data, const FitConfig& cfg, const AugmentedModel& init,
                            Rng& rng) {
  ModelScores scores = scores_from_model(init);
  Adam adam(cfg.learning_rate, scores.size());

  std::vector<double> cumulative(data.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) cumulative[i] = acc += data[i].weight;
  if (!(acc > 0.0)) throw ValidationError("fit: dataset has zero total weight");

  double best = std::numeric_limits<double>::infinity();
  int since_best = 0, since_reduce = 0;
  int epoch = 0;
  RegimeDataset batch(cfg.batch_size);
  for (; epoch < cfg.max_epochs; ++epoch) {
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      for (int b = 0; b < cfg.batch_size; ++b) {
        const double u = rng.uniform() * acc;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        const std::size_t idx = std::min<std::size_t>(it - cumulative.begin(), data.size() - 1);
        batch[b] = data[idx];
        batch[b].weight = 1.0 / cfg.batch_size;
      }
      adam.apply(scores, negative_objective_gradient(scores, batch, nullptr));
    }
    // The plateau test uses the full-data loss; minibatch averages are too
    // noisy for a 1e-4 relative threshold.
    const double epoch_loss = -dataset_objective(model_from_scores(scores), data) / acc;
    // relative threshold as in the usual reduce-on-plateau schedulers
    if (epoch == 0 || epoch_loss < best - 1e-4 * std::abs(best)) {
      best = epoch_loss;
      since_best = 0;
      since_reduce = 0;
    } else {
      ++since_best;
      if (++since_reduce > cfg.plateau_patience) {
        adam.lr /= 10.0;
        since_reduce = 0;
      }
      if (since_best >= cfg.stop_patience) {
        ++epoch;
        break;
      }
    }
  }
  AugmentedModel model = model_from_scores(scores);
  apply_floor(model);
  const double obj = dataset_objective(model, data);
  return {std::move(model), obj, epoch};
}

} // namespace

FitResult fit(const RegimeDataset& data, const FitConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw ValidationError("fit: empty dataset");
  int n_obs = 0, n_actions = 0;
  for (const Episode& ep : data) {
    for (int o : ep.observations) n_obs = std::max(n_obs, o + 1);
    for (int a : ep.actions) n_actions = std::max(n_actions, a + 1);
  }
  return fit(data, cfg, n_obs, n_actions);
}

FitResult fit(const RegimeDataset& data, const FitConfig& cfg, int n_obs, int n_actions) {
  cfg.validate();
  if (data.empty()) throw ValidationError("fit: empty dataset");
  double total_weight = 0.0;
  for (const Episode& ep : data) total_weight += ep.weight;

  std::vector<RestartOutcome> outcomes(cfg.n_restarts);
  parallel_for(outcomes.size(), [&](std::size_t r) {
    Rng rng(derive_seed(cfg.seed, {r}));
    AugmentedModel init = random_model(cfg.latent_size, n_obs, n_actions, rng, cfg.init_noise);
    outcomes[r] = cfg.method == FitMethod::em ? fit_em(data, cfg, std::move(init), total_weight)
                                              : fit_gradient(data, cfg, init, rng);
  });

  FitResult result;
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    result.restart_objectives.push_back(outcomes[r].objective);
    // strict comparison keeps the lowest restart index on ties
    if (r == 0 || outcomes[r].objective > result.objective) {
      result.objective = outcomes[r].objective;
      result.best_restart = static_cast<int>(r);
      result.epochs = outcomes[r].epochs;
    }
  }
  result.model = std::move(outcomes[result.best_restart].model);
  result.model.regime_prior = regime_one_fraction(data);
  return result;
}

} // namespace causal_pomdp
