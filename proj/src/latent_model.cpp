#include "causal_pomdp/latent_model.hpp"

#include <cmath>

#include "causal_pomdp/dataset_io.hpp"

namespace causal_pomdp {

using nlohmann::json;

void validate_model(const AugmentedModel& m, double tol) {
  if (m.n_latent < 1) throw ValidationError("latent size must be at least 1");
  if (m.n_obs < 1 || m.n_actions < 1) throw ValidationError("alphabet sizes must be positive");
  const auto Z = static_cast<std::size_t>(m.n_latent);
  if (m.latent_prior.size() != Z) throw ValidationError("latent_prior: wrong size");
  if (m.emission.rows() != Z || m.emission.cols() != static_cast<std::size_t>(m.n_obs))
    throw ValidationError("emission: wrong shape");
  if (m.latent_trans.rows() != Z * m.n_actions || m.latent_trans.cols() != Z)
    throw ValidationError("latent_trans: wrong shape");
  if (m.obs_policy.rows() != Z || m.obs_policy.cols() != static_cast<std::size_t>(m.n_actions))
    throw ValidationError("obs_policy: wrong shape");
  if (!(m.regime_prior >= 0.0 && m.regime_prior <= 1.0))
    throw ValidationError("regime_prior outside [0,1]");
  check_distribution(m.latent_prior, "latent_prior", tol);
  check_rows(m.emission, "emission", tol);
  check_rows(m.latent_trans, "latent_trans", tol);
  check_rows(m.obs_policy, "obs_policy", tol);
}

namespace {

void noisy_rows(Table& t, Rng& rng, double noise) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    for (double& v : row) v = 1.0 + noise * rng.uniform();
    normalize(row);
  }
}

void floor_row(std::span<double> row, double eps) {
  for (double& v : row) v = std::max(v, eps);
  normalize(row);
}

} // namespace

AugmentedModel random_model(int n_latent, int n_obs, int n_actions, Rng& rng, double noise) {
  if (n_latent < 1) throw ValidationError("latent size must be at least 1");
  AugmentedModel m;
  m.n_latent = n_latent;
  m.n_obs = n_obs;
  m.n_actions = n_actions;
  Table prior(1, n_latent);
  noisy_rows(prior, rng, noise);
  m.latent_prior.assign(prior.data().begin(), prior.data().end());
  m.emission = Table(n_latent, n_obs);
  m.latent_trans = Table(std::size_t(n_latent) * n_actions, n_latent);
  m.obs_policy = Table(n_latent, n_actions);
  noisy_rows(m.emission, rng, noise);
  noisy_rows(m.latent_trans, rng, noise);
  noisy_rows(m.obs_policy, rng, noise);
  return m;
}

AugmentedModel embed_pomdp(const TabularPOMDP& p, int n_latent, const Policy* privileged) {
  if (n_latent < p.n_states) throw ValidationError("embedding needs n_latent >= n_states");
  if (privileged && privileged->kind != PolicyKind::privileged)
    throw ValidationError("embed_pomdp: observational policy must be privileged");
  AugmentedModel m;
  m.n_latent = n_latent;
  m.n_obs = p.n_obs;
  m.n_actions = p.n_actions;
  m.latent_prior.assign(n_latent, 0.0);
  m.emission = Table(n_latent, p.n_obs, 1.0 / p.n_obs);
  m.latent_trans = Table(std::size_t(n_latent) * p.n_actions, n_latent, 0.0);
  m.obs_policy = Table(n_latent, p.n_actions, 1.0 / p.n_actions);
  for (int z = 0; z < n_latent; ++z) {
    const bool real = z < p.n_states;
    if (real) {
      m.latent_prior[z] = p.init[z];
      for (int o = 0; o < p.n_obs; ++o) m.emission(z, o) = p.obs(z, o);
      if (privileged)
        for (int a = 0; a < p.n_actions; ++a) m.obs_policy(z, a) = privileged->probs(z, a);
    }
    for (int a = 0; a < p.n_actions; ++a) {
      auto row = m.latent_trans.row(std::size_t(z) * p.n_actions + a);
      if (real) {
        auto src = p.trans_row(z, a);
        std::copy(src.begin(), src.end(), row.begin());
      } else {
        row[z] = 1.0;
      }
    }
  }
  return m;
}

void apply_floor(AugmentedModel& m, double eps) {
  floor_row(m.latent_prior, eps);
  for (Table* t : {&m.emission, &m.latent_trans, &m.obs_policy})
    for (std::size_t r = 0; r < t->rows(); ++r) floor_row(t->row(r), eps);
}

namespace {

void check_symbols(const AugmentedModel& m, const Episode& ep) {
  if (ep.observations.size() != ep.actions.size() + 1)
    throw ValidationError("episode needs exactly one more observation than actions");
  for (int o : ep.observations)
    if (o < 0 || o >= m.n_obs) throw ValidationError("observation symbol out of range");
  for (int a : ep.actions)
    if (a < 0 || a >= m.n_actions) throw ValidationError("action symbol out of range");
}

// Shared forward pass. `alpha` receives scaled filtered messages, `scale`
// the per-step normalizers. Returns the failing step, if any.
std::optional<std::size_t> forward_pass(const AugmentedModel& m, const Episode& ep,
                                        std::vector<Distribution>& alpha, std::vector<double>& scale) {
  const int Z = m.n_latent;
  const std::size_t T = ep.actions.size();
  alpha.assign(T + 1, Distribution(Z, 0.0));
  scale.assign(T + 1, 0.0);
  double c = 0.0;
  for (int z = 0; z < Z; ++z) {
    alpha[0][z] = m.latent_prior[z] * m.emission(z, ep.observations[0]);
    c += alpha[0][z];
  }
  if (!(c > 0.0)) return 0;
  for (double& v : alpha[0]) v /= c;
  scale[0] = c;
  for (std::size_t t = 0; t < T; ++t) {
    const int a = ep.actions[t];
    const int o = ep.observations[t + 1];
    Distribution& next = alpha[t + 1];
    for (int z = 0; z < Z; ++z) {
      double w = alpha[t][z];
      if (ep.regime == 0) w *= m.obs_policy(z, a);
      if (w == 0.0) continue;
      auto row = m.trans_row(z, a);
      for (int z2 = 0; z2 < Z; ++z2) next[z2] += w * row[z2];
    }
    c = 0.0;
    for (int z2 = 0; z2 < Z; ++z2) {
      next[z2] *= m.emission(z2, o);
      c += next[z2];
    }
    if (!(c > 0.0)) return t + 1;
    for (double& v : next) v /= c;
    scale[t + 1] = c;
  }
  return std::nullopt;
}

} // namespace

ForwardResult forward_log_likelihood(const AugmentedModel& m, const Episode& ep) {
  check_symbols(m, ep);
  ForwardResult r;
  std::vector<double> scale;
  r.failed_step = forward_pass(m, ep, r.beliefs, scale);
  if (r.failed_step) {
    r.log_prob = -std::numeric_limits<double>::infinity();
    r.beliefs.resize(*r.failed_step);
    return r;
  }
  for (double c : scale) r.log_prob += std::log(c);
  return r;
}

double dataset_objective(const AugmentedModel& m, const RegimeDataset& data) {
  double total = 0.0;
  for (const Episode& ep : data) {
    if (ep.weight == 0.0) continue;
    const double lp = forward_log_likelihood(m, ep).log_prob;
    if (lp == -std::numeric_limits<double>::infinity()) return lp;
    total += ep.weight * lp;
  }
  return total;
}

ExpectedCounts expected_counts(const AugmentedModel& m, const RegimeDataset& data) {
  const int Z = m.n_latent, A = m.n_actions, O = m.n_obs;
  ExpectedCounts n;
  n.prior.assign(Z, 0.0);
  n.emission = Table(Z, O, 0.0);
  n.trans = Table(std::size_t(Z) * A, Z, 0.0);
  n.policy = Table(Z, A, 0.0);

  std::vector<Distribution> alpha;
  std::vector<double> scale;
  Distribution beta, prev_beta(Z), msg(Z);
  for (const Episode& ep : data) {
    const double w = ep.weight;
    if (w == 0.0) continue;
    check_symbols(m, ep);
    n.total_weight += w;
    if (forward_pass(m, ep, alpha, scale)) {
      n.log_likelihood = -std::numeric_limits<double>::infinity();
      continue;
    }
    for (double c : scale) n.log_likelihood += w * std::log(c);
    const std::size_t T = ep.actions.size();
    beta.assign(Z, 1.0);
    // gamma_T
    for (int z = 0; z < Z; ++z) n.emission(z, ep.observations[T]) += w * alpha[T][z];
    for (std::size_t t = T; t-- > 0;) {
      const int a = ep.actions[t];
      const int o = ep.observations[t + 1];
      const double inv_c = 1.0 / scale[t + 1];
      // msg(z') = E(z', o_{t+1}) beta_{t+1}(z') / c_{t+1}
      for (int z2 = 0; z2 < Z; ++z2) msg[z2] = m.emission(z2, o) * beta[z2] * inv_c;
      for (int z = 0; z < Z; ++z) {
        const double pol = ep.regime == 0 ? m.obs_policy(z, a) : 1.0;
        auto row = m.trans_row(z, a);
        auto counts = n.trans.row(std::size_t(z) * A + a);
        const double lead = alpha[t][z] * pol * w;
        double acc = 0.0;
        for (int z2 = 0; z2 < Z; ++z2) {
          const double tm = row[z2] * msg[z2];
          acc += tm;
          counts[z2] += lead * tm;
        }
        prev_beta[z] = pol * acc;
      }
      beta.swap(prev_beta);
      for (int z = 0; z < Z; ++z) {
        const double g = w * alpha[t][z] * beta[z];
        n.emission(z, ep.observations[t]) += g;
        if (ep.regime == 0) n.policy(z, a) += g;
        if (t == 0) n.prior[z] += g;
      }
    }
    if (T == 0)
      for (int z = 0; z < Z; ++z) n.prior[z] += w * alpha[0][z];
  }
  return n;
}

namespace {

void m_step_row(std::span<const double> counts, std::span<double> row) {
  double total = 0.0;
  for (double c : counts) total += c;
  if (!(total > 0.0)) return; // no evidence: keep the previous row
  for (std::size_t i = 0; i < row.size(); ++i) row[i] = counts[i] / total;
  floor_row(row, kProbabilityFloor);
}

} // namespace

AugmentedModel em_step(const AugmentedModel& model, const RegimeDataset& data) {
  if (data.empty()) throw ValidationError("em_step: empty dataset");
  const ExpectedCounts n = expected_counts(model, data);
  AugmentedModel next = model;
  m_step_row(n.prior, next.latent_prior);
  for (std::size_t r = 0; r < next.emission.rows(); ++r) m_step_row(n.emission.row(r), next.emission.row(r));
  for (std::size_t r = 0; r < next.latent_trans.rows(); ++r)
    m_step_row(n.trans.row(r), next.latent_trans.row(r));
  for (std::size_t r = 0; r < next.obs_policy.rows(); ++r)
    m_step_row(n.policy.row(r), next.obs_policy.row(r));
  return next;
}

// ---- softmax parameterization ---------------------------------------------

std::size_t ModelScores::size() const {
  return prior.data().size() + emission.data().size() + trans.data().size() + policy.data().size();
}

double& ModelScores::at(std::size_t i) {
  for (Table* t : {&prior, &emission, &trans, &policy}) {
    if (i < t->data().size()) return t->data()[i];
    i -= t->data().size();
  }
  throw std::out_of_range("ModelScores::at");
}

double ModelScores::at(std::size_t i) const { return const_cast<ModelScores*>(this)->at(i); }

namespace {

void log_rows(const Table& src, Table& dst) {
  dst = Table(src.rows(), src.cols());
  for (std::size_t i = 0; i < src.data().size(); ++i)
    dst.data()[i] = std::log(std::max(src.data()[i], 1e-300));
}

void softmax_rows(const Table& src, Table& dst) {
  dst = Table(src.rows(), src.cols());
  for (std::size_t r = 0; r < src.rows(); ++r) {
    auto in = src.row(r);
    auto out = dst.row(r);
    double mx = in[0];
    for (double v : in) mx = std::max(mx, v);
    double sum = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      out[c] = std::exp(in[c] - mx);
      sum += out[c];
    }
    for (double& v : out) v /= sum;
  }
}

void accumulate_row_gradient(const Table& counts, const Table& probs, Table& grad) {
  grad = Table(counts.rows(), counts.cols());
  for (std::size_t r = 0; r < counts.rows(); ++r) {
    double total = 0.0;
    for (double c : counts.row(r)) total += c;
    for (std::size_t c = 0; c < counts.cols(); ++c) grad(r, c) = -(counts(r, c) - total * probs(r, c));
  }
}

} // namespace

ModelScores scores_from_model(const AugmentedModel& m) {
  ModelScores s;
  s.n_latent = m.n_latent;
  s.n_obs = m.n_obs;
  s.n_actions = m.n_actions;
  Table prior(1, m.n_latent);
  std::copy(m.latent_prior.begin(), m.latent_prior.end(), prior.data().begin());
  log_rows(prior, s.prior);
  log_rows(m.emission, s.emission);
  log_rows(m.latent_trans, s.trans);
  log_rows(m.obs_policy, s.policy);
  return s;
}

AugmentedModel model_from_scores(const ModelScores& s) {
  AugmentedModel m;
  m.n_latent = s.n_latent;
  m.n_obs = s.n_obs;
  m.n_actions = s.n_actions;
  Table prior;
  softmax_rows(s.prior, prior);
  m.latent_prior = prior.data();
  softmax_rows(s.emission, m.emission);
  softmax_rows(s.trans, m.latent_trans);
  softmax_rows(s.policy, m.obs_policy);
  return m;
}

ModelScores zero_scores_like(const ModelScores& s) {
  ModelScores z = s;
  for (Table* t : {&z.prior, &z.emission, &z.trans, &z.policy}) std::fill(t->data().begin(), t->data().end(), 0.0);
  return z;
}

ModelScores negative_objective_gradient(const ModelScores& scores, const RegimeDataset& data,
                                        double* objective) {
  const AugmentedModel m = model_from_scores(scores);
  const ExpectedCounts n = expected_counts(m, data);
  if (objective) *objective = n.log_likelihood;
  ModelScores g = scores;
  Table prior_counts(1, m.n_latent), prior_probs(1, m.n_latent);
  std::copy(n.prior.begin(), n.prior.end(), prior_counts.data().begin());
  std::copy(m.latent_prior.begin(), m.latent_prior.end(), prior_probs.data().begin());
  accumulate_row_gradient(prior_counts, prior_probs, g.prior);
  accumulate_row_gradient(n.emission, m.emission, g.emission);
  accumulate_row_gradient(n.trans, m.latent_trans, g.trans);
  accumulate_row_gradient(n.policy, m.obs_policy, g.policy);
  return g;
}

FitMethod parse_fit_method(const std::string& s) {
  if (s == "em") return FitMethod::em;
  if (s == "grad" || s == "gradient") return FitMethod::gradient;
  throw ValidationError("unknown fit method \"" + s + "\" (expected em or grad)");
}

std::string to_string(FitMethod m) { return m == FitMethod::em ? "em" : "grad"; }

void FitConfig::validate() const {
  if (latent_size < 1) throw ValidationError("latent size must be at least 1");
  if (n_restarts < 1 || max_epochs < 1 || steps_per_epoch < 1 || batch_size < 1)
    throw ValidationError("fit counts must be positive");
  if (plateau_patience < 1 || stop_patience < 1) throw ValidationError("patience must be positive");
  if (method == FitMethod::gradient && !(learning_rate > 0.0))
    throw ValidationError("learning rate must be positive");
}

json model_to_json(const AugmentedModel& m) {
  return {{"n_latent", m.n_latent},
          {"n_obs", m.n_obs},
          {"n_actions", m.n_actions},
          {"latent_prior", m.latent_prior},
          {"emission", table_to_json(m.emission)},
          {"latent_trans", table_to_json(m.latent_trans)},
          {"obs_policy", table_to_json(m.obs_policy)},
          {"regime_prior", m.regime_prior}};
}

AugmentedModel model_from_json(const json& j) {
  AugmentedModel m;
  try {
    m.n_latent = j.at("n_latent").get<int>();
    m.n_obs = j.at("n_obs").get<int>();
    m.n_actions = j.at("n_actions").get<int>();
    m.latent_prior = j.at("latent_prior").get<std::vector<double>>();
    m.emission = table_from_json(j.at("emission"));
    m.latent_trans = table_from_json(j.at("latent_trans"));
    m.obs_policy = table_from_json(j.at("obs_policy"));
    m.regime_prior = j.value("regime_prior", 0.5);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model document: ") + e.what());
  }
  validate_model(m);
  return m;
}

} // namespace causal_pomdp
