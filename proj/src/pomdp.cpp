#include "causal_pomdp/pomdp.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace causal_pomdp {

Table Table::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Table t(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != t.cols()) throw ValidationError("ragged table rows");
    for (std::size_t c = 0; c < t.cols(); ++c) t(r, c) = rows[r][c];
  }
  return t;
}

std::vector<std::vector<double>> Table::to_rows() const {
  std::vector<std::vector<double>> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r].assign(row(r).begin(), row(r).end());
  return out;
}

void check_distribution(std::span<const double> row, const std::string& what, double tol) {
  double sum = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (!(row[i] >= 0.0 && row[i] <= 1.0)) {
      std::ostringstream os;
      os << what << ": entry " << i << " = " << row[i] << " outside [0,1]";
      throw ValidationError(os.str());
    }
    sum += row[i];
  }
  if (std::abs(sum - 1.0) > tol) {
    std::ostringstream os;
    os.precision(17);
    os << what << ": row sums to " << sum << ", not 1";
    throw ValidationError(os.str());
  }
}

void check_rows(const Table& table, const std::string& what, double tol) {
  for (std::size_t r = 0; r < table.rows(); ++r)
    check_distribution(table.row(r), what + " row " + std::to_string(r), tol);
}

void normalize(std::span<double> row) {
  double sum = 0.0;
  for (double v : row) sum += v;
  if (!(sum > 0.0)) throw ValidationError("cannot normalize a zero row");
  for (double& v : row) v /= sum;
}

namespace {

void require_shape(const Table& t, std::size_t rows, std::size_t cols, const std::string& what) {
  if (t.rows() != rows || t.cols() != cols) {
    std::ostringstream os;
    os << what << ": expected " << rows << "x" << cols << " table, got " << t.rows() << "x"
       << t.cols();
    throw ValidationError(os.str());
  }
}

} // namespace

const TabularPOMDP& validate_pomdp(const TabularPOMDP& p) {
  if (p.n_states < 1 || p.n_obs < 1 || p.n_actions < 1)
    throw ValidationError("alphabet sizes must be positive");
  if (p.horizon < 1) throw ValidationError("horizon must be at least 1");
  if (p.init.size() != static_cast<std::size_t>(p.n_states))
    throw ValidationError("init: expected " + std::to_string(p.n_states) + " entries");
  require_shape(p.trans, std::size_t(p.n_states) * p.n_actions, p.n_states, "trans");
  require_shape(p.obs, p.n_states, p.n_obs, "obs");
  if (p.reward.size() != static_cast<std::size_t>(p.n_obs))
    throw ValidationError("reward: expected one value per observation");
  for (double r : p.reward)
    if (!std::isfinite(r)) throw ValidationError("reward: non-finite value");
  check_distribution(p.init, "init");
  check_rows(p.trans, "trans");
  check_rows(p.obs, "obs");
  return p;
}

Policy Policy::uniform(int n_actions) {
  return {PolicyKind::standard, Table(1, n_actions, 1.0 / n_actions)};
}

Policy Policy::constant(int n_actions, int action) {
  Policy p{PolicyKind::standard, Table(1, n_actions, 0.0)};
  p.probs(0, action) = 1.0;
  return p;
}

bool Policy::exploratory() const {
  for (double v : probs.data())
    if (!(v > 0.0)) return false;
  return true;
}

std::span<const double> Policy::row(int last_obs, int state) const {
  if (kind == PolicyKind::privileged) return probs.row(state);
  if (probs.rows() == 1) return probs.row(0);
  return probs.row(last_obs);
}

void validate_policy(const Policy& policy, const TabularPOMDP& pomdp) {
  if (policy.probs.cols() != static_cast<std::size_t>(pomdp.n_actions))
    throw ValidationError("policy: one column per action required");
  const std::size_t rows = policy.probs.rows();
  if (policy.kind == PolicyKind::privileged) {
    if (rows != static_cast<std::size_t>(pomdp.n_states))
      throw ValidationError("privileged policy: one row per state required");
  } else if (rows != 1 && rows != static_cast<std::size_t>(pomdp.n_obs)) {
    throw ValidationError("standard policy: one row, or one row per observation");
  }
  check_rows(policy.probs, "policy");
}

HiddenChain chain_of(const TabularPOMDP& p) {
  return {p.n_states, p.n_actions, p.n_obs, p.init, &p.trans, &p.obs};
}

BeliefFilter::BeliefFilter(const HiddenChain& chain) : chain_(chain), belief_(chain.prior.begin(), chain.prior.end()) {}

Distribution BeliefFilter::initial_observation() const {
  Distribution out(chain_.n_obs, 0.0);
  for (int h = 0; h < chain_.n_hidden; ++h) {
    const double w = chain_.prior[h];
    if (w == 0.0) continue;
    auto e = chain_.emission->row(h);
    for (int o = 0; o < chain_.n_obs; ++o) out[o] += w * e[o];
  }
  return out;
}

void BeliefFilter::observe_first(int observation) {
  if (observation < 0 || observation >= chain_.n_obs)
    throw ValidationError("observation symbol out of range");
  double total = 0.0;
  for (int h = 0; h < chain_.n_hidden; ++h) {
    belief_[h] = chain_.prior[h] * (*chain_.emission)(h, observation);
    total += belief_[h];
  }
  if (!(total > 0.0)) throw ImpossibleHistory("first observation has zero probability", 0);
  for (double& b : belief_) b /= total;
  started_ = true;
  step_ = 0;
}

Distribution BeliefFilter::predict(int action) const {
  if (!started_) throw std::logic_error("BeliefFilter::predict before observe_first");
  if (action < 0 || action >= chain_.n_actions) throw ValidationError("action out of range");
  const int n = chain_.n_hidden;
  Distribution next(n, 0.0);
  for (int h = 0; h < n; ++h) {
    const double w = belief_[h];
    if (w == 0.0) continue;
    auto row = chain_.transition->row(static_cast<std::size_t>(h) * chain_.n_actions + action);
    for (int h2 = 0; h2 < n; ++h2) next[h2] += w * row[h2];
  }
  Distribution out(chain_.n_obs, 0.0);
  for (int h2 = 0; h2 < n; ++h2) {
    if (next[h2] == 0.0) continue;
    auto e = chain_.emission->row(h2);
    for (int o = 0; o < chain_.n_obs; ++o) out[o] += next[h2] * e[o];
  }
  return out;
}

void BeliefFilter::advance(int action, int observation) {
  if (!started_) throw std::logic_error("BeliefFilter::advance before observe_first");
  if (action < 0 || action >= chain_.n_actions) throw ValidationError("action out of range");
  if (observation < 0 || observation >= chain_.n_obs)
    throw ValidationError("observation symbol out of range");
  const int n = chain_.n_hidden;
  Distribution next(n, 0.0);
  for (int h = 0; h < n; ++h) {
    const double w = belief_[h];
    if (w == 0.0) continue;
    auto row = chain_.transition->row(static_cast<std::size_t>(h) * chain_.n_actions + action);
    for (int h2 = 0; h2 < n; ++h2) next[h2] += w * row[h2];
  }
  double total = 0.0;
  for (int h2 = 0; h2 < n; ++h2) {
    next[h2] *= (*chain_.emission)(h2, observation);
    total += next[h2];
  }
  if (!(total > 0.0))
    throw ImpossibleHistory("observation has zero probability given the history", step_ + 1);
  for (double& b : next) b /= total;
  belief_ = std::move(next);
  ++step_;
}

BeliefFilter filter_history(const HiddenChain& chain, const History& history) {
  if (!history.consistent() || history.observations.empty())
    throw ValidationError("history must alternate o, a, ..., o and be nonempty");
  BeliefFilter f(chain);
  f.observe_first(history.observations[0]);
  for (std::size_t t = 0; t < history.actions.size(); ++t)
    f.advance(history.actions[t], history.observations[t + 1]);
  return f;
}

Episode sample_episode(const TabularPOMDP& pomdp, const Policy& policy, int regime, Rng& rng) {
  if (regime != 0 && regime != 1) throw ValidationError("regime must be 0 or 1");
  if (regime == 1 && policy.kind == PolicyKind::privileged)
    throw ValidationError("privileged policy cannot generate interventional-regime data");
  Episode ep;
  ep.regime = regime;
  ep.observations.reserve(pomdp.horizon + 1);
  ep.actions.reserve(pomdp.horizon);
  int s = rng.categorical(pomdp.init);
  int o = rng.categorical(pomdp.obs.row(s));
  ep.observations.push_back(o);
  for (int t = 0; t < pomdp.horizon; ++t) {
    const int a = rng.categorical(policy.row(o, s));
    s = rng.categorical(pomdp.trans_row(s, a));
    o = rng.categorical(pomdp.obs.row(s));
    ep.actions.push_back(a);
    ep.observations.push_back(o);
  }
  return ep;
}

RegimeDataset sample_dataset(const TabularPOMDP& pomdp, const Policy& policy, int regime,
                             std::size_t count, std::uint64_t seed, std::uint64_t first_index) {
  RegimeDataset out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, {first_index + i}));
    out.push_back(sample_episode(pomdp, policy, regime, rng));
  }
  return out;
}

Distribution true_transition(const TabularPOMDP& pomdp, const History& history, int action) {
  return filter_history(chain_of(pomdp), history).predict(action);
}

double trajectory_probability(const TabularPOMDP& pomdp, const Policy& policy,
                              const Episode& ep) {
  const int n = pomdp.n_states;
  // alpha(s) = p(s_t = s, h_t, a_{0..t-1})
  Distribution alpha(n);
  for (int s = 0; s < n; ++s) alpha[s] = pomdp.init[s] * pomdp.obs(s, ep.observations[0]);
  for (std::size_t t = 0; t < ep.actions.size(); ++t) {
    const int a = ep.actions[t];
    const int o_prev = ep.observations[t];
    const int o_next = ep.observations[t + 1];
    Distribution next(n, 0.0);
    for (int s = 0; s < n; ++s) {
      const double w = alpha[s] * policy.row(o_prev, s)[a];
      if (w == 0.0) continue;
      auto row = pomdp.trans_row(s, a);
      for (int s2 = 0; s2 < n; ++s2) next[s2] += w * row[s2];
    }
    for (int s2 = 0; s2 < n; ++s2) next[s2] *= pomdp.obs(s2, o_next);
    alpha = std::move(next);
  }
  double total = 0.0;
  for (double v : alpha) total += v;
  return total;
}

RegimeDataset enumerate_episodes(const TabularPOMDP& pomdp, const Policy& policy, int regime,
                                 double total_weight, std::size_t max_episodes) {
  validate_policy(policy, pomdp);
  if (regime == 1 && policy.kind == PolicyKind::privileged)
    throw ValidationError("privileged policy cannot generate interventional-regime data");
  const int n = pomdp.n_states;
  RegimeDataset out;
  Episode ep;
  ep.regime = regime;

  std::function<void(const Distribution&)> recurse = [&](const Distribution& alpha) {
    double mass = 0.0;
    for (double v : alpha) mass += v;
    if (mass <= 0.0) return;
    if (static_cast<int>(ep.actions.size()) == pomdp.horizon) {
      if (out.size() >= max_episodes) throw std::length_error("enumerate_episodes: too many episodes");
      ep.weight = mass * total_weight;
      out.push_back(ep);
      return;
    }
    const int o_prev = ep.observations.back();
    for (int a = 0; a < pomdp.n_actions; ++a) {
      Distribution moved(n, 0.0);
      for (int s = 0; s < n; ++s) {
        const double w = alpha[s] * policy.row(o_prev, s)[a];
        if (w == 0.0) continue;
        auto row = pomdp.trans_row(s, a);
        for (int s2 = 0; s2 < n; ++s2) moved[s2] += w * row[s2];
      }
      for (int o = 0; o < pomdp.n_obs; ++o) {
        Distribution next(n);
        for (int s2 = 0; s2 < n; ++s2) next[s2] = moved[s2] * pomdp.obs(s2, o);
        ep.actions.push_back(a);
        ep.observations.push_back(o);
        recurse(next);
        ep.actions.pop_back();
        ep.observations.pop_back();
      }
    }
  };

  for (int o = 0; o < pomdp.n_obs; ++o) {
    Distribution alpha(n);
    for (int s = 0; s < n; ++s) alpha[s] = pomdp.init[s] * pomdp.obs(s, o);
    ep.observations = {o};
    ep.actions.clear();
    recurse(alpha);
  }
  return out;
}

} // namespace causal_pomdp
