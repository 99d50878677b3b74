#include "causal_pomdp/evaluation.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include <boost/math/special_functions/beta.hpp>

namespace causal_pomdp {

EvalMode parse_eval_mode(const std::string& s) {
  if (s == "exact") return EvalMode::exact;
  if (s == "mc" || s == "monte_carlo") return EvalMode::monte_carlo;
  throw ValidationError("unknown evaluation mode \"" + s + "\" (expected exact or mc)");
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

namespace {

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(xs.size() - 1);
}

// p log(p / m) with 0 log 0 = 0
double kl_term(double p, double m) { return p > 0.0 ? p * std::log(p / m) : 0.0; }
double log_ratio(double p, double m) { return p > 0.0 ? std::log(p / m) : 0.0; }

// A filter that may "die" when its model gives the walked history zero mass.
// A dead side mirrors the live side's predictions so its terms vanish.
struct Side {
  BeliefFilter filter;
  bool alive = true;

  void first(int o) {
    if (!alive) return;
    try {
      filter.observe_first(o);
    } catch (const ImpossibleHistory&) {
      alive = false;
    }
  }
  void advance(int a, int o) {
    if (!alive) return;
    try {
      filter.advance(a, o);
    } catch (const ImpossibleHistory&) {
      alive = false;
    }
  }
};

void resolve(const Side& p, const Side& q, Distribution& pp, Distribution& qq) {
  if (!p.alive) pp = qq;
  if (!q.alive) qq = pp;
}

} // namespace

double standard_error(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  return std::sqrt(sample_variance(xs) / static_cast<double>(xs.size()));
}

Estimate js_divergence(const HiddenChain& pc, const HiddenChain& qc, int horizon, EvalMode mode,
                       int n_trajectories, std::uint64_t seed, std::size_t max_nodes) {
  if (pc.n_obs != qc.n_obs || pc.n_actions != qc.n_actions)
    throw ValidationError("js_divergence: alphabets differ");
  const int O = pc.n_obs, A = pc.n_actions;
  const double uniform_action = 1.0 / A;

  if (mode == EvalMode::exact) {
    std::size_t nodes = 0;
    double total = 0.0;
    // wp, wq: probabilities of the current prefix under p and q (random policy included)
    std::function<void(const Side&, const Side&, double, double, int)> recurse =
        [&](const Side& p, const Side& q, double wp, double wq, int t) {
          if (t == horizon) return;
          if (++nodes > max_nodes) throw std::length_error("js_divergence: trajectory space too large");
          for (int a = 0; a < A; ++a) {
            Distribution pp = p.alive ? p.filter.predict(a) : Distribution{};
            Distribution qq = q.alive ? q.filter.predict(a) : Distribution{};
            resolve(p, q, pp, qq);
            for (int o = 0; o < O; ++o) {
              const double m = 0.5 * (pp[o] + qq[o]);
              const double np = wp * uniform_action * pp[o];
              const double nq = wq * uniform_action * qq[o];
              total += 0.5 * wp * uniform_action * kl_term(pp[o], m) + 0.5 * wq * uniform_action * kl_term(qq[o], m);
              if (np <= 0.0 && nq <= 0.0) continue;
              Side p2 = p, q2 = q;
              p2.advance(a, o);
              q2.advance(a, o);
              if (np <= 0.0) p2.alive = false;
              if (nq <= 0.0) q2.alive = false;
              recurse(p2, q2, np, nq, t + 1);
            }
          }
        };
    const Side p0{BeliefFilter(pc)}, q0{BeliefFilter(qc)};
    const Distribution P0 = p0.filter.initial_observation(), Q0 = q0.filter.initial_observation();
    for (int o = 0; o < O; ++o) {
      const double m = 0.5 * (P0[o] + Q0[o]);
      total += 0.5 * kl_term(P0[o], m) + 0.5 * kl_term(Q0[o], m);
      if (P0[o] <= 0.0 && Q0[o] <= 0.0) continue;
      Side p = p0, q = q0;
      p.first(o);
      q.first(o);
      if (P0[o] <= 0.0) p.alive = false;
      if (Q0[o] <= 0.0) q.alive = false;
      recurse(p, q, P0[o], Q0[o], 0);
    }
    return {total, 0.0};
  }

  if (n_trajectories < 1) throw ValidationError("js_divergence: need at least one trajectory");
  // one expectation per side; `sampler` is 0 for p, 1 for q
  auto expectation = [&](int sampler, std::vector<double>& values) {
    for (int n = 0; n < n_trajectories; ++n) {
      Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(sampler), static_cast<std::uint64_t>(n)}));
      Side p{BeliefFilter(pc)}, q{BeliefFilter(qc)};
      Distribution pp = p.filter.initial_observation(), qq = q.filter.initial_observation();
      int o = rng.categorical(sampler == 0 ? pp : qq);
      double sum = sampler == 0 ? log_ratio(pp[o], 0.5 * (pp[o] + qq[o])) : log_ratio(qq[o], 0.5 * (pp[o] + qq[o]));
      p.first(o);
      q.first(o);
      for (int t = 0; t < horizon; ++t) {
        const int a = static_cast<int>(rng.below(A));
        pp = p.alive ? p.filter.predict(a) : Distribution{};
        qq = q.alive ? q.filter.predict(a) : Distribution{};
        resolve(p, q, pp, qq);
        o = rng.categorical(sampler == 0 ? pp : qq);
        const double m = 0.5 * (pp[o] + qq[o]);
        sum += sampler == 0 ? log_ratio(pp[o], m) : log_ratio(qq[o], m);
        p.advance(a, o);
        q.advance(a, o);
      }
      values.push_back(sum);
    }
  };
  std::vector<double> vp, vq;
  expectation(0, vp);
  expectation(1, vq);
  const double value = 0.5 * mean(vp) + 0.5 * mean(vq);
  const double se = 0.5 * std::sqrt(sample_variance(vp) / n_trajectories + sample_variance(vq) / n_trajectories);
  return {value, se};
}

Estimate js_divergence(const AugmentedModel& model, const TabularPOMDP& pomdp, EvalMode mode,
                       int n_trajectories, std::uint64_t seed) {
  if (model.n_obs != pomdp.n_obs || model.n_actions != pomdp.n_actions)
    throw ValidationError("js_divergence: model and environment alphabets differ");
  return js_divergence(chain_of(pomdp), model.chain(), pomdp.horizon, mode, n_trajectories, seed);
}

Estimate expected_reward(const Controller& controller, const TabularPOMDP& pomdp, EvalMode mode,
                         int n_trajectories, std::uint64_t seed, std::size_t max_nodes) {
  const int S = pomdp.n_states, O = pomdp.n_obs, A = pomdp.n_actions;
  auto step_reward = [&](const Distribution& state_mass) {
    double r = 0.0;
    for (int s = 0; s < S; ++s) {
      if (state_mass[s] == 0.0) continue;
      for (int o = 0; o < O; ++o) r += state_mass[s] * pomdp.obs(s, o) * pomdp.reward[o];
    }
    return r;
  };

  if (mode == EvalMode::exact && controller.history_independent()) {
    auto c = controller.clone();
    c->reset(0);
    const Distribution pi = c->action_probs();
    Distribution mass = pomdp.init;
    double total = step_reward(mass);
    for (int t = 0; t < pomdp.horizon; ++t) {
      Distribution next(S, 0.0);
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
          const double w = mass[s] * pi[a];
          if (w == 0.0) continue;
          auto row = pomdp.trans_row(s, a);
          for (int s2 = 0; s2 < S; ++s2) next[s2] += w * row[s2];
        }
      mass = std::move(next);
      total += step_reward(mass);
    }
    return {total, 0.0};
  }

  if (mode == EvalMode::exact) {
    std::size_t nodes = 0;
    double total = 0.0;
    // alpha(s) = p(s_t, h_t)
    std::function<void(const Distribution&, const Controller&, int)> recurse =
        [&](const Distribution& alpha, const Controller& ctl, int t) {
          if (t == pomdp.horizon) return;
          if (++nodes > max_nodes) throw std::length_error("expected_reward: history space too large");
          const Distribution pi = ctl.action_probs();
          for (int a = 0; a < A; ++a) {
            if (pi[a] == 0.0) continue;
            Distribution moved(S, 0.0);
            for (int s = 0; s < S; ++s) {
              if (alpha[s] == 0.0) continue;
              auto row = pomdp.trans_row(s, a);
              for (int s2 = 0; s2 < S; ++s2) moved[s2] += alpha[s] * pi[a] * row[s2];
            }
            for (int o = 0; o < O; ++o) {
              Distribution next(S);
              double mass = 0.0;
              for (int s2 = 0; s2 < S; ++s2) mass += next[s2] = moved[s2] * pomdp.obs(s2, o);
              if (mass <= 0.0) continue;
              total += mass * pomdp.reward[o];
              auto child = ctl.clone();
              child->observe(a, o);
              recurse(next, *child, t + 1);
            }
          }
        };
    for (int o = 0; o < O; ++o) {
      Distribution alpha(S);
      double mass = 0.0;
      for (int s = 0; s < S; ++s) mass += alpha[s] = pomdp.init[s] * pomdp.obs(s, o);
      if (mass <= 0.0) continue;
      total += mass * pomdp.reward[o];
      auto c = controller.clone();
      c->reset(o);
      recurse(alpha, *c, 0);
    }
    return {total, 0.0};
  }

  if (n_trajectories < 1) throw ValidationError("expected_reward: need at least one trajectory");
  std::vector<double> returns;
  returns.reserve(n_trajectories);
  for (int n = 0; n < n_trajectories; ++n) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(n)}));
    auto c = controller.clone();
    int s = rng.categorical(pomdp.init);
    int o = rng.categorical(pomdp.obs.row(s));
    double ret = pomdp.reward[o];
    c->reset(o);
    for (int t = 0; t < pomdp.horizon; ++t) {
      const int a = rng.categorical(c->action_probs());
      s = rng.categorical(pomdp.trans_row(s, a));
      o = rng.categorical(pomdp.obs.row(s));
      ret += pomdp.reward[o];
      c->observe(a, o);
    }
    returns.push_back(ret);
  }
  return {mean(returns), standard_error(returns)};
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw DegenerateSample("welch_t_test: each sample needs two points");
  const double va = sample_variance(a), vb = sample_variance(b);
  if (!(va > 0.0) || !(vb > 0.0)) throw DegenerateSample("welch_t_test: zero-variance sample");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sa = va / na, sb = vb / nb;
  WelchResult r;
  r.t = (mean(a) - mean(b)) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  // P(|T| > |t|) = I_{df / (df + t^2)}(df / 2, 1 / 2)
  r.p_value = boost::math::ibeta(r.df / 2.0, 0.5, r.df / (r.df + r.t * r.t));
  return r;
}

} // namespace causal_pomdp
