#include "causal_pomdp/inference.hpp"

#include <functional>
#include <ostream>
#include <sstream>

namespace causal_pomdp {

BeliefVector filter_belief(const AugmentedModel& model, const History& history) {
  // q(z_0|h_0) ~ q(z_0) q(o_0|z_0); then
  // q(z_{t+1}|h_{t+1}) ~ sum_z q(z|h_t) q(z_{t+1}|z,a_t) q(o_{t+1}|z_{t+1})
  BeliefFilter f = filter_history(model.chain(), history);
  return {f.belief(), f.step()};
}

Distribution recovered_transition(const AugmentedModel& model, const History& history, int action) {
  return filter_history(model.chain(), history).predict(action);
}

Table deconfound_bandit(std::span<const double> prior, const Table& conditional, int n_actions) {
  check_distribution(prior, "confounder prior", 1e-9);
  check_rows(conditional, "conditional", 1e-9);
  if (conditional.rows() != prior.size() * n_actions)
    throw ValidationError("conditional needs one row per (confounder, action)");
  Table out(n_actions, conditional.cols(), 0.0);
  for (std::size_t c = 0; c < prior.size(); ++c)
    for (int a = 0; a < n_actions; ++a) {
      auto row = conditional.row(c * n_actions + a);
      for (std::size_t y = 0; y < row.size(); ++y) out(a, y) += prior[c] * row[y];
    }
  return out;
}

BoundEnvelope theorem1_bounds(std::span<const double> policy, std::span<const double> transition) {
  if (policy.size() != transition.size() || policy.empty())
    throw ValidationError("theorem1_bounds: need two nonempty sequences of equal length");
  double policy_product = 1.0, joint = 1.0;
  for (std::size_t t = 0; t < policy.size(); ++t) {
    if (!(policy[t] >= 0.0 && policy[t] <= 1.0 && transition[t] >= 0.0 && transition[t] <= 1.0))
      throw ValidationError("theorem1_bounds: probabilities must lie in [0,1]");
    policy_product *= policy[t];
    joint *= policy[t] * transition[t];
  }
  BoundEnvelope env;
  if (!(policy_product > 0.0)) return env; // no observational support: [0, 1]
  env.supported = true;
  env.lower = joint;
  env.upper = std::min(1.0, joint + 1.0 - policy_product);
  return env;
}

namespace {

// Generic walk: alpha is the joint p(hidden, h_t | i=0) over a hidden chain
// with an observational policy given by `pol(hidden, action)`.
template <class Policy>
ObservationalSteps walk(const HiddenChain& chain, Policy pol, const Episode& tr) {
  ObservationalSteps out;
  const int n = chain.n_hidden;
  Distribution alpha(n);
  double mass = 0.0;
  for (int h = 0; h < n; ++h) mass += alpha[h] = chain.prior[h] * (*chain.emission)(h, tr.observations[0]);
  if (!(mass > 0.0)) {
    out.supported = false;
    return out;
  }
  for (std::size_t t = 0; t < tr.actions.size(); ++t) {
    const int a = tr.actions[t];
    const int o = tr.observations[t + 1];
    double acted = 0.0;
    Distribution next(n, 0.0);
    for (int h = 0; h < n; ++h) {
      const double w = alpha[h] * pol(h, a);
      if (w == 0.0) continue;
      acted += w;
      auto row = chain.transition->row(std::size_t(h) * chain.n_actions + a);
      for (int h2 = 0; h2 < n; ++h2) next[h2] += w * row[h2];
    }
    double emitted = 0.0;
    for (int h2 = 0; h2 < n; ++h2) emitted += next[h2] *= (*chain.emission)(h2, o);
    if (!(acted > 0.0)) {
      out.supported = false;
      return out;
    }
    out.policy.push_back(acted / mass);
    out.transition.push_back(emitted / acted);
    if (!(emitted > 0.0) && t + 1 < tr.actions.size()) {
      out.supported = false;
      return out;
    }
    alpha = std::move(next);
    mass = emitted;
  }
  return out;
}

} // namespace

ObservationalSteps exact_observational_steps(const TabularPOMDP& pomdp, const Policy& privileged,
                                             const Episode& tr) {
  return walk(chain_of(pomdp), [&](int s, int a) { return privileged.row(0, s)[a]; }, tr);
}

ObservationalSteps model_observational_steps(const AugmentedModel& model, const Episode& tr) {
  return walk(model.chain(), [&](int z, int a) { return model.obs_policy(z, a); }, tr);
}

ObservationalCounts::ObservationalCounts(const RegimeDataset& data) {
  for (const Episode& ep : data) {
    if (ep.regime != 0) continue;
    std::vector<int> prefix{ep.observations[0]};
    prefix_weight_[prefix] += ep.weight;
    for (std::size_t t = 0; t < ep.actions.size(); ++t) {
      prefix.push_back(ep.actions[t]);
      prefix_weight_[prefix] += ep.weight;
      prefix.push_back(ep.observations[t + 1]);
      prefix_weight_[prefix] += ep.weight;
    }
  }
}

double ObservationalCounts::count(const std::vector<int>& prefix) const {
  auto it = prefix_weight_.find(prefix);
  return it == prefix_weight_.end() ? 0.0 : it->second;
}

ObservationalSteps ObservationalCounts::steps(const Episode& tr) const {
  ObservationalSteps out;
  std::vector<int> prefix{tr.observations[0]};
  double n_h = count(prefix);
  for (std::size_t t = 0; t < tr.actions.size(); ++t) {
    if (!(n_h > 0.0)) {
      out.supported = false;
      return out;
    }
    prefix.push_back(tr.actions[t]);
    const double n_ha = count(prefix);
    prefix.push_back(tr.observations[t + 1]);
    const double n_hao = count(prefix);
    out.policy.push_back(n_ha / n_h);
    out.transition.push_back(n_ha > 0.0 ? n_hao / n_ha : 0.0);
    if (!(n_ha > 0.0)) {
      out.supported = false;
      return out;
    }
    n_h = n_hao;
  }
  return out;
}

double recovered_product(const AugmentedModel& model, const Episode& tr) {
  BeliefFilter f(model.chain());
  double product = 1.0;
  try {
    f.observe_first(tr.observations[0]);
    for (std::size_t t = 0; t < tr.actions.size(); ++t) {
      product *= f.predict(tr.actions[t])[tr.observations[t + 1]];
      if (product == 0.0) return 0.0;
      f.advance(tr.actions[t], tr.observations[t + 1]);
    }
  } catch (const ImpossibleHistory&) {
    return 0.0;
  }
  return product;
}

std::string cell_key(const Episode& tr) {
  std::ostringstream os;
  os << 'o' << tr.observations[0];
  for (std::size_t t = 0; t < tr.actions.size(); ++t)
    os << " a" << tr.actions[t] << " o" << tr.observations[t + 1];
  return os.str();
}

std::vector<BoundRow> bound_table(const AugmentedModel& model,
                                  const std::function<ObservationalSteps(const Episode&)>& reference,
                                  int steps) {
  if (steps < 1) throw ValidationError("bound_table: at least one step required");
  std::vector<BoundRow> rows;
  Episode tr;
  tr.regime = 1;
  std::function<void()> recurse = [&] {
    if (static_cast<int>(tr.actions.size()) == steps) {
      const ObservationalSteps s = reference(tr);
      if (!s.supported || s.policy.size() != tr.actions.size()) return;
      BoundRow row;
      row.envelope = theorem1_bounds(s.policy, s.transition);
      if (!row.envelope.supported) return;
      row.envelope.cell = cell_key(tr);
      row.estimate = recovered_product(model, tr);
      rows.push_back(std::move(row));
      return;
    }
    for (int a = 0; a < model.n_actions; ++a)
      for (int o = 0; o < model.n_obs; ++o) {
        tr.actions.push_back(a);
        tr.observations.push_back(o);
        recurse();
        tr.actions.pop_back();
        tr.observations.pop_back();
      }
  };
  for (int o = 0; o < model.n_obs; ++o) {
    tr.observations = {o};
    tr.actions.clear();
    recurse();
  }
  return rows;
}

void write_bound_report(const std::vector<BoundRow>& rows, std::ostream& out) {
  out << "cell,lower,upper,estimate,supported\n";
  out.precision(10);
  for (const BoundRow& r : rows)
    out << r.envelope.cell << ',' << r.envelope.lower << ',' << r.envelope.upper << ',' << r.estimate
        << ',' << (r.envelope.supported ? 1 : 0) << '\n';
}

} // namespace causal_pomdp
