#include "causal_pomdp/planning.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace causal_pomdp {

using nlohmann::json;

int plan_bandit(const AugmentedModel& model, std::span<const double> reward) {
  if (reward.size() != static_cast<std::size_t>(model.n_obs))
    throw ValidationError("plan_bandit: reward map must cover every observation");
  BeliefFilter root(model.chain());
  const Distribution first = root.initial_observation();
  std::vector<double> value(model.n_actions, 0.0);
  for (int o0 = 0; o0 < model.n_obs; ++o0) {
    if (!(first[o0] > 0.0)) continue;
    BeliefFilter f = root;
    f.observe_first(o0);
    for (int a = 0; a < model.n_actions; ++a) {
      const Distribution next = f.predict(a);
      double v = 0.0;
      for (int o = 0; o < model.n_obs; ++o) v += next[o] * reward[o];
      value[a] += first[o0] * v;
    }
  }
  int best = 0;
  for (int a = 1; a < model.n_actions; ++a)
    if (value[a] > value[best]) best = a;
  return best;
}

// ---- network ----------------------------------------------------------------

namespace {

DenseLayer make_layer(int in, int out, Rng& rng, bool zero) {
  DenseLayer l{in, out, std::vector<double>(std::size_t(in) * out, 0.0), std::vector<double>(out, 0.0)};
  if (!zero) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& w : l.weight) w = rng.uniform(-bound, bound);
    for (double& b : l.bias) b = rng.uniform(-bound, bound);
  }
  return l;
}

void affine(const DenseLayer& l, std::span<const double> x, std::vector<double>& y) {
  y.assign(l.bias.begin(), l.bias.end());
  for (int o = 0; o < l.out; ++o) {
    const double* w = l.weight.data() + std::size_t(o) * l.in;
    double acc = 0.0;
    for (int i = 0; i < l.in; ++i) acc += w[i] * x[i];
    y[o] += acc;
  }
}

struct TowerCache {
  std::vector<double> h1, h2, out;
};

void tower_forward(const std::vector<DenseLayer>& layers, std::size_t first, std::span<const double> x,
                   TowerCache& c) {
  affine(layers[first], x, c.h1);
  for (double& v : c.h1) v = std::tanh(v);
  affine(layers[first + 1], c.h1, c.h2);
  for (double& v : c.h2) v = std::tanh(v);
  affine(layers[first + 2], c.h2, c.out);
}

// Accumulates parameter gradients for one tower given d loss / d out.
void tower_backward(const std::vector<DenseLayer>& layers, std::size_t first, std::span<const double> x,
                    const TowerCache& c, std::span<const double> dout, std::vector<double>& grad,
                    const std::vector<std::size_t>& offsets) {
  auto backprop_layer = [&](std::size_t li, std::span<const double> input, std::span<const double> dz,
                            std::vector<double>* dinput) {
    const DenseLayer& l = layers[li];
    double* gw = grad.data() + offsets[li];
    double* gb = gw + l.weight.size();
    if (dinput) dinput->assign(l.in, 0.0);
    for (int o = 0; o < l.out; ++o) {
      if (dz[o] == 0.0) continue;
      gb[o] += dz[o];
      const double* w = l.weight.data() + std::size_t(o) * l.in;
      double* g = gw + std::size_t(o) * l.in;
      for (int i = 0; i < l.in; ++i) {
        g[i] += dz[o] * input[i];
        if (dinput) (*dinput)[i] += dz[o] * w[i];
      }
    }
  };
  std::vector<double> dh2, dh1;
  backprop_layer(first + 2, c.h2, dout, &dh2);
  for (std::size_t i = 0; i < dh2.size(); ++i) dh2[i] *= 1.0 - c.h2[i] * c.h2[i];
  backprop_layer(first + 1, c.h1, dh2, &dh1);
  for (std::size_t i = 0; i < dh1.size(); ++i) dh1[i] *= 1.0 - c.h1[i] * c.h1[i];
  backprop_layer(first, x, dh1, nullptr);
}

void softmax(std::span<const double> logits, Distribution& out) {
  out.resize(logits.size());
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += out[i] = std::exp(logits[i] - mx);
  for (double& v : out) v /= sum;
}

std::vector<std::size_t> parameter_offsets(const std::vector<DenseLayer>& layers) {
  std::vector<std::size_t> off;
  std::size_t acc = 0;
  for (const DenseLayer& l : layers) {
    off.push_back(acc);
    acc += l.weight.size() + l.bias.size();
  }
  off.push_back(acc);
  return off;
}

json layer_to_json(const DenseLayer& l) {
  return {{"in", l.in}, {"out", l.out}, {"weight", l.weight}, {"bias", l.bias}};
}

DenseLayer layer_from_json(const json& j) {
  DenseLayer l{j.at("in").get<int>(), j.at("out").get<int>(), j.at("weight").get<std::vector<double>>(),
               j.at("bias").get<std::vector<double>>()};
  if (l.weight.size() != std::size_t(l.in) * l.out || l.bias.size() != std::size_t(l.out))
    throw ValidationError("network layer: inconsistent shapes");
  return l;
}

} // namespace

ActorCriticNet::ActorCriticNet(int n_features, int n_actions, int hidden, Rng& rng)
    : n_features_(n_features), n_actions_(n_actions), hidden_(hidden) {
  if (n_features < 1 || n_actions < 1 || hidden < 1) throw ValidationError("network sizes must be positive");
  layers_.push_back(make_layer(n_features, hidden, rng, false));
  layers_.push_back(make_layer(hidden, hidden, rng, false));
  layers_.push_back(make_layer(hidden, n_actions, rng, true));
  layers_.push_back(make_layer(n_features, hidden, rng, false));
  layers_.push_back(make_layer(hidden, hidden, rng, false));
  layers_.push_back(make_layer(hidden, 1, rng, true));
}

Distribution ActorCriticNet::policy(std::span<const double> features) const {
  TowerCache c;
  tower_forward(layers_, 0, features, c);
  Distribution p;
  softmax(c.out, p);
  return p;
}

double ActorCriticNet::value(std::span<const double> features) const {
  TowerCache c;
  tower_forward(layers_, 3, features, c);
  return c.out[0];
}

std::size_t ActorCriticNet::parameter_count() const { return parameter_offsets(layers_).back(); }

double& ActorCriticNet::parameter(std::size_t i) {
  for (DenseLayer& l : layers_) {
    if (i < l.weight.size()) return l.weight[i];
    i -= l.weight.size();
    if (i < l.bias.size()) return l.bias[i];
    i -= l.bias.size();
  }
  throw std::out_of_range("ActorCriticNet::parameter");
}

double ActorCriticNet::parameter(std::size_t i) const { return const_cast<ActorCriticNet*>(this)->parameter(i); }

json ActorCriticNet::to_json() const {
  json layers = json::array();
  for (const DenseLayer& l : layers_) layers.push_back(layer_to_json(l));
  return {{"n_features", n_features_}, {"n_actions", n_actions_}, {"hidden", hidden_}, {"layers", layers}};
}

ActorCriticNet ActorCriticNet::from_json(const json& j) {
  ActorCriticNet net;
  try {
    net.n_features_ = j.at("n_features").get<int>();
    net.n_actions_ = j.at("n_actions").get<int>();
    net.hidden_ = j.at("hidden").get<int>();
    for (const json& l : j.at("layers")) net.layers_.push_back(layer_from_json(l));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("network document: ") + e.what());
  }
  if (net.layers_.size() != 6) throw ValidationError("network document: expected 6 layers");
  return net;
}

// ---- loss -------------------------------------------------------------------

FrozenTargets compute_targets(const ActorCriticNet& net, std::span<const Transition> batch, double gamma) {
  FrozenTargets f;
  for (const Transition& tr : batch) {
    const double next = tr.terminal ? 0.0 : net.value(tr.next_features);
    const double target = tr.reward + gamma * next;
    f.target.push_back(target);
    f.advantage.push_back(target - net.value(tr.features));
  }
  return f;
}

void normalize_advantages(FrozenTargets& frozen) {
  const auto n = static_cast<double>(frozen.advantage.size());
  if (n < 2) return;
  double mu = 0.0, var = 0.0;
  for (double a : frozen.advantage) mu += a;
  mu /= n;
  for (double a : frozen.advantage) var += (a - mu) * (a - mu);
  const double sd = std::sqrt(var / n);
  for (double& a : frozen.advantage) a = (a - mu) / (sd + 1e-8);
}

ActorCriticLoss actor_critic_loss(const ActorCriticNet& net, std::span<const Transition> batch,
                                  const FrozenTargets& frozen, double entropy_coef,
                                  std::vector<double>* gradient) {
  ActorCriticLoss loss;
  if (batch.empty()) return loss;
  const auto offsets = parameter_offsets(net.layers());
  if (gradient) gradient->assign(offsets.back(), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  TowerCache actor, critic;
  Distribution pi;
  std::vector<double> dlogits(net.n_actions()), dvalue(1);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const Transition& tr = batch[n];
    tower_forward(net.layers(), 0, tr.features, actor);
    tower_forward(net.layers(), 3, tr.features, critic);
    softmax(actor.out, pi);
    double entropy = 0.0;
    for (double p : pi)
      if (p > 0.0) entropy -= p * std::log(p);
    const double adv = frozen.advantage[n];
    const double logp = std::log(std::max(pi[tr.action], 1e-300));
    const double err = frozen.target[n] - critic.out[0];
    loss.actor += scale * (-adv * logp - entropy_coef * entropy);
    loss.critic += scale * 0.5 * err * err;
    if (!gradient) continue;
    for (int k = 0; k < net.n_actions(); ++k) {
      const double logpk = std::log(std::max(pi[k], 1e-300));
      dlogits[k] = scale * (adv * (pi[k] - (k == tr.action ? 1.0 : 0.0)) +
                            entropy_coef * pi[k] * (logpk + entropy));
    }
    dvalue[0] = scale * (critic.out[0] - frozen.target[n]);
    tower_backward(net.layers(), 0, tr.features, actor, dlogits, *gradient, offsets);
    tower_backward(net.layers(), 3, tr.features, critic, dvalue, *gradient, offsets);
  }
  loss.total = loss.actor + loss.critic;
  return loss;
}

// ---- imagination --------------------------------------------------------------

double Rollout::total_reward() const { return std::accumulate(rewards.begin(), rewards.end(), 0.0); }

Rollout imagine_rollout(const AugmentedModel& model, const BeliefPolicy& policy,
                        std::span<const double> reward, int horizon, Rng& rng) {
  if (reward.size() != static_cast<std::size_t>(model.n_obs))
    throw ValidationError("imagine_rollout: reward map must cover every observation");
  Rollout r;
  BeliefFilter f(model.chain());
  int o = rng.categorical(f.initial_observation());
  f.observe_first(o);
  r.observations.push_back(o);
  r.rewards.push_back(reward[o]);
  r.beliefs.push_back(f.belief());
  for (int t = 0; t < horizon; ++t) {
    const int a = rng.categorical(policy(f.belief()));
    o = rng.categorical(f.predict(a));
    f.advance(a, o);
    r.actions.push_back(a);
    r.observations.push_back(o);
    r.rewards.push_back(reward[o]);
    r.beliefs.push_back(f.belief());
  }
  return r;
}

Rollout imagine_rollout(const AugmentedModel& model, const ActorCriticNet& net,
                        std::span<const double> reward, int horizon, Rng& rng) {
  return imagine_rollout(model, [&](std::span<const double> b) { return net.policy(b); }, reward, horizon,
                         rng);
}

// ---- training -----------------------------------------------------------------

void DreamConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in [0, 1]");
  if (horizon < 1 || batch_size < 1 || max_epochs < 1 || hidden < 1 || plateau_window < 1 ||
      plateau_patience < 1)
    throw ValidationError("dream counts must be positive");
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(entropy_coef >= 0.0) || !(entropy_final >= 0.0) || entropy_decay_epochs < 0)
    throw ValidationError("entropy schedule must be nonnegative");
}

ActorCriticNet train_actor_critic(const AugmentedModel& model, std::span<const double> reward,
                                  const DreamConfig& cfg, TrainingReport* report) {
  cfg.validate();
  Rng rng(cfg.seed);
  ActorCriticNet net(model.n_latent, model.n_actions, cfg.hidden, rng);
  const std::size_t n_params = net.parameter_count();
  std::vector<double> m(n_params, 0.0), v(n_params, 0.0), grad;
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  std::deque<double> recent;
  double recent_sum = 0.0;
  double best_average = -std::numeric_limits<double>::infinity();
  int since_best = 0;
  int epoch = 0;
  double average = 0.0;
  std::vector<Transition> batch;
  const int decay_epochs = cfg.entropy_decay_epochs > 0 ? cfg.entropy_decay_epochs : cfg.max_epochs;
  for (; epoch < cfg.max_epochs; ++epoch) {
    batch.clear();
    double returns = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const Rollout r = imagine_rollout(model, net, reward, cfg.horizon, rng);
      returns += r.total_reward();
      for (int t = 0; t < cfg.horizon; ++t)
        batch.push_back({r.beliefs[t], r.actions[t], r.rewards[t + 1], r.beliefs[t + 1], t + 1 == cfg.horizon});
    }
    returns /= cfg.batch_size;

    FrozenTargets frozen = compute_targets(net, batch, cfg.gamma);
    if (cfg.normalize_advantages) normalize_advantages(frozen);
    const double progress = std::min(1.0, static_cast<double>(epoch) / decay_epochs);
    const double entropy_coef = cfg.entropy_coef + (cfg.entropy_final - cfg.entropy_coef) * progress;
    const ActorCriticLoss loss = actor_critic_loss(net, batch, frozen, entropy_coef, &grad);
    if (!(loss.critic <= 1e6))
      throw TrainingDiverged("actor-critic diverged at epoch " + std::to_string(epoch) +
                             ": value loss " + std::to_string(loss.critic));
    const long step = epoch + 1;
    const double c1 = 1.0 - std::pow(beta1, step), c2 = 1.0 - std::pow(beta2, step);
    for (std::size_t i = 0; i < n_params; ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      net.parameter(i) -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }

    recent.push_back(returns);
    recent_sum += returns;
    if (static_cast<int>(recent.size()) > cfg.plateau_window) {
      recent_sum -= recent.front();
      recent.pop_front();
    }
    average = recent_sum / static_cast<double>(recent.size());
    if (static_cast<int>(recent.size()) < cfg.plateau_window || epoch < decay_epochs) continue;
    if (average > best_average + 1e-6 * std::abs(best_average)) {
      best_average = average;
      since_best = 0;
    } else if (++since_best >= cfg.plateau_patience) {
      ++epoch;
      break;
    }
  }
  if (report) *report = {epoch, average, n_params};
  return net;
}

// ---- controllers ----------------------------------------------------------------

TabularController::TabularController(Policy policy) : policy_(std::move(policy)) {
  if (policy_.kind != PolicyKind::standard)
    throw ValidationError("a controller can only run a standard (history-based) policy");
}

std::unique_ptr<Controller> TabularController::clone() const {
  return std::make_unique<TabularController>(*this);
}

Distribution TabularController::action_probs() const {
  auto row = policy_.row(last_, 0);
  return {row.begin(), row.end()};
}

BeliefController::BeliefController(std::shared_ptr<const AugmentedModel> model,
                                   std::shared_ptr<const ActorCriticNet> net, bool greedy)
    : model_(std::move(model)), net_(std::move(net)), filter_(model_->chain()), greedy_(greedy) {}

std::unique_ptr<Controller> BeliefController::clone() const {
  return std::make_unique<BeliefController>(*this);
}

void BeliefController::reset(int first_observation) {
  filter_ = BeliefFilter(model_->chain());
  lost_ = false;
  try {
    filter_.observe_first(first_observation);
  } catch (const ImpossibleHistory&) {
    lost_ = true; // act on the prior
  }
}

Distribution BeliefController::action_probs() const {
  Distribution p = net_->policy(filter_.belief());
  if (!greedy_) return p;
  const auto best = std::max_element(p.begin(), p.end()) - p.begin();
  Distribution one_hot(p.size(), 0.0);
  one_hot[best] = 1.0;
  return one_hot;
}

void BeliefController::observe(int action, int observation) {
  if (lost_) return;
  try {
    filter_.advance(action, observation);
  } catch (const ImpossibleHistory&) {
    lost_ = true; // keep acting on the last belief
  }
}

} // namespace causal_pomdp
