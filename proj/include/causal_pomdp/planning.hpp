#pragma once

#include <functional>
#include <memory>
#include <span>

#include <json.hpp>

#include "causal_pomdp/latent_model.hpp"
#include "causal_pomdp/pomdp.hpp"
#include "causal_pomdp/random.hpp"

namespace causal_pomdp {

/// Argmax over actions of the expected immediate reward under the recovered
/// interventional model, averaging over the model's first-observation
/// marginal. Ties go to the lowest action index.
int plan_bandit(const AugmentedModel& model, std::span<const double> reward);

/// Fully connected layer, weights row-major (out x in).
struct DenseLayer {
  int in = 0, out = 0;
  std::vector<double> weight;
  std::vector<double> bias;
};

/// Two towers (actor and critic), each with two tanh hidden layers, over a
/// belief feature vector.
class ActorCriticNet {
public:
  ActorCriticNet() = default;
  ActorCriticNet(int n_features, int n_actions, int hidden, Rng& rng);

  int n_features() const { return n_features_; }
  int n_actions() const { return n_actions_; }
  int hidden() const { return hidden_; }

  Distribution policy(std::span<const double> features) const;
  double value(std::span<const double> features) const;

  std::size_t parameter_count() const;
  double& parameter(std::size_t i);
  double parameter(std::size_t i) const;

  nlohmann::json to_json() const;
  static ActorCriticNet from_json(const nlohmann::json& j);

  // layer access for backprop; actor layers then critic layers
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

private:
  int n_features_ = 0, n_actions_ = 0, hidden_ = 0;
  std::vector<DenseLayer> layers_; // [actor1, actor2, actor_out, critic1, critic2, critic_out]
};

/// One step of experience: features of b_t, the action, the reward of
/// o_{t+1}, features of b_{t+1}, and whether t+1 ends the episode.
struct Transition {
  Distribution features;
  int action = 0;
  double reward = 0.0;
  Distribution next_features;
  bool terminal = false;
};

struct ActorCriticLoss {
  double actor = 0.0;
  double critic = 0.0;
  double total = 0.0;
};

/// Frozen per-transition quantities: TD target r + gamma V(b') and the
/// advantage used to weight the policy gradient.
struct FrozenTargets {
  std::vector<double> target;
  std::vector<double> advantage;
};

FrozenTargets compute_targets(const ActorCriticNet& net, std::span<const Transition> batch, double gamma);

/// Rescales advantages to zero mean and unit deviation over the batch, which
/// keeps the policy step independent of the reward scale.
void normalize_advantages(FrozenTargets& frozen);

/// Loss = mean over the batch of
///   -advantage * log pi(a|b) - entropy_coef * H(pi(.|b)) + 0.5 * (target - V(b))^2
/// Gradient (if requested) is written per parameter index.
ActorCriticLoss actor_critic_loss(const ActorCriticNet& net, std::span<const Transition> batch,
                                  const FrozenTargets& frozen, double entropy_coef,
                                  std::vector<double>* gradient = nullptr);

using BeliefPolicy = std::function<Distribution(std::span<const double> belief)>;

struct Rollout {
  std::vector<Distribution> beliefs; // H + 1
  std::vector<int> observations;     // H + 1
  std::vector<int> actions;          // H
  std::vector<double> rewards;       // reward(o_t), t = 0..H
  double total_reward() const;
};

/// Samples o_0 from the model, then alternates filter / act / sample
/// o_{t+1} from the recovered transition.
Rollout imagine_rollout(const AugmentedModel& model, const BeliefPolicy& policy,
                        std::span<const double> reward, int horizon, Rng& rng);
Rollout imagine_rollout(const AugmentedModel& model, const ActorCriticNet& net,
                        std::span<const double> reward, int horizon, Rng& rng);

struct DreamConfig {
  int horizon = 50;
  int batch_size = 8;
  double gamma = 0.9;
  double learning_rate = 1e-2;
  int max_epochs = 1000;
  int hidden = 32;
  // Entropy bonus, annealed linearly from entropy_coef to entropy_final over
  // entropy_decay_epochs (0: over max_epochs). Plateau stopping only starts
  // once the anneal is over.
  double entropy_coef = 1.0;
  double entropy_final = 0.01;
  int entropy_decay_epochs = 0;
  bool normalize_advantages = true;
  int plateau_window = 50;    // epochs in the moving average of returns
  int plateau_patience = 200; // epochs without moving-average improvement
  std::uint64_t seed = 0;

  void validate() const;
};

class TrainingDiverged : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct TrainingReport {
  int epochs = 0;
  double final_average_return = 0.0;
  std::size_t parameter_count = 0;
};

ActorCriticNet train_actor_critic(const AugmentedModel& model, std::span<const double> reward,
                                  const DreamConfig& config, TrainingReport* report = nullptr);

/// Policy acting on observable histories, used to evaluate plans on the true
/// environment.
class Controller {
public:
  virtual ~Controller() = default;
  virtual std::unique_ptr<Controller> clone() const = 0;
  virtual void reset(int first_observation) = 0;
  virtual Distribution action_probs() const = 0;
  virtual void observe(int action, int observation) = 0;
  /// True when action_probs never depends on the history.
  virtual bool history_independent() const { return false; }
};

/// Wraps a tabular standard policy.
class TabularController final : public Controller {
public:
  explicit TabularController(Policy policy);
  std::unique_ptr<Controller> clone() const override;
  void reset(int first_observation) override { last_ = first_observation; }
  Distribution action_probs() const override;
  void observe(int, int observation) override { last_ = observation; }
  bool history_independent() const override { return policy_.history_independent(); }

private:
  Policy policy_;
  int last_ = 0;
};

/// Filters the learned model's belief over real observations and feeds it to
/// the actor. `greedy` plays the policy head's argmax.
class BeliefController final : public Controller {
public:
  BeliefController(std::shared_ptr<const AugmentedModel> model, std::shared_ptr<const ActorCriticNet> net,
                   bool greedy);
  std::unique_ptr<Controller> clone() const override;
  void reset(int first_observation) override;
  Distribution action_probs() const override;
  void observe(int action, int observation) override;

private:
  std::shared_ptr<const AugmentedModel> model_;
  std::shared_ptr<const ActorCriticNet> net_;
  BeliefFilter filter_;
  bool greedy_;
  bool lost_ = false; // the model gave the real history zero mass
};

} // namespace causal_pomdp
