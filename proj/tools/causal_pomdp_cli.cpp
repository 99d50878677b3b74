// causal-pomdp: command-line front end for datasets, fitting, queries and sweeps.
//
// Exit status: 0 on success, 1 on a usage error, 2 when the work itself fails.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "causal_pomdp/dataset_io.hpp"
#include "causal_pomdp/experiments.hpp"
#include "causal_pomdp/inference.hpp"

using namespace causal_pomdp;
namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by several subcommands. Optional ones override the config file.
struct Common {
  std::string env = "door";
  std::optional<std::string> scenario;
  std::vector<std::string> settings;
  std::vector<int> n_obs, n_int;
  std::optional<int> seeds, latent_size, restarts, trajectories, dream_epochs, workers;
  std::optional<std::string> method, mode;
  std::string out;
  std::optional<std::uint64_t> master_seed;
  std::string config;
};

void add_env(CLI::App* cmd, Common& c) {
  cmd->add_option("--env", c.env, "door, tiger, or an environment JSON file");
  cmd->add_option("--scenario", c.scenario, "privileged-policy scenario");
}

void add_fit(CLI::App* cmd, Common& c) {
  cmd->add_option("--latent-size", c.latent_size, "latent states |Z|");
  cmd->add_option("--method", c.method, "em or grad")->check(CLI::IsMember({"em", "grad", "gradient"}));
  cmd->add_option("--restarts", c.restarts, "random restarts per fit");
  cmd->add_option("--master-seed", c.master_seed, "master seed");
}

ExperimentConfig make_config(const Common& c) {
  ExperimentConfig cfg = default_experiment_config(c.env);
  if (!c.config.empty()) {
    const auto j = read_json_file(c.config);
    // an environment named in the file picks its own defaults
    if (j.contains("environment") && c.env == "door")
      cfg = default_experiment_config(j["environment"].get<std::string>());
    cfg = config_from_json(j, cfg);
  }
  if (c.scenario) cfg.scenario = *c.scenario;
  if (!c.settings.empty()) {
    cfg.settings.clear();
    for (const auto& s : c.settings) cfg.settings.push_back(parse_setting(s));
  }
  if (!c.n_obs.empty()) cfg.n_obs_grid = c.n_obs;
  if (!c.n_int.empty()) cfg.n_int_grid = c.n_int;
  if (c.seeds) cfg.n_seeds = *c.seeds;
  if (c.latent_size) cfg.fit.latent_size = *c.latent_size;
  if (c.method) cfg.fit.method = parse_fit_method(*c.method);
  if (c.restarts) cfg.fit.n_restarts = *c.restarts;
  if (c.mode) cfg.eval_mode = parse_eval_mode(*c.mode);
  if (c.trajectories) cfg.n_trajectories = *c.trajectories;
  if (c.dream_epochs) cfg.dream.max_epochs = *c.dream_epochs;
  if (c.workers) cfg.workers = static_cast<unsigned>(*c.workers);
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.master_seed) cfg.master_seed = *c.master_seed;
  return cfg;
}

std::vector<int> parse_ints(const std::string& text) {
  std::vector<int> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError("not an integer: \"" + tok + "\"");
    }
  }
  return out;
}

void print_distribution(const Distribution& d) {
  for (std::size_t i = 0; i < d.size(); ++i) std::printf("%s%.17g", i ? " " : "", d[i]);
  std::printf("\n");
}

int cmd_simulate(const Common& c, int seed) {
  const ExperimentConfig cfg = make_config(c);
  const Environment env = load_environment(cfg.environment);
  const Scenario sc = env.scenario(cfg.scenario);
  if (cfg.output_dir.empty()) throw UsageError("--out is required");
  fs::create_directories(cfg.output_dir);
  const CellData d = sample_cell(env, sc, cfg.n_obs_grid.front(), cfg.n_int_grid.front(), cfg.master_seed, seed);
  write_dataset(d.observational, fs::path(cfg.output_dir) / "obs.jsonl");
  write_dataset(d.interventional, fs::path(cfg.output_dir) / "int.jsonl");
  std::printf("wrote %zu observational and %zu interventional episodes to %s\n", d.observational.size(),
              d.interventional.size(), cfg.output_dir.c_str());
  return 0;
}

int cmd_fit(const Common& c, const std::vector<std::string>& data_files, const std::string& setting_name) {
  ExperimentConfig cfg = make_config(c);
  if (data_files.empty()) throw UsageError("at least one --data file is required");
  if (c.out.empty()) throw UsageError("--out is required");
  const Environment env = load_environment(cfg.environment);
  RegimeDataset obs, interventional;
  for (const auto& f : data_files)
    for (Episode& ep : read_dataset(f, env.pomdp.n_obs, env.pomdp.n_actions))
      (ep.regime == 0 ? obs : interventional).push_back(std::move(ep));
  const RegimeDataset train = build_training_set(obs, interventional, parse_setting(setting_name));
  cfg.fit.seed = cfg.master_seed;
  const FitResult r = fit(train, cfg.fit, env.pomdp.n_obs, env.pomdp.n_actions);
  write_json_file(model_to_json(r.model), c.out);
  std::printf("log-likelihood %.17g (restart %d, %d epochs)\n", r.objective, r.best_restart, r.epochs);
  return 0;
}

int cmd_infer(const Common& c, const std::string& model_path, const std::string& history_text, int action,
              int bound_steps) {
  const AugmentedModel model = model_from_json(read_json_file(model_path));
  validate_model(model);
  if (bound_steps > 0) {
    const ExperimentConfig cfg = make_config(c);
    const Environment env = load_environment(cfg.environment);
    const Scenario sc = env.scenario(cfg.scenario);
    auto reference = [&](const Episode& t) { return exact_observational_steps(env.pomdp, sc.privileged_policy, t); };
    const auto rows = bound_table(model, reference, bound_steps);
    if (c.out.empty()) {
      write_bound_report(rows, std::cout);
    } else {
      std::ofstream out(c.out);
      if (!out) throw std::runtime_error("cannot write " + c.out);
      write_bound_report(rows, out);
    }
    return 0;
  }
  const std::vector<int> seq = parse_ints(history_text);
  if (seq.empty() || seq.size() % 2 == 0)
    throw UsageError("--history must alternate observations and actions: o0 a0 o1 ... on");
  History h;
  for (std::size_t i = 0; i < seq.size(); ++i) (i % 2 == 0 ? h.observations : h.actions).push_back(seq[i]);
  if (action < 0 || action >= model.n_actions) throw UsageError("--action out of range");
  print_distribution(recovered_transition(model, h, action));
  return 0;
}

int cmd_eval(const Common& c, const std::string& model_path) {
  ExperimentConfig cfg = make_config(c);
  const Environment env = load_environment(cfg.environment);
  auto model = std::make_shared<const AugmentedModel>(model_from_json(read_json_file(model_path)));
  validate_model(*model);
  if (model->n_obs != env.pomdp.n_obs || model->n_actions != env.pomdp.n_actions)
    throw ValidationError("model alphabet does not match the environment");
  const bool bandit = env.pomdp.horizon == 1;
  const EvalMode mode = cfg.eval_mode.value_or(bandit ? EvalMode::exact : EvalMode::monte_carlo);
  const Estimate js = js_divergence(*model, env.pomdp, mode, cfg.n_trajectories, derive_seed(cfg.master_seed, {1}));
  Estimate reward;
  if (bandit) {
    const int a = plan_bandit(*model, env.pomdp.reward);
    reward = expected_reward(TabularController(Policy::constant(env.pomdp.n_actions, a)), env.pomdp, mode,
                             cfg.n_trajectories, derive_seed(cfg.master_seed, {2}));
  } else {
    DreamConfig dc = cfg.dream;
    dc.horizon = env.pomdp.horizon;
    dc.seed = derive_seed(cfg.master_seed, {3});
    auto net = std::make_shared<const ActorCriticNet>(train_actor_critic(*model, env.pomdp.reward, dc));
    reward = expected_reward(BeliefController(model, net, true), env.pomdp, mode, cfg.n_trajectories,
                             derive_seed(cfg.master_seed, {2}));
  }
  std::printf("js %.17g %.17g\nreward %.17g %.17g\n", js.value, js.std_error, reward.value, reward.std_error);
  return 0;
}

int cmd_experiment(const Common& c) {
  const ExperimentConfig cfg = make_config(c);
  cfg.validate();
  const auto rows = run_experiment(cfg);
  emit_report(rows, cfg.output_dir);
  write_json_file(config_to_json(cfg), fs::path(cfg.output_dir) / "config.json");
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.status != "ok";
  std::printf("%zu rows (%zu failed) written to %s\n", rows.size(), failed, cfg.output_dir.c_str());
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_dir) {
  if (inputs.empty()) throw UsageError("at least one --results file is required");
  if (out_dir.empty()) throw UsageError("--out is required");
  std::vector<ResultRow> rows;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    for (auto& r : read_results_csv(in)) rows.push_back(std::move(r));
  }
  emit_report(rows, out_dir);
  std::printf("%zu rows summarized into %s\n", rows.size(), out_dir.c_str());
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal world models from confounded observational and interventional POMDP data"};
  app.require_subcommand(1);
  Common c;

  auto* simulate = app.add_subcommand("simulate", "sample observational and interventional datasets");
  int sim_seed = 0;
  add_env(simulate, c);
  simulate->add_option("--n-obs", c.n_obs, "observational episodes")->expected(1);
  simulate->add_option("--n-int", c.n_int, "interventional episodes")->expected(1);
  simulate->add_option("--seed", sim_seed, "replicate index");
  simulate->add_option("--master-seed", c.master_seed, "master seed");
  simulate->add_option("--out", c.out, "output directory")->required();

  auto* fitcmd = app.add_subcommand("fit", "fit a latent model to dataset files");
  std::vector<std::string> data_files;
  std::string fit_setting = "augmented";
  add_env(fitcmd, c);
  add_fit(fitcmd, c);
  fitcmd->add_option("--data", data_files, "dataset JSON-lines files")->required();
  fitcmd->add_option("--setting", fit_setting, "no_obs, naive or augmented");
  fitcmd->add_option("--out", c.out, "model JSON output")->required();
  fitcmd->add_option("--config", c.config, "experiment config JSON");

  auto* infer = app.add_subcommand("infer", "query recovered transitions or bounds");
  std::string model_path, history;
  int action = 0, bound_steps = 0;
  add_env(infer, c);
  infer->add_option("--model", model_path, "model JSON")->required();
  infer->add_option("--history", history, "o0 a0 o1 ... on");
  infer->add_option("--action", action, "action to intervene with");
  infer->add_option("--bounds", bound_steps, "emit bounds CSV for all trajectories of this many steps");
  infer->add_option("--out", c.out, "bounds CSV output (default stdout)");

  auto* eval = app.add_subcommand("eval", "JS divergence and expected reward of a saved model");
  add_env(eval, c);
  eval->add_option("--model", model_path, "model JSON")->required();
  eval->add_option("--mode", c.mode, "exact or mc");
  eval->add_option("--n-trajectories", c.trajectories, "Monte Carlo sample size");
  eval->add_option("--dream-epochs", c.dream_epochs, "actor-critic epochs (multi-step environments)");
  eval->add_option("--master-seed", c.master_seed, "master seed");

  auto* experiment = app.add_subcommand("experiment", "full scenario x setting x sample-size sweep");
  add_env(experiment, c);
  add_fit(experiment, c);
  experiment->add_option("--setting", c.settings, "settings to run (repeatable)");
  experiment->add_option("--n-obs", c.n_obs, "observational sample grid");
  experiment->add_option("--n-int", c.n_int, "interventional sample grid");
  experiment->add_option("--seeds", c.seeds, "seeds per cell");
  experiment->add_option("--mode", c.mode, "exact or mc");
  experiment->add_option("--n-trajectories", c.trajectories, "Monte Carlo sample size");
  experiment->add_option("--dream-epochs", c.dream_epochs, "actor-critic epochs");
  experiment->add_option("--workers", c.workers, "worker threads");
  experiment->add_option("--out", c.out, "output directory");
  experiment->add_option("--config", c.config, "experiment config JSON");

  auto* report = app.add_subcommand("report", "aggregate results CSV files");
  std::vector<std::string> inputs;
  report->add_option("--results", inputs, "results.csv files")->required();
  report->add_option("--out", c.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*simulate) return cmd_simulate(c, sim_seed);
    if (*fitcmd) return cmd_fit(c, data_files, fit_setting);
    if (*infer) return cmd_infer(c, model_path, history, action, bound_steps);
    if (*eval) return cmd_eval(c, model_path);
    if (*experiment) return cmd_experiment(c);
    if (*report) return cmd_report(inputs, c.out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
