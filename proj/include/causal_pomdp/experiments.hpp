#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "causal_pomdp/environments.hpp"
#include "causal_pomdp/evaluation.hpp"
#include "causal_pomdp/latent_model.hpp"
#include "causal_pomdp/planning.hpp"

namespace causal_pomdp {

enum class Setting { no_obs, naive, augmented };

Setting parse_setting(const std::string& s);
std::string to_string(Setting s);

/// no_obs: interventional only; naive: observational episodes relabeled as
/// interventional; augmented: both, regimes kept.
RegimeDataset build_training_set(const RegimeDataset& obs, const RegimeDataset& interventional, Setting setting);

std::vector<int> powers_of_two(int max_value);

struct ExperimentConfig {
  std::string environment = "door";
  std::string scenario = "noisy_good";
  std::vector<Setting> settings{Setting::no_obs, Setting::naive, Setting::augmented};
  std::vector<int> n_obs_grid{512};
  std::vector<int> n_int_grid = powers_of_two(512);
  int n_seeds = 10;
  FitConfig fit{.method = FitMethod::em};  // EM reaches better optima than the gradient recipe, much faster
  std::optional<EvalMode> eval_mode;       // default: exact for H = 1, Monte Carlo otherwise
  int n_trajectories = 100;
  DreamConfig dream;
  std::string output_dir = "results";
  std::uint64_t master_seed = 0;
  unsigned workers = 0;                    // 0: hardware concurrency

  void validate() const;
};

/// Sweep defaults per environment. The tiger gets the long interventional
/// grid, a smaller latent space (the true chain has 6 states), a few EM
/// restarts capped at 100 iterations, and a longer actor-critic run.
ExperimentConfig default_experiment_config(const std::string& environment);

nlohmann::json config_to_json(const ExperimentConfig& c);
/// Fields absent from `j` keep the values already in `base`.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});

struct ResultRow {
  std::string environment;
  std::string scenario;
  Setting setting = Setting::augmented;
  int n_obs = 0;
  int n_int = 0;
  int seed = 0;
  double js = 0.0;
  double reward = 0.0;
  double wall_time_seconds = 0.0;
  std::string status = "ok";
};

/// Everything computed for one (n_obs, n_int, seed, setting) cell.
struct CellOutcome {
  ResultRow row;
  AugmentedModel model;
};

/// Datasets for one grid cell; shared across settings so comparisons are paired.
struct CellData {
  RegimeDataset observational;
  RegimeDataset interventional;
};

CellData sample_cell(const Environment& env, const Scenario& scenario, int n_obs, int n_int,
                     std::uint64_t master_seed, int seed);

CellOutcome run_cell(const Environment& env, const Scenario& scenario, const ExperimentConfig& config,
                     const CellData& data, int n_obs, int n_int, int seed, Setting setting);

/// Full sweep. Rows are ordered by (n_obs, n_int, seed, setting) whatever the
/// completion order.
std::vector<ResultRow> run_experiment(const ExperimentConfig& config);

void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out);
std::vector<ResultRow> read_results_csv(std::istream& in);

struct SummaryLine {
  std::string environment, scenario;
  int n_obs = 0, n_int = 0;
  Setting setting = Setting::augmented;
  int n = 0;
  double js_mean = 0.0, js_se = 0.0, reward_mean = 0.0, reward_se = 0.0;
  // augmented vs baseline, per metric; nullopt when the baseline is absent
  struct Comparison {
    std::optional<double> p_value; // nullopt with degenerate = true
    bool degenerate = false;
    bool present = false;
  };
  Comparison js_vs_no_obs, js_vs_naive, reward_vs_no_obs, reward_vs_naive;
};

std::vector<SummaryLine> summarize(const std::vector<ResultRow>& rows);

/// Writes results.csv, timings.csv, summary.csv and plot.csv into `out_dir`.
void emit_report(const std::vector<ResultRow>& rows, const std::filesystem::path& out_dir);

inline constexpr double kSignificanceLevel = 0.05;

} // namespace causal_pomdp
