#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "causal_pomdp/experiments.hpp"

using namespace causal_pomdp;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.n_obs_grid = {16};
  c.n_int_grid = {1, 2};
  c.n_seeds = 2;
  c.fit.latent_size = 4;
  c.fit.max_epochs = 20;
  c.master_seed = 5;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

ResultRow row(Setting s, int seed, double js, double reward) {
  ResultRow r;
  r.environment = "door";
  r.scenario = "noisy_good";
  r.setting = s;
  r.n_obs = 512;
  r.n_int = 8;
  r.seed = seed;
  r.js = js;
  r.reward = reward;
  return r;
}

} // namespace

TEST_CASE("training sets for the three settings") {
  const Environment env = door_environment();
  const Scenario sc = env.scenario("noisy_good");
  const CellData d = sample_cell(env, sc, 512, 8, 0, 0);
  const auto aug = build_training_set(d.observational, d.interventional, Setting::augmented);
  const auto naive = build_training_set(d.observational, d.interventional, Setting::naive);
  const auto no_obs = build_training_set(d.observational, d.interventional, Setting::no_obs);
  CHECK(aug.size() == 520);
  CHECK(std::count_if(aug.begin(), aug.end(), [](const Episode& e) { return e.regime == 0; }) == 512);
  CHECK(naive.size() == 520);
  CHECK(std::all_of(naive.begin(), naive.end(), [](const Episode& e) { return e.regime == 1; }));
  CHECK(no_obs.size() == 8);
  CHECK_THROWS_AS(build_training_set(d.interventional, d.interventional, Setting::augmented), ValidationError);
  CHECK_THROWS_AS(build_training_set(d.observational, d.observational, Setting::augmented), ValidationError);
}

TEST_CASE("cell samples are paired and nested") {
  const Environment env = door_environment();
  const Scenario sc = env.scenario("noisy_good");
  const CellData small = sample_cell(env, sc, 512, 8, 3, 1);
  const CellData large = sample_cell(env, sc, 512, 64, 3, 1);
  CHECK(small.observational == large.observational);
  for (std::size_t i = 0; i < small.interventional.size(); ++i) CHECK(small.interventional[i] == large.interventional[i]);
  const CellData other_seed = sample_cell(env, sc, 512, 8, 3, 2);
  CHECK_FALSE(other_seed.observational == small.observational);
}

TEST_CASE("grids and settings") {
  CHECK(powers_of_two(512) == std::vector<int>{1, 2, 4, 8, 16, 32, 64, 128, 256, 512});
  CHECK(powers_of_two(8192).size() == 14);
  CHECK(parse_setting("naive") == Setting::naive);
  CHECK_THROWS_AS(parse_setting("both"), ValidationError);
  ExperimentConfig c;
  c.n_seeds = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ExperimentConfig{};
  c.n_int_grid.clear();
  CHECK_THROWS_AS(c.validate(), ValidationError);
  CHECK(default_experiment_config("tiger").n_int_grid.back() == 8192);
}

TEST_CASE("config json round trip") {
  ExperimentConfig c = small_config();
  c.settings = {Setting::augmented};
  c.eval_mode = EvalMode::monte_carlo;
  const ExperimentConfig back = config_from_json(config_to_json(c));
  CHECK(back.n_obs_grid == c.n_obs_grid);
  CHECK(back.n_int_grid == c.n_int_grid);
  CHECK(back.settings == c.settings);
  CHECK(back.fit.latent_size == 4);
  CHECK(back.fit.method == FitMethod::em);
  CHECK(back.eval_mode == EvalMode::monte_carlo);
  CHECK(back.master_seed == 5);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"n_seeds", "ten"}}), ValidationError);
}

TEST_CASE("small sweep: cardinality, order and determinism") {
  const ExperimentConfig c = small_config();
  const auto rows = run_experiment(c);
  REQUIRE(rows.size() == 1 * 2 * 2 * 3);
  CHECK(rows[0].setting == Setting::no_obs);
  CHECK(rows[0].n_int == 1);
  CHECK(rows.back().n_int == 2);
  CHECK(rows.back().seed == 1);
  for (const auto& r : rows) {
    CHECK(r.status == "ok");
    CHECK(r.js >= 0.0);
    CHECK(r.wall_time_seconds >= 0.0);
  }
  std::ostringstream a, b;
  write_results_csv(rows, a);
  write_results_csv(run_experiment(c), b);
  CHECK(a.str() == b.str());

  std::istringstream in(a.str());
  const auto back = read_results_csv(in);
  REQUIRE(back.size() == rows.size());
  CHECK(back[3].js == rows[3].js);
  CHECK(back[3].reward == rows[3].reward);
}

TEST_CASE("failing cells are recorded, not fatal") {
  ExperimentConfig c = small_config();
  c.n_int_grid = {0};
  c.n_seeds = 1;
  const auto rows = run_experiment(c);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].setting == Setting::no_obs);
  CHECK(rows[0].status.rfind("error", 0) == 0); // no data at all
  CHECK(std::isnan(rows[0].js));
  CHECK(rows[2].status == "ok");
}

TEST_CASE("summary groups cells and flags degenerate comparisons") {
  std::vector<ResultRow> rows;
  for (int seed = 0; seed < 5; ++seed)
    for (Setting s : {Setting::no_obs, Setting::naive, Setting::augmented}) rows.push_back(row(s, seed, 0.1, 0.6));
  const auto summary = summarize(rows);
  REQUIRE(summary.size() == 3);
  for (const auto& line : summary) {
    CHECK(line.n == 5);
    CHECK(line.js_vs_no_obs.present);
    CHECK(line.js_vs_no_obs.degenerate);
    CHECK(line.reward_vs_naive.degenerate);
    CHECK_FALSE(line.js_vs_naive.p_value.has_value());
  }
}

TEST_CASE("significance flag follows p below 0.05") {
  std::vector<ResultRow> rows;
  const double aug_js[] = {0.01, 0.02, 0.015, 0.012, 0.018};
  const double base_js[] = {0.10, 0.12, 0.09, 0.11, 0.13};
  for (int seed = 0; seed < 5; ++seed) {
    rows.push_back(row(Setting::no_obs, seed, base_js[seed], 0.4 + 0.01 * seed));
    rows.push_back(row(Setting::augmented, seed, aug_js[seed], 0.41 + 0.01 * seed));
  }
  const fs::path dir = fs::temp_directory_path() / "causal_pomdp_report_test";
  fs::remove_all(dir);
  emit_report(rows, dir);
  for (const char* f : {"results.csv", "timings.csv", "summary.csv", "plot.csv"}) CHECK(fs::exists(dir / f));
  const std::string summary = slurp(dir / "summary.csv");
  std::istringstream lines(summary);
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  CHECK(header.find("js_p_vs_no_obs") != std::string::npos);
  const auto s = summarize(rows);
  REQUIRE(s.size() == 2);
  REQUIRE(s[0].js_vs_no_obs.p_value.has_value());
  CHECK(*s[0].js_vs_no_obs.p_value < kSignificanceLevel);
  CHECK(*s[0].reward_vs_no_obs.p_value > kSignificanceLevel);
  CHECK(first.find(",1,") != std::string::npos); // js flag set
  CHECK_FALSE(s[0].js_vs_naive.present);
  // results.csv excludes timings so reruns compare byte for byte
  CHECK(slurp(dir / "results.csv").find("wall_time") == std::string::npos);
  fs::remove_all(dir);

  CHECK_THROWS_AS(emit_report({}, dir), ValidationError);
  CHECK_THROWS(emit_report(rows, "/proc/no_such_dir/out"));
}
