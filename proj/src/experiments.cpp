#include "causal_pomdp/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "causal_pomdp/parallel.hpp"

namespace causal_pomdp {

using nlohmann::json;

Setting parse_setting(const std::string& s) {
  if (s == "no_obs") return Setting::no_obs;
  if (s == "naive") return Setting::naive;
  if (s == "augmented") return Setting::augmented;
  throw ValidationError("unknown setting \"" + s + "\" (expected no_obs, naive or augmented)");
}

std::string to_string(Setting s) {
  switch (s) {
  case Setting::no_obs: return "no_obs";
  case Setting::naive: return "naive";
  case Setting::augmented: return "augmented";
  }
  return "?";
}

RegimeDataset build_training_set(const RegimeDataset& obs, const RegimeDataset& interventional, Setting setting) {
  for (const Episode& ep : obs)
    if (ep.regime != 0) throw ValidationError("observational dataset contains a regime-1 episode");
  for (const Episode& ep : interventional)
    if (ep.regime != 1) throw ValidationError("interventional dataset contains a regime-0 episode");
  RegimeDataset out = interventional;
  if (setting == Setting::no_obs) return out;
  out.reserve(out.size() + obs.size());
  for (Episode ep : obs) {
    if (setting == Setting::naive) ep.regime = 1;
    out.push_back(std::move(ep));
  }
  return out;
}

std::vector<int> powers_of_two(int max_value) {
  std::vector<int> out;
  for (int v = 1; v <= max_value; v *= 2) out.push_back(v);
  return out;
}

void ExperimentConfig::validate() const {
  if (n_obs_grid.empty() || n_int_grid.empty()) throw ValidationError("sample-size grids must be nonempty");
  for (int n : n_obs_grid)
    if (n < 0) throw ValidationError("n_obs must be nonnegative");
  for (int n : n_int_grid)
    if (n < 0) throw ValidationError("n_int must be nonnegative");
  if (n_seeds < 1) throw ValidationError("n_seeds must be at least 1");
  if (settings.empty()) throw ValidationError("at least one setting is required");
  if (n_trajectories < 1) throw ValidationError("n_trajectories must be positive");
  fit.validate();
  dream.validate();
}

ExperimentConfig default_experiment_config(const std::string& environment) {
  ExperimentConfig c;
  c.environment = environment;
  if (environment == "tiger") {
    c.n_int_grid = powers_of_two(8192);
    c.fit.latent_size = 8;
    c.fit.n_restarts = 4;
    c.fit.max_epochs = 100;
    c.dream.max_epochs = 2000;
  }
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json settings = json::array();
  for (Setting s : c.settings) settings.push_back(to_string(s));
  return {{"environment", c.environment},
          {"scenario", c.scenario},
          {"settings", settings},
          {"n_obs", c.n_obs_grid},
          {"n_int", c.n_int_grid},
          {"n_seeds", c.n_seeds},
          {"latent_size", c.fit.latent_size},
          {"method", to_string(c.fit.method)},
          {"n_restarts", c.fit.n_restarts},
          {"max_epochs", c.fit.max_epochs},
          {"steps_per_epoch", c.fit.steps_per_epoch},
          {"batch_size", c.fit.batch_size},
          {"learning_rate", c.fit.learning_rate},
          {"eval_mode", c.eval_mode ? (*c.eval_mode == EvalMode::exact ? "exact" : "mc") : "auto"},
          {"n_trajectories", c.n_trajectories},
          {"em_tolerance", c.fit.em_tolerance},
          {"dream_epochs", c.dream.max_epochs},
          {"dream_batch_size", c.dream.batch_size},
          {"gamma", c.dream.gamma},
          {"dream_learning_rate", c.dream.learning_rate},
          {"entropy_coef", c.dream.entropy_coef},
          {"entropy_final", c.dream.entropy_final},
          {"workers", c.workers},
          {"dream_hidden", c.dream.hidden},
          {"out", c.output_dir},
          {"master_seed", c.master_seed}};
}

ExperimentConfig config_from_json(const json& j, ExperimentConfig c) {
  try {
    if (j.contains("environment")) c.environment = j["environment"].get<std::string>();
    if (j.contains("scenario")) c.scenario = j["scenario"].get<std::string>();
    if (j.contains("settings")) {
      c.settings.clear();
      for (const auto& s : j["settings"]) c.settings.push_back(parse_setting(s.get<std::string>()));
    }
    if (j.contains("n_obs")) c.n_obs_grid = j["n_obs"].get<std::vector<int>>();
    if (j.contains("n_int")) c.n_int_grid = j["n_int"].get<std::vector<int>>();
    if (j.contains("n_seeds")) c.n_seeds = j["n_seeds"].get<int>();
    if (j.contains("latent_size")) c.fit.latent_size = j["latent_size"].get<int>();
    if (j.contains("method")) c.fit.method = parse_fit_method(j["method"].get<std::string>());
    if (j.contains("n_restarts")) c.fit.n_restarts = j["n_restarts"].get<int>();
    if (j.contains("max_epochs")) c.fit.max_epochs = j["max_epochs"].get<int>();
    if (j.contains("steps_per_epoch")) c.fit.steps_per_epoch = j["steps_per_epoch"].get<int>();
    if (j.contains("batch_size")) c.fit.batch_size = j["batch_size"].get<int>();
    if (j.contains("learning_rate")) c.fit.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("eval_mode")) {
      const auto m = j["eval_mode"].get<std::string>();
      c.eval_mode = m == "auto" ? std::nullopt : std::optional(parse_eval_mode(m));
    }
    if (j.contains("n_trajectories")) c.n_trajectories = j["n_trajectories"].get<int>();
    if (j.contains("em_tolerance")) c.fit.em_tolerance = j["em_tolerance"].get<double>();
    if (j.contains("dream_epochs")) c.dream.max_epochs = j["dream_epochs"].get<int>();
    if (j.contains("dream_batch_size")) c.dream.batch_size = j["dream_batch_size"].get<int>();
    if (j.contains("gamma")) c.dream.gamma = j["gamma"].get<double>();
    if (j.contains("dream_learning_rate")) c.dream.learning_rate = j["dream_learning_rate"].get<double>();
    if (j.contains("entropy_coef")) c.dream.entropy_coef = j["entropy_coef"].get<double>();
    if (j.contains("entropy_final")) c.dream.entropy_final = j["entropy_final"].get<double>();
    if (j.contains("workers")) c.workers = j["workers"].get<unsigned>();
    if (j.contains("dream_hidden")) c.dream.hidden = j["dream_hidden"].get<int>();
    if (j.contains("out")) c.output_dir = j["out"].get<std::string>();
    if (j.contains("master_seed")) c.master_seed = j["master_seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("experiment config: ") + e.what());
  }
  return c;
}

CellData sample_cell(const Environment& env, const Scenario& scenario, int n_obs, int n_int,
                     std::uint64_t master_seed, int seed) {
  // prefixes of one stream per seed, so larger samples extend smaller ones
  const auto s = static_cast<std::uint64_t>(seed);
  CellData d;
  d.observational = sample_dataset(env.pomdp, scenario.privileged_policy, 0, n_obs,
                                   derive_seed(master_seed, {tag_hash("obs"), s}));
  d.interventional = sample_dataset(env.pomdp, scenario.standard_policy, 1, n_int,
                                    derive_seed(master_seed, {tag_hash("int"), s}));
  return d;
}

CellOutcome run_cell(const Environment& env, const Scenario& scenario, const ExperimentConfig& config,
                     const CellData& data, int n_obs, int n_int, int seed, Setting setting) {
  const auto start = std::chrono::steady_clock::now();
  CellOutcome out;
  ResultRow& row = out.row;
  row.environment = env.name;
  row.scenario = scenario.name;
  row.setting = setting;
  row.n_obs = n_obs;
  row.n_int = n_int;
  row.seed = seed;
  const std::uint64_t key[] = {static_cast<std::uint64_t>(seed), static_cast<std::uint64_t>(n_obs),
                               static_cast<std::uint64_t>(n_int), static_cast<std::uint64_t>(setting)};
  auto cell_seed = [&](const char* purpose) {
    return derive_seed(config.master_seed, {tag_hash(purpose), key[0], key[1], key[2], key[3]});
  };
  try {
    const RegimeDataset train = build_training_set(data.observational, data.interventional, setting);
    if (train.empty()) throw ValidationError("empty training set");
    FitConfig fc = config.fit;
    fc.seed = cell_seed("fit");
    out.model = fit(train, fc, env.pomdp.n_obs, env.pomdp.n_actions).model;

    const bool bandit = env.pomdp.horizon == 1;
    const EvalMode mode = config.eval_mode.value_or(bandit ? EvalMode::exact : EvalMode::monte_carlo);
    row.js = js_divergence(out.model, env.pomdp, mode, config.n_trajectories, cell_seed("js")).value;
    if (bandit) {
      const int action = plan_bandit(out.model, env.pomdp.reward);
      const TabularController ctl(Policy::constant(env.pomdp.n_actions, action));
      row.reward = expected_reward(ctl, env.pomdp, mode, config.n_trajectories, cell_seed("reward")).value;
    } else {
      DreamConfig dc = config.dream;
      dc.horizon = env.pomdp.horizon;
      dc.seed = cell_seed("dream");
      auto model = std::make_shared<const AugmentedModel>(out.model);
      auto net = std::make_shared<const ActorCriticNet>(train_actor_critic(*model, env.pomdp.reward, dc));
      const BeliefController ctl(model, net, /*greedy=*/true);
      row.reward = expected_reward(ctl, env.pomdp, mode, config.n_trajectories, cell_seed("reward")).value;
    }
  } catch (const std::exception& e) {
    row.status = std::string("error: ") + e.what();
    row.js = row.reward = std::numeric_limits<double>::quiet_NaN();
  }
  row.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& config) {
  config.validate();
  const Environment env = load_environment(config.environment);
  const Scenario scenario = env.scenario(config.scenario);

  struct Task {
    int n_obs, n_int, seed;
    Setting setting;
    std::size_t data_index;
  };
  std::vector<CellData> cells;
  std::vector<Task> tasks;
  for (int n_obs : config.n_obs_grid)
    for (int n_int : config.n_int_grid)
      for (int seed = 0; seed < config.n_seeds; ++seed) {
        cells.push_back(sample_cell(env, scenario, n_obs, n_int, config.master_seed, seed));
        for (Setting s : config.settings) tasks.push_back({n_obs, n_int, seed, s, cells.size() - 1});
      }

  std::vector<ResultRow> rows(tasks.size());
  parallel_for(
      tasks.size(),
      [&](std::size_t i) {
        const Task& t = tasks[i];
        rows[i] = run_cell(env, scenario, config, cells[t.data_index], t.n_obs, t.n_int, t.seed, t.setting).row;
      },
      config.workers == 0 ? default_workers() : config.workers);
  return rows;
}

namespace {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

} // namespace

void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
  out << "environment,scenario,setting,n_obs,n_int,seed,js,reward,status\n";
  for (const ResultRow& r : rows)
    out << r.environment << ',' << r.scenario << ',' << to_string(r.setting) << ',' << r.n_obs << ','
        << r.n_int << ',' << r.seed << ',' << format_double(r.js) << ',' << format_double(r.reward) << ','
        << csv_escape(r.status) << '\n';
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::vector<ResultRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 9) throw ParseError("expected 9 fields in results row", line_no);
    ResultRow r;
    try {
      r.environment = f[0];
      r.scenario = f[1];
      r.setting = parse_setting(f[2]);
      r.n_obs = std::stoi(f[3]);
      r.n_int = std::stoi(f[4]);
      r.seed = std::stoi(f[5]);
      r.js = std::stod(f[6]);
      r.reward = std::stod(f[7]);
      r.status = f[8];
    } catch (const std::exception& e) {
      throw ParseError(e.what(), line_no);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<SummaryLine> summarize(const std::vector<ResultRow>& rows) {
  using Key = std::tuple<std::string, std::string, int, int>;
  std::map<Key, std::map<Setting, std::pair<std::vector<double>, std::vector<double>>>> groups;
  for (const ResultRow& r : rows) {
    if (r.status != "ok") continue;
    auto& g = groups[{r.environment, r.scenario, r.n_obs, r.n_int}][r.setting];
    g.first.push_back(r.js);
    g.second.push_back(r.reward);
  }
  auto compare = [](const std::vector<double>& a, const std::vector<double>& b) {
    SummaryLine::Comparison c;
    c.present = true;
    try {
      c.p_value = welch_t_test(a, b).p_value;
    } catch (const DegenerateSample&) {
      c.degenerate = true;
    }
    return c;
  };
  std::vector<SummaryLine> out;
  for (const auto& [key, by_setting] : groups) {
    const auto aug = by_setting.find(Setting::augmented);
    SummaryLine::Comparison js_no, js_naive, rw_no, rw_naive;
    if (aug != by_setting.end()) {
      if (auto it = by_setting.find(Setting::no_obs); it != by_setting.end()) {
        js_no = compare(aug->second.first, it->second.first);
        rw_no = compare(aug->second.second, it->second.second);
      }
      if (auto it = by_setting.find(Setting::naive); it != by_setting.end()) {
        js_naive = compare(aug->second.first, it->second.first);
        rw_naive = compare(aug->second.second, it->second.second);
      }
    }
    for (const auto& [setting, values] : by_setting) {
      SummaryLine s;
      std::tie(s.environment, s.scenario, s.n_obs, s.n_int) = key;
      s.setting = setting;
      s.n = static_cast<int>(values.first.size());
      s.js_mean = mean(values.first);
      s.js_se = standard_error(values.first);
      s.reward_mean = mean(values.second);
      s.reward_se = standard_error(values.second);
      s.js_vs_no_obs = js_no;
      s.js_vs_naive = js_naive;
      s.reward_vs_no_obs = rw_no;
      s.reward_vs_naive = rw_naive;
      out.push_back(s);
    }
  }
  return out;
}

void emit_report(const std::vector<ResultRow>& rows, const std::filesystem::path& out_dir) {
  if (rows.empty()) throw ValidationError("emit_report: no rows");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());

  {
    auto out = open_output(out_dir / "results.csv");
    write_results_csv(rows, out);
  }
  {
    auto out = open_output(out_dir / "timings.csv");
    out << "environment,scenario,setting,n_obs,n_int,seed,wall_time_seconds\n";
    for (const ResultRow& r : rows)
      out << r.environment << ',' << r.scenario << ',' << to_string(r.setting) << ',' << r.n_obs << ','
          << r.n_int << ',' << r.seed << ',' << format_double(r.wall_time_seconds) << '\n';
  }
  const auto summary = summarize(rows);
  auto p_field = [](const SummaryLine::Comparison& c) -> std::string {
    if (!c.present) return "";
    if (c.degenerate) return "degenerate";
    return format_double(*c.p_value);
  };
  auto sig_field = [](const SummaryLine::Comparison& c) -> std::string {
    if (!c.present || c.degenerate) return "";
    return *c.p_value < kSignificanceLevel ? "1" : "0";
  };
  {
    auto out = open_output(out_dir / "summary.csv");
    out << "environment,scenario,n_obs,n_int,setting,n,js_mean,js_se,reward_mean,reward_se,"
           "js_p_vs_no_obs,js_p_vs_naive,reward_p_vs_no_obs,reward_p_vs_naive,"
           "js_sig_vs_no_obs,js_sig_vs_naive,reward_sig_vs_no_obs,reward_sig_vs_naive\n";
    for (const SummaryLine& s : summary)
      out << s.environment << ',' << s.scenario << ',' << s.n_obs << ',' << s.n_int << ',' << to_string(s.setting)
          << ',' << s.n << ',' << format_double(s.js_mean) << ',' << format_double(s.js_se) << ','
          << format_double(s.reward_mean) << ',' << format_double(s.reward_se) << ',' << p_field(s.js_vs_no_obs)
          << ',' << p_field(s.js_vs_naive) << ',' << p_field(s.reward_vs_no_obs) << ','
          << p_field(s.reward_vs_naive) << ',' << sig_field(s.js_vs_no_obs) << ',' << sig_field(s.js_vs_naive)
          << ',' << sig_field(s.reward_vs_no_obs) << ',' << sig_field(s.reward_vs_naive) << '\n';
  }
  {
    auto out = open_output(out_dir / "plot.csv");
    out << "environment,scenario,setting,n_obs,n_int,metric,mean,stderr\n";
    for (const SummaryLine& s : summary) {
      const std::string prefix = s.environment + ',' + s.scenario + ',' + to_string(s.setting) + ',' +
                                 std::to_string(s.n_obs) + ',' + std::to_string(s.n_int) + ',';
      out << prefix << "js," << format_double(s.js_mean) << ',' << format_double(s.js_se) << '\n';
      out << prefix << "reward," << format_double(s.reward_mean) << ',' << format_double(s.reward_se) << '\n';
    }
  }
}

} // namespace causal_pomdp
