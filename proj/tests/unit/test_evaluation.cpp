#include <doctest.h>

#include <cmath>

#include "causal_pomdp/environments.hpp"
#include "causal_pomdp/evaluation.hpp"

using namespace causal_pomdp;

namespace {

// Door-shaped model whose presses open the door half of the time.
AugmentedModel coin_door() {
  AugmentedModel m;
  m.n_latent = 2;
  m.n_obs = 2;
  m.n_actions = 2;
  m.latent_prior = {1.0, 0.0};
  m.emission = Table::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  m.latent_trans = Table::from_rows({{0.5, 0.5}, {0.5, 0.5}, {0.0, 1.0}, {0.0, 1.0}});
  m.obs_policy = Table(2, 2, 0.5);
  return m;
}

} // namespace

TEST_CASE("js divergence of the truth against itself is zero") {
  const Environment door = door_environment();
  CHECK(std::abs(js_divergence(embed_pomdp(door.pomdp, 4), door.pomdp, EvalMode::exact).value) <= 1e-9);
  CHECK(std::abs(js_divergence(embed_pomdp(door.pomdp, 9), door.pomdp, EvalMode::exact).value) <= 1e-9);
  // Monte Carlo: each sampled term is exactly zero too
  const Environment tiger = tiger_environment();
  const Estimate mc = js_divergence(embed_pomdp(tiger.pomdp, 6), tiger.pomdp, EvalMode::monte_carlo, 50, 3);
  CHECK(std::abs(mc.value) <= 1e-9);
}

TEST_CASE("js divergence of a coin-flip door") {
  // per action JS((0.4, 0.6), (0.5, 0.5)); the first observation agrees
  const Environment door = door_environment();
  const Estimate e = js_divergence(coin_door(), door.pomdp, EvalMode::exact);
  CHECK(e.value == doctest::Approx(0.005059389928987596).epsilon(1e-12));
  CHECK(e.std_error == 0.0);
}

TEST_CASE("js divergence is symmetric and agrees across modes") {
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const AugmentedModel a = random_model(2, 2, 2, rng, 4.0);
    const AugmentedModel b = random_model(3, 2, 2, rng, 4.0);
    const double ab = js_divergence(a.chain(), b.chain(), 2, EvalMode::exact).value;
    const double ba = js_divergence(b.chain(), a.chain(), 2, EvalMode::exact).value;
    CHECK(std::abs(ab - ba) <= 1e-9);
    CHECK(ab >= 0.0);
    CHECK(ab <= std::log(2.0) * 3.0);
    const Estimate mc = js_divergence(a.chain(), b.chain(), 2, EvalMode::monte_carlo, 20000, 11 + trial);
    CHECK(std::abs(mc.value - ab) <= 4.0 * mc.std_error + 1e-12);
  }
}

TEST_CASE("exact enumeration refuses oversized trees") {
  const Environment tiger = tiger_environment();
  const AugmentedModel m = embed_pomdp(tiger.pomdp, 6);
  CHECK_THROWS_AS(js_divergence(m.chain(), chain_of(tiger.pomdp), 50, EvalMode::exact, 100, 0, 1000),
                  std::length_error);
}

TEST_CASE("expected reward of fixed door policies") {
  const Environment door = door_environment();
  const TabularController a(Policy::constant(2, door::kButtonA));
  const TabularController b(Policy::constant(2, door::kButtonB));
  CHECK(expected_reward(a, door.pomdp, EvalMode::exact).value == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(expected_reward(b, door.pomdp, EvalMode::exact).value == doctest::Approx(0.4).epsilon(1e-15));
  const Estimate mc = expected_reward(a, door.pomdp, EvalMode::monte_carlo, 4000, 8);
  CHECK(std::abs(mc.value - 0.6) <= 4.0 * mc.std_error);
  // a history-dependent controller takes the enumeration path
  Policy by_obs{PolicyKind::standard, Table::from_rows({{0.5, 0.5}, {0.5, 0.5}})};
  CHECK(expected_reward(TabularController(by_obs), door.pomdp, EvalMode::exact).value ==
        doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("welch test matches reference values") {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 3, 4, 5, 6};
  const WelchResult r = welch_t_test(a, b);
  CHECK(r.t == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(r.df == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.34659350708733416).epsilon(1e-10));

  const std::vector<double> c{1.0, 2.5, 2.9, 4.1}, d{3.2, 5.5, 4.4, 6.0, 7.1, 5.9};
  const WelchResult s = welch_t_test(c, d);
  CHECK(s.t == doctest::Approx(-3.2111645630623684).epsilon(1e-12));
  CHECK(s.df == doctest::Approx(6.9039).epsilon(1e-4));
  CHECK(s.p_value == doctest::Approx(0.015115668151532287).epsilon(1e-9));
  CHECK(welch_t_test(d, c).p_value == doctest::Approx(s.p_value).epsilon(1e-12));
}

TEST_CASE("degenerate samples are flagged") {
  const std::vector<double> flat{0.6, 0.6, 0.6}, other{0.4, 0.5, 0.6}, one{1.0};
  CHECK_THROWS_AS(welch_t_test(flat, other), DegenerateSample);
  CHECK_THROWS_AS(welch_t_test(one, other), DegenerateSample);
  CHECK(mean(other) == doctest::Approx(0.5));
  CHECK(standard_error(other) == doctest::Approx(0.1 / std::sqrt(3.0)));
  CHECK(standard_error(one) == 0.0);
}

TEST_CASE("evaluation modes parse") {
  CHECK(parse_eval_mode("exact") == EvalMode::exact);
  CHECK(parse_eval_mode("mc") == EvalMode::monte_carlo);
  CHECK_THROWS_AS(parse_eval_mode("approximate"), ValidationError);
}
