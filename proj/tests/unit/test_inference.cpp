#include <doctest.h>

#include <sstream>

#include "causal_pomdp/environments.hpp"
#include "causal_pomdp/inference.hpp"
#include "oracles.hpp"

using namespace causal_pomdp;

TEST_CASE("backdoor adjustment on the door bandit") {
  // confounder = light colour, outcome = door state after the press
  const std::vector<double> prior{0.6, 0.4};
  const Table cond = Table::from_rows({
      {0.0, 1.0}, // red, A -> open
      {1.0, 0.0}, // red, B -> closed
      {1.0, 0.0}, // green, A -> closed
      {0.0, 1.0}, // green, B -> open
  });
  const Table t = deconfound_bandit(prior, cond, 2);
  CHECK(std::abs(t(0, 1) - 0.6) <= 1e-12);
  CHECK(std::abs(t(1, 1) - 0.4) <= 1e-12);
  CHECK_THROWS_AS(deconfound_bandit(prior, Table(3, 2, 0.5), 2), ValidationError);
}

TEST_CASE("bound envelope for the noisy expert") {
  // p(A) = 0.7, p(open | A) = 0.54 / 0.7; p(B) = 0.3, p(open | B) = 0.8
  const std::vector<double> pa{0.7}, ta{0.54 / 0.7};
  const BoundEnvelope a = theorem1_bounds(pa, ta);
  CHECK(a.supported);
  CHECK(std::abs(a.lower - 0.54) <= 1e-9);
  CHECK(std::abs(a.upper - 0.84) <= 1e-9);
  const std::vector<double> pb{0.3}, tb{0.8};
  const BoundEnvelope b = theorem1_bounds(pb, tb);
  CHECK(std::abs(b.lower - 0.24) <= 1e-9);
  CHECK(std::abs(b.upper - 0.94) <= 1e-9);

  const std::vector<double> none{0.0}, any{0.5};
  const BoundEnvelope v = theorem1_bounds(none, any);
  CHECK_FALSE(v.supported);
  CHECK(v.lower == 0.0);
  CHECK(v.upper == 1.0);
  CHECK_THROWS_AS(theorem1_bounds(pa, std::vector<double>{}), ValidationError);
}

TEST_CASE("exact observational steps agree with the environment tables") {
  const auto [pomdp, sc] = make_door("noisy_good");
  const Episode tr{{door::kClosed, door::kOpen}, {door::kButtonA}, 1, 1.0};
  const ObservationalSteps s = exact_observational_steps(pomdp, sc.privileged_policy, tr);
  REQUIRE(s.supported);
  CHECK(s.policy[0] == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(s.transition[0] == doctest::Approx(0.54 / 0.7).epsilon(1e-14));

  const auto [pp, perfect] = make_door("perfect_good");
  const Episode unseen{{door::kClosed, door::kClosed}, {door::kButtonA}, 1, 1.0};
  const ObservationalSteps u = exact_observational_steps(pp, perfect.privileged_policy, unseen);
  CHECK(u.transition[0] == doctest::Approx(0.0));
}

TEST_CASE("empirical observational counts give frequencies") {
  RegimeDataset d{
      {{0, 1}, {0}, 0, 1.0}, {{0, 1}, {0}, 0, 1.0}, {{0, 0}, {0}, 0, 1.0},
      {{0, 1}, {1}, 0, 1.0}, {{0, 0}, {1}, 1, 5.0}, // regime 1 is ignored
  };
  const ObservationalCounts counts(d);
  CHECK(counts.count({0}) == 4.0);
  const ObservationalSteps s = counts.steps({{0, 1}, {0}, 1, 1.0});
  REQUIRE(s.supported);
  CHECK(s.policy[0] == doctest::Approx(0.75));
  CHECK(s.transition[0] == doctest::Approx(2.0 / 3.0));
  const ObservationalSteps none = counts.steps({{1, 1}, {0}, 1, 1.0});
  CHECK_FALSE(none.supported);
}

TEST_CASE("recovered transition equals path enumeration") {
  Rng rng(101);
  for (int trial = 0; trial < 30; ++trial) {
    const int z = 1 + static_cast<int>(rng.below(3)), o = 2 + static_cast<int>(rng.below(2)), a = 2;
    AugmentedModel m = random_model(z, o, a, rng, 3.0);
    Episode h;
    h.observations.push_back(static_cast<int>(rng.below(o)));
    const int len = static_cast<int>(rng.below(3));
    for (int t = 0; t < len; ++t) {
      h.actions.push_back(static_cast<int>(rng.below(a)));
      h.observations.push_back(static_cast<int>(rng.below(o)));
    }
    const History hist{h.observations, h.actions};
    for (int act = 0; act < a; ++act) {
      const auto q = recovered_transition(m, hist, act);
      const auto brute = oracle::recovered_transition(m, h, act);
      for (int k = 0; k < o; ++k) CHECK(q[k] == doctest::Approx(brute[k]).epsilon(1e-12));
    }
    const BeliefVector b = filter_belief(m, hist);
    CHECK(b.step == static_cast<std::size_t>(len));
  }
}

TEST_CASE("recovered products lie inside the envelope of the model's own regime") {
  // sound for any model: compare each interventional product with the bounds
  // computed from the same model's observational conditionals
  Rng rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    const AugmentedModel m = random_model(1 + static_cast<int>(rng.below(4)), 2, 2, rng, 5.0);
    auto reference = [&](const Episode& t) { return model_observational_steps(m, t); };
    for (int steps = 1; steps <= 2; ++steps)
      for (const BoundRow& r : bound_table(m, reference, steps)) {
        CHECK(r.estimate >= r.envelope.lower - 1e-12);
        CHECK(r.estimate <= r.envelope.upper + 1e-12);
      }
  }
}

TEST_CASE("the true door sits inside its exact envelopes") {
  const Environment env = door_environment();
  for (const auto& name : env.scenario_names()) {
    const Scenario sc = env.scenario(name);
    const AugmentedModel truth = embed_pomdp(env.pomdp, 4);
    auto reference = [&](const Episode& t) { return exact_observational_steps(env.pomdp, sc.privileged_policy, t); };
    for (const BoundRow& r : bound_table(truth, reference, 1)) {
      CHECK(r.estimate >= r.envelope.lower - 1e-12);
      CHECK(r.estimate <= r.envelope.upper + 1e-12);
    }
  }
}

TEST_CASE("bound report is a csv with one line per reachable cell") {
  const auto [pomdp, sc] = make_door("noisy_good");
  const AugmentedModel truth = embed_pomdp(pomdp, 4);
  auto reference = [&](const Episode& t) { return exact_observational_steps(pomdp, sc.privileged_policy, t); };
  const auto rows = bound_table(truth, reference, 1);
  CHECK(rows.size() == 4); // closed, {A, B} x {closed, open}
  std::ostringstream out;
  write_bound_report(rows, out);
  const std::string s = out.str();
  CHECK(s.rfind("cell,lower,upper,estimate,supported\n", 0) == 0);
  CHECK(s.find("o0 a0 o1,") != std::string::npos);
  CHECK(cell_key({{0, 1, 0}, {1, 0}, 1, 1.0}) == "o0 a1 o1 a0 o0");
}
