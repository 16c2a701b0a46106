#include "winhalt/derandomize.hpp"

#include "doctest.h"
#include "test_util.hpp"

#include <cmath>
#include <map>

using namespace winhalt;
using namespace winhalt::testutil;

namespace {

DeterministicPolicyTable constant_table(const PolicyShape& shape, std::uint32_t action) {
  DeterministicPolicyTable t;
  t.shape = shape;
  t.actions.assign(shape_history_count(shape), action);
  return t;
}

}  // namespace

TEST_SUITE("derandomize") {

TEST_CASE("hoeffding_sample_count matches d*2^(2s+3)") {
  CHECK(hoeffding_sample_count(0, 1) == 8);
  CHECK(hoeffding_sample_count(1, 1) == 32);
  CHECK(hoeffding_sample_count(2, 4) == 512);
  CHECK(fail_bound(2, 512) == doctest::Approx(2.0 * std::exp(-8.0)).epsilon(1e-12));
  CHECK(fail_bound(2, 512) == doctest::Approx(6.71e-4).epsilon(0.01));
  CHECK_THROWS_AS(hoeffding_sample_count(31, 1), Overflow);
  CHECK_THROWS_AS(hoeffding_sample_count(10, std::uint64_t(1) << 50), Overflow);
}

TEST_CASE("shape ranking is a bijection onto [0, count)") {
  PolicyShape shape{3, 2};
  const std::uint64_t count = shape_history_count(shape);
  CHECK(count == 1 + 4 + 16);
  std::vector<bool> seen(count, false);
  History h;
  auto visit = [&](auto&& self) -> void {
    const std::uint64_t r = shape_rank(shape, h);
    REQUIRE(r < count);
    CHECK_FALSE(seen[r]);
    seen[r] = true;
    if (h.size() + 1 < shape.depth) {
      for (std::uint32_t a = 0; a < shape.label_bound; ++a) {
        for (std::uint32_t e = 0; e < shape.label_bound; ++e) {
          h.push_back({a, Response::number(e)});
          self(self);
          h.pop_back();
        }
      }
    }
  };
  visit(visit);
}

TEST_CASE("sample_policy: deterministic agent yields its restriction for any seed") {
  PolicyShape shape{2, 2};
  auto agent = AgentBehavior::deterministic(
      [](const History& h) { return static_cast<std::uint32_t>(h.size() % 2); });
  DeterministicPolicyTable a = sample_policy(agent, shape, 1);
  DeterministicPolicyTable b = sample_policy(agent, shape, 999);
  CHECK(a.actions == b.actions);
  CHECK(a.action_at({}) == 0);
  History h{{0, Response::number(1)}};
  CHECK(a.action_at(h) == 1);
}

TEST_CASE("sample_policy: root draw frequency tracks the defining distribution") {
  PolicyShape shape{1, 2};
  AgentBehavior agent = AgentBehavior::uniform(2);
  int zeros = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    DeterministicPolicyTable t = sample_policy(agent, shape, seed);
    if (t.actions[0] == 0) ++zeros;
  }
  CHECK(std::abs(zeros / 10000.0 - 0.5) < 0.02);
}

TEST_CASE("sample_policy: three-history shape gives eight equiprobable tables") {
  // depth 3 with unit labels has exactly the histories [], [(0,0)], [(0,0),(0,0)].
  PolicyShape shape{3, 1};
  CHECK(shape_history_count(shape) == 3);
  AgentBehavior agent = AgentBehavior::uniform(2);
  std::map<std::vector<std::uint32_t>, int> counts;
  const int trials = 10000;
  for (int seed = 0; seed < trials; ++seed) {
    counts[sample_policy(agent, shape, static_cast<std::uint64_t>(seed)).actions]++;
  }
  REQUIRE(counts.size() == 8);
  double chi2 = 0.0;
  const double expected = trials / 8.0;
  for (const auto& [_, n] : counts) {
    chi2 += (n - expected) * (n - expected) / expected;
  }
  CHECK(chi2 < 18.475);  // chi-square df=7 at alpha = 0.01
}

TEST_CASE("sample_policy: semi-agent freeze draws map to the sink action") {
  PolicyShape shape{1, 1};
  auto d = std::make_shared<ActionDistribution>();
  d->entries.push_back({0, Rat(1, 2)});
  d->finalize();
  DistPtr shared = d;
  AgentBehavior semi = AgentBehavior::semi([shared](const History&) { return shared; });
  int sink = 0;
  for (std::uint64_t seed = 0; seed < 4000; ++seed) {
    DeterministicPolicyTable t = sample_policy(semi, shape, seed);
    if (t.actions[0] == shape.label_bound) ++sink;
  }
  CHECK(std::abs(sink / 4000.0 - 0.5) < 0.05);
}

TEST_CASE("expected_weight_oracle equals the direct weight") {
  GameConfig cfg{2, 2, 0};
  const AgentBehavior coin = AgentBehavior::uniform(2);
  const EnvironmentBehavior env = EnvironmentBehavior::halt_iff_action(0);
  GameFragment f = extract_fragment(coin, env, 1, cfg);

  SUBCASE("deterministic agent: single table") {
    const AgentBehavior det = AgentBehavior::constant(0);
    CHECK(expected_weight_oracle(det, f) == weight(det, f));
  }
  SUBCASE("coin agent on the 3/4 fragment") {
    CHECK(expected_weight_oracle(coin, f) == Rat(3, 4));
  }
  SUBCASE("identity holds on randomized pairs") {
    for (std::uint64_t salt = 0; salt < 20; ++salt) {
      AgentBehavior agent = random_agent(salt * 31 + 7, 2, salt % 4 == 0);
      EnvironmentBehavior renv = random_env(salt * 17 + 3, 2);
      GameConfig rcfg{3, 2, 0};
      const Rat win = exact_win_prob(agent, renv, rcfg);
      if (win == 0) continue;
      GameFragment rf = extract_fragment(agent, renv, ceil_neg_log2(win) + 1, rcfg);
      CHECK(expected_weight_oracle(agent, rf) == weight(agent, rf));
    }
  }
}

TEST_CASE("derandomize: coin agent vs halt-iff-0 finds a winner") {
  GameConfig cfg{2, 2, 0};
  DerandomizationReport r = derandomize(AgentBehavior::uniform(2),
                                        EnvironmentBehavior::halt_iff_action(0), 1, 4,
                                        cfg, 42);
  CHECK(r.sample_count == 128);
  REQUIRE(r.winner.has_value());
  CHECK(r.sample_weights[*r.winner] > Rat(1, 4));
  // Claim-1 chaining: the winner's exact win probability dominates its weight.
  DeterministicPolicyTable w = rebuild_sampled_table(AgentBehavior::uniform(2), r.shape,
                                                     42, *r.winner);
  GameFragment f = extract_fragment(AgentBehavior::uniform(2),
                                    EnvironmentBehavior::halt_iff_action(0), 1, cfg);
  const Rat fw = table_fragment_weight(w, f);
  CHECK(fw == r.sample_weights[*r.winner]);
  CHECK(exact_win_prob(w.as_agent(), EnvironmentBehavior::halt_iff_action(0), cfg) >= fw);
}

TEST_CASE("derandomize: deterministic winner wins immediately with weight 1") {
  GameConfig cfg{2, 2, 0};
  DerandomizationReport r = derandomize(AgentBehavior::constant(0),
                                        EnvironmentBehavior::halt_iff_action(0), 1, 1,
                                        cfg, 5);
  REQUIRE(r.winner.has_value());
  CHECK(*r.winner == 0);
  CHECK(r.sample_weights[0] == Rat(1));
}

TEST_CASE("derandomize: win probability exactly 2^-s is rejected") {
  GameConfig cfg{1, 2, 0};
  CHECK_THROWS_AS(derandomize(AgentBehavior::uniform(2),
                              EnvironmentBehavior::halt_iff_action(0), 1, 1, cfg, 0),
                  InsufficientMass);
}

TEST_CASE("derandomize: serial and parallel reports are identical") {
  GameConfig cfg{2, 2, 0};
  DerandomizationReport serial = derandomize(AgentBehavior::uniform(2),
                                             EnvironmentBehavior::halt_iff_action(0), 2,
                                             2, cfg, 7, /*jobs=*/1);
  DerandomizationReport parallel = derandomize(AgentBehavior::uniform(2),
                                               EnvironmentBehavior::halt_iff_action(0), 2,
                                               2, cfg, 7, /*jobs=*/0);
  CHECK(serial.sample_weights == parallel.sample_weights);
  CHECK(serial.winner == parallel.winner);
  CHECK(serial.empirical_max_weight == parallel.empirical_max_weight);
}

TEST_CASE("derandomize: empirical no-winner rate stays under the hoeffding bound") {
  GameConfig cfg{2, 2, 0};
  const std::uint32_t s = 1;
  const std::uint64_t d = 2;
  int failures = 0;
  const int runs = 200;
  for (int seed = 0; seed < runs; ++seed) {
    DerandomizationReport r = derandomize(AgentBehavior::uniform(2),
                                          EnvironmentBehavior::halt_iff_action(0), s, d,
                                          cfg, static_cast<std::uint64_t>(seed));
    if (!r.winner) ++failures;
  }
  const double bound = fail_bound(s, hoeffding_sample_count(s, d));
  const double slack = 3.0 * std::sqrt(runs * bound * (1.0 - bound));
  CHECK(failures <= runs * bound + slack);
}

TEST_CASE("partial_derandomize: single table reproduces its behavior") {
  PolicyShape shape{2, 2};
  DeterministicPolicyTable t = constant_table(shape, 1);
  AgentBehavior mix = partial_derandomize({t});
  History h;
  DistPtr d = mix.distribution_at(h);
  CHECK(d->entries.size() == 1);
  CHECK(d->entries[0].action == 1);
  CHECK(d->entries[0].prob == Rat(1));
}

TEST_CASE("partial_derandomize: two tables split the root evenly") {
  PolicyShape shape{1, 2};
  AgentBehavior mix =
      partial_derandomize({constant_table(shape, 0), constant_table(shape, 1)});
  DistPtr d = mix.distribution_at({});
  REQUIRE(d->entries.size() == 2);
  CHECK(d->entries[0].action == 0);
  CHECK(d->entries[0].prob == Rat(1, 2));
  CHECK(d->entries[1].prob == Rat(1, 2));

  // Mixture win probability is the average of member win probabilities.
  GameConfig cfg{1, 2, 0};
  const EnvironmentBehavior env = EnvironmentBehavior::halt_iff_action(0);
  CHECK(exact_win_prob(mix, env, cfg) == Rat(1, 2));
}

TEST_CASE("partial_derandomize: mixture identity on randomized table sets") {
  PolicyShape shape{2, 2};
  for (std::uint64_t salt = 0; salt < 12; ++salt) {
    SplitMix64 rng(salt * 101 + 9);
    const std::size_t table_count = 1 + rng.next() % 5;
    std::vector<DeterministicPolicyTable> tables;
    for (std::size_t i = 0; i < table_count; ++i) {
      DeterministicPolicyTable t;
      t.shape = shape;
      t.actions.resize(shape_history_count(shape));
      for (auto& a : t.actions) a = static_cast<std::uint32_t>(rng.next() % 2);
      tables.push_back(std::move(t));
    }
    EnvironmentBehavior env = random_env(salt * 55 + 2, 2);
    GameConfig cfg{2, 2, 0};
    Rat avg(0);
    for (const auto& t : tables) avg += exact_win_prob(t.as_agent(), env, cfg);
    avg /= static_cast<std::uint64_t>(tables.size());
    CHECK(exact_win_prob(partial_derandomize(tables), env, cfg) == avg);
  }
}

TEST_CASE("partial_derandomize: k of n winners against a deterministic env") {
  PolicyShape shape{1, 3};
  std::vector<DeterministicPolicyTable> tables{
      constant_table(shape, 0), constant_table(shape, 0), constant_table(shape, 1),
      constant_table(shape, 2)};
  GameConfig cfg{1, 3, 0};
  // Exactly two of four tables play the halting action.
  CHECK(exact_win_prob(partial_derandomize(tables),
                       EnvironmentBehavior::halt_iff_action(0), cfg) == Rat(2, 4));
}

TEST_CASE("partial_derandomize: mismatched shapes are rejected") {
  CHECK_THROWS_AS(
      partial_derandomize({constant_table(PolicyShape{1, 2}, 0),
                           constant_table(PolicyShape{2, 2}, 0)}),
      ShapeMismatch);
}

TEST_CASE("policy table json round trip and hashing") {
  PolicyShape shape{2, 2};
  DeterministicPolicyTable t = constant_table(shape, 1);
  DeterministicPolicyTable u = DeterministicPolicyTable::from_json(t.to_json());
  CHECK(u.actions == t.actions);
  CHECK(u.hash() == t.hash());
  u.actions[0] = 0;
  CHECK(u.hash() != t.hash());
}

}  // TEST_SUITE
