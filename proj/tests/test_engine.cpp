#include "winhalt/engine.hpp"

#include "doctest.h"
#include "test_util.hpp"

#include <cmath>
#include <memory>

using namespace winhalt;
using namespace winhalt::testutil;

namespace {

AgentBehavior semi_half_on_zero() {
  auto d = std::make_shared<ActionDistribution>();
  d->entries.push_back({0, Rat(1, 2)});
  d->finalize();
  DistPtr shared = d;
  return AgentBehavior::semi([shared](const History&) { return shared; });
}

}  // namespace

TEST_SUITE("engine") {

TEST_CASE("play: always-halt env wins in round 1") {
  GameConfig cfg{5, 2, 0};
  Outcome o = play(AgentBehavior::uniform(2), EnvironmentBehavior::always_halt(), cfg, 123);
  CHECK(o.win);
  CHECK(o.win_round == 1);
  CHECK(o.transcript.size() == 1);
  CHECK(o.transcript.back().response.is_halt);
}

TEST_CASE("play: first-draw thresholds decide the two-outcome game") {
  GameConfig cfg{1, 2, 0};
  const AgentBehavior agent = AgentBehavior::uniform(2);
  const EnvironmentBehavior env = EnvironmentBehavior::halt_iff_action(0);
  // Find seeds on each side of the 1/2 threshold: first draw < 2^63 picks
  // action 0 (cdf order 0 then 1).
  std::uint64_t low_seed = 0, high_seed = 0;
  bool have_low = false, have_high = false;
  for (std::uint64_t s = 0; !(have_low && have_high); ++s) {
    SplitMix64 rng(s);
    if (rng.next() < (1ULL << 63)) {
      low_seed = s;
      have_low = true;
    } else {
      high_seed = s;
      have_high = true;
    }
  }
  Outcome lo = play(agent, env, cfg, low_seed);
  CHECK(lo.win);
  CHECK(lo.win_round == 1);
  Outcome hi = play(agent, env, cfg, high_seed);
  CHECK_FALSE(hi.win);
  CHECK(hi.transcript.size() == 1);
}

TEST_CASE("play: agent that never satisfies the halt predicate") {
  GameConfig cfg{5, 2, 0};
  Outcome o = play(AgentBehavior::constant(1), EnvironmentBehavior::halt_iff_action(0),
                   cfg, 7);
  CHECK_FALSE(o.win);
  CHECK_FALSE(o.froze);
  CHECK(o.transcript.size() == 5);
}

TEST_CASE("play: determinism across repeated replays") {
  for (std::uint64_t salt = 0; salt < 10; ++salt) {
    AgentBehavior agent = random_agent(salt, 3, salt % 2 == 0);
    EnvironmentBehavior env = random_env(salt + 100, 3);
    GameConfig cfg{4, 3, 0};
    Outcome a = play(agent, env, cfg, salt * 77 + 1);
    Outcome b = play(agent, env, cfg, salt * 77 + 1);
    CHECK(a == b);
  }
}

TEST_CASE("play: semi-agent freeze is reported") {
  GameConfig cfg{1, 1, 0};
  AgentBehavior agent = semi_half_on_zero();
  // Find a seed whose first draw lands in the deficit half.
  std::uint64_t seed = 0;
  while (true) {
    SplitMix64 rng(seed);
    if (rng.next() >= (1ULL << 63)) break;
    ++seed;
  }
  Outcome o = play(agent, EnvironmentBehavior::halt_iff_action(0), cfg, seed);
  CHECK_FALSE(o.win);
  CHECK(o.froze);
  CHECK(o.transcript.empty());
}

TEST_CASE("exact_win_prob: forced and derived values") {
  GameConfig cfg1{3, 2, 0};
  CHECK(exact_win_prob(AgentBehavior::uniform(2), EnvironmentBehavior::always_halt(),
                       cfg1) == Rat(1));

  GameConfig cfg2{2, 2, 0};
  // Oracle first: the 4 equal-weight depth-2 action paths, 3 contain a 0.
  Rat oracle = brute_force_win_prob(AgentBehavior::uniform(2),
                                    EnvironmentBehavior::halt_iff_action(0), cfg2);
  CHECK(oracle == Rat(3, 4));
  CHECK(exact_win_prob(AgentBehavior::uniform(2),
                       EnvironmentBehavior::halt_iff_action(0), cfg2) == Rat(3, 4));

  GameConfig cfg3{1, 1, 0};
  CHECK(exact_win_prob(semi_half_on_zero(), EnvironmentBehavior::halt_iff_action(0),
                       cfg3) == Rat(1, 2));
}

TEST_CASE("exact_win_prob: deterministic inputs give 0 or 1") {
  GameConfig cfg{3, 2, 0};
  CHECK(exact_win_prob(AgentBehavior::constant(0),
                       EnvironmentBehavior::halt_iff_action(0), cfg) == Rat(1));
  CHECK(exact_win_prob(AgentBehavior::constant(1),
                       EnvironmentBehavior::halt_iff_action(0), cfg) == Rat(0));
}

TEST_CASE("exact_win_prob: agrees with the brute-force oracle on random games") {
  for (std::uint64_t salt = 0; salt < 25; ++salt) {
    SplitMix64 pick(salt);
    const std::uint32_t max_action = 1 + pick.next() % 3;
    const std::uint32_t horizon = 1 + pick.next() % 3;
    AgentBehavior agent = random_agent(salt * 3 + 1, max_action, salt % 3 == 0);
    EnvironmentBehavior env = random_env(salt * 5 + 2, max_action);
    GameConfig cfg{horizon, max_action, 0};
    CHECK(exact_win_prob(agent, env, cfg) == brute_force_win_prob(agent, env, cfg));
  }
}

TEST_CASE("exact_win_prob: node budget is enforced") {
  GameConfig cfg{4, 3, 0};
  ExactOptions opts;
  opts.node_budget = 5;
  CHECK_THROWS_AS(exact_win_prob(random_agent(1, 3, false), random_env(2, 3), cfg, opts),
                  BudgetExceeded);
}

TEST_CASE("exact_win_prob: monotone nondecreasing in horizon") {
  for (std::uint64_t salt = 0; salt < 10; ++salt) {
    AgentBehavior agent = random_agent(salt, 2, false);
    EnvironmentBehavior env = random_env(salt + 40, 2);
    Rat prev(0);
    for (std::uint32_t h = 1; h <= 4; ++h) {
      GameConfig cfg{h, 2, 0};
      Rat cur = exact_win_prob(agent, env, cfg);
      CHECK(cur >= prev);
      prev = cur;
    }
  }
}

TEST_CASE("mc_win_prob: deterministic win game") {
  GameConfig cfg{2, 2, 99};
  McResult r = mc_win_prob(AgentBehavior::constant(0),
                           EnvironmentBehavior::halt_iff_action(0), cfg, 1000);
  CHECK(r.estimate == 1.0);
  CHECK(r.ci_halfwidth == 0.0);
}

TEST_CASE("mc_win_prob: tracks exact values on the coin game") {
  const AgentBehavior agent = AgentBehavior::uniform(2);
  const EnvironmentBehavior env = EnvironmentBehavior::halt_iff_action(0);
  GameConfig cfg1{1, 2, 2024};
  McResult r1 = mc_win_prob(agent, env, cfg1, 100000);
  CHECK(std::abs(r1.estimate - 0.5) < 0.01);
  GameConfig cfg2{2, 2, 2025};
  McResult r2 = mc_win_prob(agent, env, cfg2, 100000);
  CHECK(std::abs(r2.estimate - 0.75) < 0.01);
}

TEST_CASE("mc_win_prob: parallel kernel reproduces the serial reference") {
  AgentBehavior agent = random_agent(11, 3, true);
  EnvironmentBehavior env = random_env(12, 3);
  GameConfig cfg{4, 3, 321};
  McResult serial = mc_win_prob_serial(agent, env, cfg, 20000);
  McResult parallel = mc_win_prob(agent, env, cfg, 20000, 0);
  CHECK(serial.wins == parallel.wins);
  CHECK(serial.freezes == parallel.freezes);
  CHECK(serial.estimate == parallel.estimate);
}

TEST_CASE("mc_win_prob: exact/MC agreement on randomized small games") {
  for (std::uint64_t salt = 0; salt < 20; ++salt) {
    SplitMix64 pick(1000 + salt);
    const std::uint32_t max_action = 1 + pick.next() % 3;
    const std::uint32_t horizon = 1 + pick.next() % 4;
    AgentBehavior agent = random_agent(salt * 7 + 3, max_action, salt % 4 == 0);
    EnvironmentBehavior env = random_env(salt * 9 + 4, max_action);
    GameConfig cfg{horizon, max_action, 5000 + salt};
    const double exact = rat_to_double(exact_win_prob(agent, env, cfg));
    McResult mc = mc_win_prob(agent, env, cfg, 100000);
    CHECK(std::abs(mc.estimate - exact) < 0.02);
  }
}

TEST_CASE("distribution validation") {
  ActionDistribution d;
  d.entries.push_back({0, Rat(1, 2)});
  d.entries.push_back({0, Rat(1, 2)});
  CHECK_THROWS_AS(d.finalize(), InvalidDistribution);

  ActionDistribution e;
  e.entries.push_back({0, Rat(3, 4)});
  e.entries.push_back({1, Rat(1, 2)});
  CHECK_THROWS_AS(e.finalize(), InvalidDistribution);

  ActionDistribution f;
  f.entries.push_back({0, Rat(-1, 4)});
  CHECK_THROWS_AS(f.finalize(), InvalidDistribution);

  ResponseDistribution g;
  g.entries.push_back({Response::halt(), Rat(1, 2)});
  CHECK_THROWS_AS(g.finalize(), InvalidDistribution);

  // Probabilistic agent whose mass is below 1 is rejected at use.
  AgentBehavior bad = AgentBehavior::probabilistic([](const History&) {
    auto d = std::make_shared<ActionDistribution>();
    d->entries.push_back({0, Rat(1, 2)});
    d->finalize();
    return DistPtr(d);
  });
  GameConfig cfg{1, 1, 0};
  CHECK_THROWS_AS(play(bad, EnvironmentBehavior::always_halt(), cfg, 0),
                  InvalidDistribution);
}

TEST_CASE("semi_monotone: geometric-decay agent passes, growing agent fails") {
  // Mass (1/2)^(k+1) on action 0 along the all-zeros action path, nothing
  // elsewhere: successors sum to half the parent action mass.
  AgentBehavior shrinking = AgentBehavior::semi([](const History& h) {
    auto d = std::make_shared<ActionDistribution>();
    bool on_path = true;
    for (const auto& step : h) on_path = on_path && step.action == 0;
    if (on_path)
      d->entries.push_back({0, pow2_inverse(static_cast<std::uint32_t>(h.size()) + 1)});
    d->finalize();
    return DistPtr(d);
  });
  CHECK(semi_monotone(shrinking, 2, 2, 3));

  // Constant mass 1/2 at every depth violates the chain inequality.
  AgentBehavior constant_mass = AgentBehavior::semi([](const History&) {
    auto d = std::make_shared<ActionDistribution>();
    d->entries.push_back({0, Rat(1, 2)});
    d->entries.push_back({1, Rat(1, 4)});
    d->finalize();
    return DistPtr(d);
  });
  CHECK_FALSE(semi_monotone(constant_mass, 2, 2, 2));
}

}  // TEST_SUITE
