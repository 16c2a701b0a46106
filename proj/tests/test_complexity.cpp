#include "winhalt/complexity.hpp"

#include "doctest.h"
#include "test_util.hpp"

#include <set>
#include <string>
#include <vector>

using namespace winhalt;

namespace {

// Independent oracle: every bit string up to max_bits, kept iff it decodes
// completely with a single terminal HALT_TOP.
std::vector<std::string> oracle_enumerate(std::uint32_t max_bits) {
  std::vector<std::string> out;
  for (std::uint32_t len = 1; len <= max_bits; ++len) {
    for (std::uint64_t x = 0; x < (1ULL << len); ++x) {
      std::string bits(len, '0');
      for (std::uint32_t i = 0; i < len; ++i) {
        if ((x >> (len - 1 - i)) & 1) bits[i] = '1';
      }
      try {
        AgentProgram p = decode_program(bits);
        if (p.complete) out.push_back(bits);
      } catch (const Error&) {
      }
    }
  }
  return out;
}

// The echo environment: round-1 response is action+1 mod max_action; round 2
// halts iff the action equals that response.
EnvironmentBehavior echo_env(std::uint32_t max_action) {
  return EnvironmentBehavior::deterministic(
      [max_action](const History& h, std::uint32_t a) {
        if (h.empty()) return Response::number((a + 1) % max_action);
        return a == h.back().response.value ? Response::halt()
                                            : Response::number((a + 1) % max_action);
      });
}

}  // namespace

TEST_SUITE("complexity") {

TEST_CASE("decode_program: table-driven examples") {
  CHECK_THROWS_AS(decode_program(""), TruncatedCode);
  CHECK_THROWS_AS(decode_program("0001"), TruncatedCode);
  CHECK_THROWS_AS(decode_program("111"), TruncatedCode);

  AgentProgram p = decode_program("0001111111");
  REQUIRE(p.code.size() == 2);
  CHECK(p.code[0].op == Opcode::Const);
  CHECK(p.code[0].arg == 7);
  CHECK(p.code[1].op == Opcode::HaltTop);
  CHECK(p.bit_length == 10);
  CHECK(p.complete);
  CHECK(p.mnemonics() == "CONST(7) HALT_TOP");
  CHECK(p.to_bits() == "0001111111");

  AgentProgram q = decode_program("011111");
  REQUIRE(q.code.size() == 2);
  CHECK(q.code[0].op == Opcode::LastResponse);
  CHECK(q.code[1].op == Opcode::HaltTop);
  CHECK(q.bit_length == 6);
  CHECK(q.complete);

  AgentProgram dup = decode_program("1110");
  CHECK(dup.code.size() == 1);
  CHECK_FALSE(dup.complete);
}

TEST_CASE("run_program: stack semantics") {
  const AgentProgram const7 = decode_program("0001111111");
  CHECK(run_program(const7, {}, 16) == 7);

  const AgentProgram echo = decode_program("011111");
  History h{{3, Response::number(5)}};
  CHECK(run_program(echo, h, 16) == 5);
  CHECK(run_program(echo, {}, 16) == 0);  // no history yet

  const AgentProgram dup = decode_program("1110");
  CHECK_FALSE(run_program(dup, {}, 16).has_value());  // underflow then no HALT_TOP

  const AgentProgram turn = decode_program("1001111");  // TURN_INDEX HALT_TOP
  CHECK(run_program(turn, {}, 16) == 0);
  CHECK(run_program(turn, h, 16) == 1);

  // CONST(9) CONST(8) ADD_MOD HALT_TOP with max_action 16 gives 1.
  const AgentProgram add = decode_program("001001" "001000" "101" "1111");
  CHECK(run_program(add, {}, 16) == 1);

  // Fuel exhaustion freezes.
  CHECK_FALSE(run_program(add, {}, 16, 2).has_value());
}

TEST_CASE("program encodings round trip") {
  for (const AgentProgram& p : enumerate_programs(12)) {
    AgentProgram q = decode_program(p.to_bits());
    CHECK(q == p);
    CHECK(q.complete);
  }
}

TEST_CASE("prefix-free: no valid code prefixes another, exhaustive to 14 bits") {
  std::vector<std::string> valid = oracle_enumerate(14);
  std::set<std::string> set(valid.begin(), valid.end());
  for (const std::string& code : valid) {
    for (std::size_t cut = 1; cut < code.size(); ++cut) {
      CHECK(set.count(code.substr(0, cut)) == 0);
    }
  }
}

TEST_CASE("enumeration matches the string oracle and is (length, lex) ordered") {
  std::vector<std::string> oracle = oracle_enumerate(14);
  std::vector<AgentProgram> ours = enumerate_programs(14);
  REQUIRE(ours.size() == oracle.size());
  for (std::size_t i = 0; i < ours.size(); ++i) {
    CHECK(ours[i].to_bits() == oracle[i]);
  }
  for (std::size_t i = 1; i < ours.size(); ++i) {
    const std::string a = ours[i - 1].to_bits();
    const std::string b = ours[i].to_bits();
    CHECK((a.size() < b.size() || (a.size() == b.size() && a < b)));
  }
}

TEST_CASE("min_winning_description: constant and echo benchmarks") {
  GameConfig cfg{2, 16, 0};
  auto found = min_winning_description(EnvironmentBehavior::halt_iff_action(7), cfg, 12,
                                       Rat(0));
  REQUIRE(found.has_value());
  CHECK(found->bits == 10);
  CHECK(found->program.mnemonics() == "CONST(7) HALT_TOP");

  auto echo = min_winning_description(echo_env(16), cfg, 12, Rat(0));
  REQUIRE(echo.has_value());
  CHECK(echo->bits == 6);
  CHECK(echo->program.mnemonics() == "LAST_RESPONSE HALT_TOP");

  GameConfig never{2, 4, 0};
  CHECK_FALSE(min_winning_description(EnvironmentBehavior::never_halt(), never, 10, Rat(0))
                  .has_value());
}

TEST_CASE("min_winning_description: agrees with brute-force search over raw strings") {
  std::vector<EnvironmentBehavior> envs;
  envs.push_back(EnvironmentBehavior::halt_iff_action(7));
  envs.push_back(EnvironmentBehavior::halt_iff_action(0));
  envs.push_back(echo_env(16));
  envs.push_back(EnvironmentBehavior::always_halt());
  GameConfig cfg{2, 16, 0};
  for (const auto& env : envs) {
    auto ours = min_winning_description(env, cfg, 11, Rat(0));
    // Oracle: scan raw strings shortest first.
    std::optional<std::uint32_t> oracle_bits;
    for (const std::string& bits : oracle_enumerate(11)) {
      AgentProgram p = decode_program(bits);
      if (exact_win_prob(program_agent(p, cfg.max_action), env, cfg) > 0) {
        if (!oracle_bits || bits.size() < *oracle_bits)
          oracle_bits = static_cast<std::uint32_t>(bits.size());
      }
    }
    REQUIRE(ours.has_value() == oracle_bits.has_value());
    if (ours) CHECK(ours->bits == *oracle_bits);
  }
}

TEST_CASE("min_winning_description: parallel matches serial") {
  GameConfig cfg{2, 16, 0};
  auto serial = min_winning_description(echo_env(16), cfg, 12, Rat(0),
                                        AgentSpace::all(), kDefaultFuel, 1);
  auto parallel = min_winning_description(echo_env(16), cfg, 12, Rat(0),
                                          AgentSpace::all(), kDefaultFuel, 0);
  REQUIRE(serial.has_value());
  REQUIRE(parallel.has_value());
  CHECK(serial->program == parallel->program);
}

TEST_CASE("min_winning_description: agent spaces restrict the search") {
  GameConfig cfg{2, 16, 0};
  // Exclude every program shorter than 8 bits.
  auto space = AgentSpace::filtered(
      [](const AgentProgram& p) { return p.bit_length >= 8; });
  auto found = min_winning_description(echo_env(16), cfg, 12, Rat(0), space);
  REQUIRE(found.has_value());
  CHECK(found->bits >= 8);

  auto only = AgentSpace::enumerated({"0001111111"});
  auto constant = min_winning_description(EnvironmentBehavior::halt_iff_action(7), cfg,
                                          12, Rat(0), only);
  REQUIRE(constant.has_value());
  CHECK(constant->program.to_bits() == "0001111111");

  CHECK_THROWS_AS(AgentSpace::enumerated({"011111", "011111"}), ConfigInvalid);
}

TEST_CASE("xi_proxy: empty mass, winner counting, and budget monotonicity") {
  GameConfig cfg{2, 16, 0};
  XiReport dead = xi_proxy(EnvironmentBehavior::never_halt(), cfg, 10);
  CHECK(dead.mass == 0);
  CHECK_FALSE(dead.xi.has_value());

  // At budget 10 exactly the 10-bit winners contribute 2^-10 each.
  XiReport r = xi_proxy(EnvironmentBehavior::halt_iff_action(7), cfg, 10);
  REQUIRE(r.xi.has_value());
  std::size_t winners = r.contributions.size();
  CHECK(winners >= 1);
  for (const auto& c : r.contributions) {
    CHECK(c.program.bit_length == 10);
    CHECK(c.win_prob == Rat(1));
  }
  CHECK(r.mass == Rat(winners, 1024));
  // xi = 10 - floor(log2(#winners)) when all winners share length 10.
  std::uint32_t floor_log2 = 0;
  while ((std::size_t(2) << floor_log2) <= winners) ++floor_log2;
  CHECK(*r.xi == 10 - floor_log2);

  std::optional<std::uint32_t> prev;
  for (std::uint32_t budget : {10u, 11u, 12u, 13u, 14u}) {
    XiReport step = xi_proxy(EnvironmentBehavior::halt_iff_action(7), cfg, budget);
    REQUIRE(step.xi.has_value());
    if (prev) CHECK(*step.xi <= *prev);
    prev = step.xi;
  }
}

TEST_CASE("xi_proxy: parallel matches serial") {
  GameConfig cfg{2, 8, 0};
  XiReport serial = xi_proxy(EnvironmentBehavior::halt_iff_action(1), cfg, 12,
                             kDefaultFuel, 1);
  XiReport parallel = xi_proxy(EnvironmentBehavior::halt_iff_action(1), cfg, 12,
                               kDefaultFuel, 0);
  CHECK(serial.mass == parallel.mass);
  CHECK(serial.xi == parallel.xi);
  CHECK(serial.contributions.size() == parallel.contributions.size());
}

}  // TEST_SUITE
