#pragma once

#include "winhalt/errors.hpp"
#include "winhalt/rational.hpp"
#include "winhalt/rng.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace winhalt {

// A Win/No-Halt game alternates agent actions (naturals) and environment
// responses (a natural or Halt); the agent wins exactly when the environment
// halts. Games are truncated at a finite horizon: no halt by then is NoWin.

struct Response {
  bool is_halt = false;
  std::uint32_t value = 0;  // meaningful iff !is_halt

  static Response halt() { return Response{true, 0}; }
  static Response number(std::uint32_t v) { return Response{false, v}; }

  friend bool operator==(const Response& a, const Response& b) {
    return a.is_halt == b.is_halt && (a.is_halt || a.value == b.value);
  }
};

struct HistoryStep {
  std::uint32_t action = 0;
  Response response;

  friend bool operator==(const HistoryStep& a, const HistoryStep& b) {
    return a.action == b.action && a.response == b.response;
  }
};

// One step per completed round; only the final step may hold a halt.
using History = std::vector<HistoryStep>;

using u128 = unsigned __int128;

// Sub-probability distribution over actions. Entries keep construction
// order; sampling walks the cumulative thresholds scaled by 2^64, so a
// uniform 64-bit draw r selects entry i iff cdf[i-1] <= r < cdf[i] and
// freezes iff r lands past the last threshold (the semi-agent deficit).
struct ActionDistribution {
  struct Entry {
    std::uint32_t action = 0;
    Rat prob;
  };

  std::vector<Entry> entries;
  Rat mass;                // sum of probs, cached by finalize()
  std::vector<u128> cdf;   // cumulative thresholds, scaled by 2^64

  // Validates (probs >= 0, distinct actions, mass <= 1) and builds the
  // sampling thresholds. Throws InvalidDistribution.
  void finalize();

  // nullopt = freeze (draw landed in the 1 - mass deficit).
  std::optional<std::uint32_t> sample(std::uint64_t r) const;

  const Rat& prob_of(std::uint32_t action) const;  // 0 if absent

  static ActionDistribution point(std::uint32_t action);
  static ActionDistribution uniform(std::uint32_t action_count);
};

using DistPtr = std::shared_ptr<const ActionDistribution>;

// Distribution over environment responses; must sum to exactly 1.
struct ResponseDistribution {
  struct Entry {
    Response response;
    Rat prob;
  };

  std::vector<Entry> entries;
  std::vector<u128> cdf;

  void finalize();  // validates sum == 1, distinct responses
  std::size_t sample(std::uint64_t r) const;
  Rat prob_of(const Response& resp) const;  // 0 if absent

  static ResponseDistribution point(const Response& resp);
};

using RespDistPtr = std::shared_ptr<const ResponseDistribution>;

struct AgentBehavior {
  enum class Kind { Deterministic, Probabilistic, Semi };

  Kind kind = Kind::Deterministic;
  std::function<std::uint32_t(const History&)> act;       // Deterministic
  std::function<DistPtr(const History&)> dist;            // Probabilistic/Semi
  // Set iff dist(h) is the same distribution at every history; lets the
  // sampling loops hoist the lookup out of the per-round path.
  DistPtr stationary;

  static AgentBehavior deterministic(std::function<std::uint32_t(const History&)> fn);
  static AgentBehavior probabilistic(std::function<DistPtr(const History&)> fn);
  static AgentBehavior semi(std::function<DistPtr(const History&)> fn);

  // History-independent behaviors.
  static AgentBehavior probabilistic_fixed(ActionDistribution d);
  static AgentBehavior semi_fixed(ActionDistribution d);

  // Plays each of {0, .., action_count-1} with probability 1/action_count.
  static AgentBehavior uniform(std::uint32_t action_count);
  static AgentBehavior constant(std::uint32_t action);

  // Unified view: a point mass for deterministic agents. Checks the mass
  // invariant of the kind (== 1 probabilistic, <= 1 semi).
  DistPtr distribution_at(const History& h) const;
};

struct EnvironmentBehavior {
  enum class Kind { Deterministic, Probabilistic };

  Kind kind = Kind::Deterministic;
  std::function<Response(const History&, std::uint32_t)> respond;
  std::function<RespDistPtr(const History&, std::uint32_t)> dist;

  static EnvironmentBehavior deterministic(
      std::function<Response(const History&, std::uint32_t)> fn);
  static EnvironmentBehavior probabilistic(
      std::function<RespDistPtr(const History&, std::uint32_t)> fn);

  static EnvironmentBehavior always_halt();
  static EnvironmentBehavior never_halt();
  // Halts iff the agent's action equals `target`; otherwise echoes the action.
  static EnvironmentBehavior halt_iff_action(std::uint32_t target);

  RespDistPtr distribution_at(const History& h, std::uint32_t action) const;
};

struct GameConfig {
  std::uint32_t horizon = 1;     // T >= 1
  std::uint32_t max_action = 1;  // actions and numeric responses live in [0, max_action)
  std::uint64_t master_seed = 0;

  void validate() const;
};

struct Outcome {
  bool win = false;
  std::uint32_t win_round = 0;  // 1-based; set iff win
  bool froze = false;           // semi-agent landed in its freeze deficit
  History transcript;

  friend bool operator==(const Outcome& a, const Outcome& b) {
    return a.win == b.win && a.win_round == b.win_round && a.froze == b.froze &&
           a.transcript == b.transcript;
  }
};

// One episode. Stochastic decisions consume one SplitMix64 draw each, agent
// first then environment within a round; identical seeds replay identically.
Outcome play(const AgentBehavior& agent, const EnvironmentBehavior& env,
             const GameConfig& cfg, std::uint64_t seed);

struct ExactOptions {
  std::uint64_t node_budget = 20'000'000;
};

// Exact probability that env halts by the horizon, by full expansion of all
// stochastic branches. Throws BudgetExceeded past opts.node_budget nodes.
Rat exact_win_prob(const AgentBehavior& agent, const EnvironmentBehavior& env,
                   const GameConfig& cfg, const ExactOptions& opts = {});

struct McResult {
  double estimate = 0.0;
  double ci_halfwidth = 0.0;  // 95% normal-approximation interval
  std::uint64_t wins = 0;
  std::uint64_t freezes = 0;
  std::uint64_t trials = 0;
};

// Serial reference implementation, kept for testing the parallel kernel.
McResult mc_win_prob_serial(const AgentBehavior& agent, const EnvironmentBehavior& env,
                            const GameConfig& cfg, std::uint64_t trials);

// OpenMP over trials; per-trial seeds derive_seed(cfg.master_seed, i), win
// counts merge by summation, so results match the serial reference exactly.
// jobs = 0 uses the OpenMP default; jobs = 1 runs the serial reference.
McResult mc_win_prob(const AgentBehavior& agent, const EnvironmentBehavior& env,
                     const GameConfig& cfg, std::uint64_t trials, int jobs = 0);

// Checks the semi-agent path-monotonicity inequality on every history chain
// up to `depth` with actions/responses below the given bounds: the mass of
// successor actions after (a, e) never exceeds the mass assigned to a.
bool semi_monotone(const AgentBehavior& agent, std::uint32_t action_bound,
                   std::uint32_t response_bound, std::uint32_t depth);

}  // namespace winhalt
