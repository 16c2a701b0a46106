#pragma once

#include "winhalt/engine.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace winhalt {

// ---------------------------------------------------------------------------
// Probability utilities
// ---------------------------------------------------------------------------

// P(Bin(n, 1/2) >= k), exact.
Rat binomial_upper_tail(std::uint32_t n, std::uint32_t k);

// P(N(0,1) > x) via erfc.
double normal_upper_tail(double x);

// Inverse of normal_upper_tail by bisection to 1e-12.
double normal_upper_quantile(double tail_mass);

// ---------------------------------------------------------------------------
// Minotaur's labyrinth
// ---------------------------------------------------------------------------

// Undirected connected multigraph; self-loops allowed and count twice toward
// degree, so the stationary weight deg(v)/2c stays exact.
struct Labyrinth {
  std::uint32_t room_count = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> corridors;
  std::uint32_t start = 0;
  std::uint32_t goal = 0;
  std::uint32_t turns = 0;  // N

  struct Door {
    std::uint32_t corridor = 0;
    std::uint32_t to = 0;
  };
  std::vector<std::vector<Door>> doors;  // built by build()

  // Populates doors and validates: rooms in range, at least one corridor,
  // connected. Throws ConfigInvalid.
  void build();

  std::uint32_t degree(std::uint32_t room) const {
    return static_cast<std::uint32_t>(doors[room].size());
  }
  std::uint32_t corridor_count() const {
    return static_cast<std::uint32_t>(corridors.size());
  }
  std::uint32_t goal_degree() const { return degree(goal); }
  std::uint32_t max_degree() const;
  bool is_bipartite() const;

  // Text format: optional '#' comment lines, then a "start goal turns"
  // header line, then one "u v" corridor per line.
  static Labyrinth parse(std::istream& in);
  std::string to_edge_list() const;

  static Labyrinth complete_graph(std::uint32_t rooms, std::uint32_t start,
                                  std::uint32_t goal, std::uint32_t turns);
  static Labyrinth path_graph(std::uint32_t rooms, std::uint32_t start,
                              std::uint32_t goal, std::uint32_t turns);
};

// Per-room door remapping chosen by the minotaur each round; a permutation
// maps the hero's stated door index to the door actually taken. Policies see
// the room, its door count, and the visible history only.
struct MinotaurPolicy {
  enum class Kind { Deterministic, Probabilistic };

  using Permutation = std::vector<std::uint32_t>;
  struct PermDist {
    std::vector<std::pair<Permutation, Rat>> entries;  // probs sum to 1
  };

  Kind kind = Kind::Deterministic;
  // Door-marginal shortcut: every door equally likely whatever the action
  // (true for the uniform policy by symmetry).
  bool uniform_doors = false;
  std::function<Permutation(std::uint32_t room, std::uint32_t degree, const History&)>
      permute;
  std::function<PermDist(std::uint32_t room, std::uint32_t degree, const History&)>
      permute_dist;

  static MinotaurPolicy identity();
  // Uniform over all degree! permutations of the current room's doors.
  static MinotaurPolicy uniform();
  static MinotaurPolicy deterministic(
      std::function<Permutation(std::uint32_t, std::uint32_t, const History&)> fn);
  static MinotaurPolicy probabilistic(
      std::function<PermDist(std::uint32_t, std::uint32_t, const History&)> fn);
};

// The labyrinth as a Win/No-Halt environment. Each round's response is the
// door count of the room the hero lands in; the environment halts at round
// `turns` iff the hero then occupies the goal (or on first arrival when
// halt_on_first_arrival is set). An action at or past the current door count
// forfeits: the response becomes 0 and the episode can no longer halt.
// Responses are the exact conditional distributions given the visible
// history, computed by belief filtering over rooms.
EnvironmentBehavior labyrinth_env(const Labyrinth& lab, const MinotaurPolicy& policy,
                                  bool halt_on_first_arrival = false);

GameConfig labyrinth_config(const Labyrinth& lab, std::uint64_t master_seed);

// Picks uniformly among the announced number of doors (degree of the start
// room before any response).
AgentBehavior uniform_hero(const Labyrinth& lab);

// deg(v) / 2c per room.
std::vector<Rat> stationary_distribution(const Labyrinth& lab);

// Exact distribution of the uniform random walk after t steps from start.
std::vector<Rat> walk_distribution(const Labyrinth& lab, std::uint32_t t);

// Total-variation distance between walk_distribution(t) and the stationary
// distribution. Throws Bipartite when the walk cannot converge.
double mixing_distance(const Labyrinth& lab, std::uint32_t t);

// ---------------------------------------------------------------------------
// Even-Odds
// ---------------------------------------------------------------------------

// N rounds; the environment commits a bit e from the history before seeing
// the agent's bit b; the agent scores +1 when e xor b = 1, else -1. The
// game halts (win) after round N iff the score reaches score_target.
struct EvenOddsSpec {
  std::uint32_t rounds = 1;
  std::int64_t score_target = 1;

  enum class Kind { Deterministic, Probabilistic };
  Kind kind = Kind::Deterministic;
  std::function<std::uint32_t(const History&)> choose_bit;  // deterministic
  std::function<Rat(const History&)> prob_one;              // probabilistic

  static std::int64_t default_target(std::uint32_t rounds);  // ceil(sqrt(N))

  static EvenOddsSpec deterministic(std::uint32_t rounds, std::int64_t target,
                                    std::function<std::uint32_t(const History&)> fn);
  static EvenOddsSpec probabilistic(std::uint32_t rounds, std::int64_t target,
                                    std::function<Rat(const History&)> fn);

  // Named deterministic strategies (also the CLI vocabulary).
  static EvenOddsSpec zeros(std::uint32_t rounds, std::int64_t target);
  static EvenOddsSpec ones(std::uint32_t rounds, std::int64_t target);
  static EvenOddsSpec alternating(std::uint32_t rounds, std::int64_t target);
  static EvenOddsSpec copy_last_action(std::uint32_t rounds, std::int64_t target);
  static EvenOddsSpec majority_of_actions(std::uint32_t rounds, std::int64_t target);
  // Fair-coin environment bits.
  static EvenOddsSpec coin(std::uint32_t rounds, std::int64_t target);
};

EnvironmentBehavior even_odds_env(const EvenOddsSpec& spec);
GameConfig even_odds_config(std::uint32_t rounds, std::uint64_t master_seed);

std::int64_t even_odds_score(const History& h);

// Exact P(final score >= target) for the uniform agent; strategy-independent,
// equal to the Rademacher-sum tail.
Rat even_odds_uniform_exact(std::uint32_t rounds, std::int64_t target);

// ---------------------------------------------------------------------------
// Zero-sum repeated games
// ---------------------------------------------------------------------------

struct StageGame {
  std::uint32_t n = 0;       // actions per player
  std::vector<Rat> payoff;   // row-major n*n, row player A's payoff

  const Rat& at(std::uint32_t a, std::uint32_t b) const { return payoff[a * n + b]; }

  static StageGame matching_pennies();
  static StageGame rock_paper_scissors();

  static StageGame from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct KappaResult {
  Rat sigma2;          // uniform-vs-uniform payoff variance, exact
  double kappa = 0.0;  // sigma * z with upper tail of N(0,1) beyond z = 1/3
};

// Throws DegenerateGame when the uniform-play payoff variance vanishes.
KappaResult kappa_constant(const StageGame& game);

// B plays `opponent` on the joint history of prior rounds only (its round-i
// distribution is computed before A's round-i action is consulted); each
// response is B's action. After round N the game halts iff A's cumulative
// payoff exceeds kappa * sqrt(N). Throws ActionOutOfRange on actions >= n.
EnvironmentBehavior repeated_zero_sum_env(const StageGame& game,
                                          const AgentBehavior& opponent,
                                          std::uint32_t rounds);

GameConfig zero_sum_config(const StageGame& game, std::uint32_t rounds,
                           std::uint64_t master_seed);

}  // namespace winhalt
