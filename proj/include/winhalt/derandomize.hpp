#pragma once

#include "winhalt/engine.hpp"
#include "winhalt/fragments.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace winhalt {

// Domain of a deterministic policy table: every history of fewer than
// `depth` rounds whose actions and numeric responses are below
// `label_bound`. Tables over this domain are what the sampler draws from
// the agent-induced product measure.
struct PolicyShape {
  std::uint32_t depth = 0;        // m
  std::uint32_t label_bound = 0;  // l

  friend bool operator==(const PolicyShape& a, const PolicyShape& b) {
    return a.depth == b.depth && a.label_bound == b.label_bound;
  }
};

PolicyShape shape_of(const FragmentStats& stats);

// Number of histories in the shape: sum over t < depth of (l^2)^t.
// Throws BudgetExceeded past the internal representability cap.
std::uint64_t shape_history_count(const PolicyShape& shape);

// Canonical rank of an in-shape history: histories ordered by (length,
// lexicographic digits), digit = action * l + response.
std::uint64_t shape_rank(const PolicyShape& shape, const History& h);

struct DeterministicPolicyTable {
  PolicyShape shape;
  std::vector<std::uint32_t> actions;  // indexed by shape_rank

  // Histories outside the shape (too deep, out-of-range labels, or halts)
  // fall back to action 0.
  std::uint32_t action_at(const History& h) const;

  AgentBehavior as_agent() const;

  // Canonical serialization (actions listed in shape-rank order).
  nlohmann::json to_json() const;
  static DeterministicPolicyTable from_json(const nlohmann::json& j);
  std::uint64_t hash() const;  // FNV-1a over the canonical serialization
};

// N = d * 2^(2s+3). Throws Overflow when the product leaves uint64 range.
std::uint64_t hoeffding_sample_count(std::uint32_t s, std::uint64_t d);

// Tail bound 2 * exp(-N * 2^(-2s-2)) on a sampled mean landing at or below
// half the fragment weight.
double fail_bound(std::uint32_t s, std::uint64_t n);

// Draws one action per in-shape history (rank order) from the agent's
// distribution there; a semi agent's freeze draws map to the sink action
// `shape.label_bound`, which never matches a fragment edge.
DeterministicPolicyTable sample_policy(const AgentBehavior& agent, const PolicyShape& shape,
                                       std::uint64_t seed);

// Weight of the table played deterministically against the fragment.
Rat table_fragment_weight(const DeterministicPolicyTable& table,
                          const GameFragment& fragment);

// Exact E_{g~P}[Weight(g, F)] by full enumeration of every policy table over
// the fragment's decision histories (the independent oracle for the
// expectation identity). Throws BudgetExceeded when the table count
// exceeds `table_budget`.
Rat expected_weight_oracle(const AgentBehavior& agent, const GameFragment& fragment,
                           std::uint64_t table_budget = 1'000'000);

struct DerandomizationReport {
  std::uint32_t s = 0;
  std::uint64_t d = 0;
  std::uint64_t sample_count = 0;  // N
  PolicyShape shape;
  Rat threshold;        // 2^-(s+1)
  Rat agent_weight;     // Weight(agent, F)
  Rat empirical_max_weight;
  std::vector<Rat> sample_weights;        // indexed by sample id
  std::optional<std::uint64_t> winner;    // first id whose weight > threshold

  nlohmann::json to_json() const;
};

// Extracts the fragment, draws N = hoeffding_sample_count(s, d) policy
// tables with per-sample seeds derive_seed(seed, i), and scores each against
// the fragment. Sample order is by id, so parallel and serial runs emit
// identical reports. jobs = 1 runs the serial reference loop.
DerandomizationReport derandomize(const AgentBehavior& agent, const EnvironmentBehavior& env,
                                  std::uint32_t s, std::uint64_t d, const GameConfig& cfg,
                                  std::uint64_t seed, int jobs = 0,
                                  const ExtractOptions& extract_opts = {});

// Rebuilds the table a report refers to (sampling is deterministic per seed).
DeterministicPolicyTable rebuild_sampled_table(const AgentBehavior& agent,
                                               const PolicyShape& shape,
                                               std::uint64_t seed, std::uint64_t sample_id);

// Doubles d until a winner appears; throws NoWinnerFound after max_doublings.
DerandomizationReport derandomize_escalating(const AgentBehavior& agent,
                                             const EnvironmentBehavior& env,
                                             std::uint32_t s, std::uint64_t initial_d,
                                             const GameConfig& cfg, std::uint64_t seed,
                                             std::uint32_t max_doublings = 6, int jobs = 0);

// The n_a/m mixture: at history h, plays action a with probability
// (tables consistent with h choosing a) / (tables consistent with h);
// action 0 when no table is consistent. Throws ShapeMismatch.
AgentBehavior partial_derandomize(std::vector<DeterministicPolicyTable> tables);

}  // namespace winhalt
