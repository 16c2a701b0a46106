#pragma once

#include "winhalt/engine.hpp"

// Single-header nlohmann/json from vendor/.
#include "json.hpp"

#include <memory>
#include <string>
#include <vector>

namespace winhalt {

// A game fragment is a finite tree of winning interactions. Agent-decision
// nodes fan out over actions; each action fans out over environment
// responses carrying rational weights bounded by the environment's true
// response probabilities. A halt response edge ends a path at a Win leaf
// (its child pointer is null).
struct GameFragment {
  struct AgentNode;

  struct ResponseBranch {
    Response response;
    Rat weight;
    std::unique_ptr<AgentNode> child;  // null iff response.is_halt
  };

  struct ActionBranch {
    std::uint32_t action = 0;
    std::vector<ResponseBranch> responses;
  };

  struct AgentNode {
    History history;  // stored explicitly so evaluation needs no re-simulation
    std::vector<ActionBranch> actions;
  };

  AgentNode root;  // root.history is empty

  struct PathStep {
    std::uint32_t action = 0;
    Response response;
    Rat env_weight;
  };
  using Path = std::vector<PathStep>;

  // Root-to-leaf paths in canonical (depth-first, branch-order) order.
  std::vector<Path> paths() const;
  std::uint64_t path_count() const;

  // Structural invariants: alternation with stored histories consistent,
  // sibling response weights in [0,1] summing to <= 1, every leaf reached by
  // a halt edge, branches canonically ordered (actions ascending; halt
  // before numeric responses, numeric ascending).
  bool well_formed(std::string* why = nullptr) const;

  nlohmann::json to_json() const;
  static GameFragment from_json(const nlohmann::json& j);
};

struct FragmentStats {
  std::uint64_t path_count = 0;
  std::uint32_t max_depth = 0;     // m: most rounds on any path
  std::uint32_t action_bound = 0;  // l: 1 + largest numeric label (action or response)
};

FragmentStats fragment_stats(const GameFragment& fragment);

struct WeightResult {
  Rat value;
  bool undefined_action = false;  // agent had no entry for some fragment action
};

// Weight(p, F): sum over root-to-leaf paths of the product of agent action
// probabilities and environment edge weights. Actions the agent does not
// mention contribute probability 0 and set the undefined_action flag.
WeightResult weight_detailed(const AgentBehavior& agent, const GameFragment& fragment);
Rat weight(const AgentBehavior& agent, const GameFragment& fragment);

struct ExtractOptions {
  std::uint64_t node_budget = 20'000'000;
};

// Builds a fragment of winning interactions with env whose weight under
// `agent` strictly exceeds 2^-s. Winning paths are accumulated shortest
// first, ties broken lexicographically; environment edges carry env's exact
// response probabilities. Throws InsufficientMass when the total winning
// mass within the horizon is <= 2^-s.
GameFragment extract_fragment(const AgentBehavior& agent, const EnvironmentBehavior& env,
                              std::uint32_t s, const GameConfig& cfg,
                              const ExtractOptions& opts = {});

// True iff every environment edge's weight is bounded by env's exact
// probability of that response at that history (and that probability is
// positive), and every leaf path ends in a halt under env.
bool validate_fragment(const GameFragment& fragment, const EnvironmentBehavior& env);

}  // namespace winhalt
