#include "winhalt/derandomize.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <unordered_map>
#include <utility>

namespace winhalt {

namespace {

// 4 bytes per entry puts this cap at ~256 MiB per table.
constexpr std::uint64_t kMaxTableEntries = 1ULL << 26;

}  // namespace

PolicyShape shape_of(const FragmentStats& stats) {
  return PolicyShape{stats.max_depth, stats.action_bound};
}

std::uint64_t shape_history_count(const PolicyShape& shape) {
  const std::uint64_t base =
      static_cast<std::uint64_t>(shape.label_bound) * shape.label_bound;
  std::uint64_t total = 0;
  std::uint64_t level = 1;
  for (std::uint32_t t = 0; t < shape.depth; ++t) {
    total += level;
    if (total > kMaxTableEntries)
      throw BudgetExceeded("policy table shape too large to materialize");
    if (t + 1 < shape.depth) {
      if (base != 0 && level > kMaxTableEntries / base)
        throw BudgetExceeded("policy table shape too large to materialize");
      level *= base;
    }
  }
  return total;
}

std::uint64_t shape_rank(const PolicyShape& shape, const History& h) {
  const std::uint64_t base =
      static_cast<std::uint64_t>(shape.label_bound) * shape.label_bound;
  std::uint64_t offset = 0;
  std::uint64_t level = 1;
  for (std::size_t t = 0; t < h.size(); ++t) {
    offset += level;
    level *= base;
  }
  std::uint64_t idx = 0;
  for (const auto& step : h) {
    idx = idx * base + static_cast<std::uint64_t>(step.action) * shape.label_bound +
          step.response.value;
  }
  return offset + idx;
}

std::uint32_t DeterministicPolicyTable::action_at(const History& h) const {
  if (h.size() >= shape.depth) return 0;
  for (const auto& step : h) {
    if (step.response.is_halt || step.action >= shape.label_bound ||
        step.response.value >= shape.label_bound)
      return 0;
  }
  return actions[shape_rank(shape, h)];
}

AgentBehavior DeterministicPolicyTable::as_agent() const {
  auto shared = std::make_shared<const DeterministicPolicyTable>(*this);
  return AgentBehavior::deterministic(
      [shared](const History& h) { return shared->action_at(h); });
}

nlohmann::json DeterministicPolicyTable::to_json() const {
  return nlohmann::json{{"depth", shape.depth},
                        {"label_bound", shape.label_bound},
                        {"actions", actions}};
}

DeterministicPolicyTable DeterministicPolicyTable::from_json(const nlohmann::json& j) {
  DeterministicPolicyTable t;
  t.shape.depth = j.at("depth").get<std::uint32_t>();
  t.shape.label_bound = j.at("label_bound").get<std::uint32_t>();
  t.actions = j.at("actions").get<std::vector<std::uint32_t>>();
  if (t.actions.size() != shape_history_count(t.shape))
    throw ConfigInvalid("policy table size does not match its shape");
  return t;
}

std::uint64_t DeterministicPolicyTable::hash() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto eat = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 0x100000001B3ULL;
    }
  };
  eat(shape.depth);
  eat(shape.label_bound);
  for (std::uint32_t a : actions) eat(a);
  return h;
}

std::uint64_t hoeffding_sample_count(std::uint32_t s, std::uint64_t d) {
  if (d < 1) throw ConfigInvalid("hoeffding_sample_count requires d >= 1");
  const std::uint32_t shift = 2 * s + 3;
  if (shift >= 64 || d > (std::uint64_t(-1) >> shift))
    throw Overflow("hoeffding sample count exceeds uint64 range");
  return d << shift;
}

double fail_bound(std::uint32_t s, std::uint64_t n) {
  return 2.0 * std::exp(-static_cast<double>(n) * std::ldexp(1.0, -2 * static_cast<int>(s) - 2));
}

DeterministicPolicyTable sample_policy(const AgentBehavior& agent, const PolicyShape& shape,
                                       std::uint64_t seed) {
  DeterministicPolicyTable table;
  table.shape = shape;
  table.actions.assign(shape_history_count(shape), 0);
  const std::uint64_t base =
      static_cast<std::uint64_t>(shape.label_bound) * shape.label_bound;
  SplitMix64 rng(seed);
  History h;
  h.reserve(shape.depth);
  std::uint64_t rank = 0;
  std::uint64_t level = 1;
  for (std::uint32_t t = 0; t < shape.depth; ++t) {
    for (std::uint64_t idx = 0; idx < level; ++idx, ++rank) {
      h.clear();
      if (t > 0) {
        // Decode the t digits of idx most-significant first.
        std::uint64_t scale = 1;
        for (std::uint32_t i = 1; i < t; ++i) scale *= base;
        std::uint64_t rem = idx;
        for (std::uint32_t i = 0; i < t; ++i) {
          const std::uint64_t digit = rem / scale;
          rem %= scale;
          if (i + 1 < t) scale /= base;
          h.push_back({static_cast<std::uint32_t>(digit / shape.label_bound),
                       Response::number(static_cast<std::uint32_t>(digit % shape.label_bound))});
        }
      }
      const ActionDistribution* d = agent.stationary.get();
      DistPtr keep;
      if (!d) {
        keep = agent.distribution_at(h);
        d = keep.get();
      }
      auto pick = d->sample(rng.next());
      table.actions[rank] = pick ? *pick : shape.label_bound;  // sink on freeze
    }
    level *= base;
  }
  return table;
}

namespace {

Rat table_weight_rec(const DeterministicPolicyTable& table,
                     const GameFragment::AgentNode& node) {
  const std::uint32_t chosen = table.action_at(node.history);
  for (const auto& ab : node.actions) {
    if (ab.action != chosen) continue;
    Rat under(0);
    for (const auto& rb : ab.responses) {
      if (rb.child) {
        Rat sub = table_weight_rec(table, *rb.child);
        if (sub != 0) under += rb.weight * sub;
      } else {
        under += rb.weight;
      }
    }
    return under;
  }
  return Rat(0);
}

}  // namespace

Rat table_fragment_weight(const DeterministicPolicyTable& table,
                          const GameFragment& fragment) {
  return table_weight_rec(table, fragment.root);
}

namespace {

struct DecisionNode {
  History history;
  std::vector<std::uint32_t> support_actions;
  std::vector<Rat> support_probs;
};

void collect_decision_nodes(const GameFragment::AgentNode& node, const AgentBehavior& agent,
                            std::vector<DecisionNode>& nodes,
                            std::unordered_map<const GameFragment::AgentNode*, std::size_t>& index) {
  DecisionNode dn;
  dn.history = node.history;
  DistPtr d = agent.distribution_at(node.history);
  for (const auto& e : d->entries) {
    if (e.prob == 0) continue;
    dn.support_actions.push_back(e.action);
    dn.support_probs.push_back(e.prob);
  }
  index[&node] = nodes.size();
  nodes.push_back(std::move(dn));
  for (const auto& ab : node.actions) {
    for (const auto& rb : ab.responses) {
      if (rb.child) collect_decision_nodes(*rb.child, agent, nodes, index);
    }
  }
}

struct OraclePath {
  std::vector<std::pair<std::size_t, std::uint32_t>> constraints;  // (node, action)
  Rat env_product;
};

void collect_oracle_paths(const GameFragment::AgentNode& node,
                          const std::unordered_map<const GameFragment::AgentNode*, std::size_t>& index,
                          std::vector<std::pair<std::size_t, std::uint32_t>>& prefix,
                          Rat env_product, std::vector<OraclePath>& out) {
  const std::size_t my_index = index.at(&node);
  for (const auto& ab : node.actions) {
    prefix.emplace_back(my_index, ab.action);
    for (const auto& rb : ab.responses) {
      if (rb.child) {
        collect_oracle_paths(*rb.child, index, prefix, env_product * rb.weight, out);
      } else {
        out.push_back({prefix, env_product * rb.weight});
      }
    }
    prefix.pop_back();
  }
}

}  // namespace

Rat expected_weight_oracle(const AgentBehavior& agent, const GameFragment& fragment,
                           std::uint64_t table_budget) {
  std::vector<DecisionNode> nodes;
  std::unordered_map<const GameFragment::AgentNode*, std::size_t> index;
  collect_decision_nodes(fragment.root, agent, nodes, index);

  BigInt table_count(1);
  for (const auto& dn : nodes) {
    if (dn.support_actions.empty()) return Rat(0);  // no table reaches a win
    table_count *= dn.support_actions.size();
    if (table_count > table_budget)
      throw BudgetExceeded("expected_weight_oracle table budget exceeded");
  }

  std::vector<OraclePath> paths;
  std::vector<std::pair<std::size_t, std::uint32_t>> prefix;
  collect_oracle_paths(fragment.root, index, prefix, Rat(1), paths);

  // Odometer over per-node support choices.
  std::vector<std::size_t> choice(nodes.size(), 0);
  Rat expectation(0);
  while (true) {
    Rat prob(1);
    for (std::size_t i = 0; i < nodes.size(); ++i) prob *= nodes[i].support_probs[choice[i]];
    Rat w(0);
    for (const auto& path : paths) {
      bool match = true;
      for (const auto& [ni, action] : path.constraints) {
        if (nodes[ni].support_actions[choice[ni]] != action) {
          match = false;
          break;
        }
      }
      if (match) w += path.env_product;
    }
    if (w != 0) expectation += prob * w;

    std::size_t i = 0;
    for (; i < nodes.size(); ++i) {
      if (++choice[i] < nodes[i].support_actions.size()) break;
      choice[i] = 0;
    }
    if (i == nodes.size()) break;
  }
  return expectation;
}

nlohmann::json DerandomizationReport::to_json() const {
  nlohmann::json samples = nlohmann::json::array();
  for (std::size_t i = 0; i < sample_weights.size(); ++i) {
    samples.push_back({{"id", i}, {"weight", rat_to_string(sample_weights[i])}});
  }
  nlohmann::json j{{"s", s},
                   {"d", d},
                   {"sample_count", sample_count},
                   {"shape", {{"depth", shape.depth}, {"label_bound", shape.label_bound}}},
                   {"threshold", rat_to_string(threshold)},
                   {"agent_weight", rat_to_string(agent_weight)},
                   {"empirical_max_weight", rat_to_string(empirical_max_weight)},
                   {"samples", std::move(samples)}};
  if (winner) {
    j["winner"] = *winner;
  } else {
    j["winner"] = nullptr;
  }
  return j;
}

DerandomizationReport derandomize(const AgentBehavior& agent, const EnvironmentBehavior& env,
                                  std::uint32_t s, std::uint64_t d, const GameConfig& cfg,
                                  std::uint64_t seed, int jobs,
                                  const ExtractOptions& extract_opts) {
  GameFragment fragment = extract_fragment(agent, env, s, cfg, extract_opts);
  const PolicyShape shape = shape_of(fragment_stats(fragment));

  DerandomizationReport report;
  report.s = s;
  report.d = d;
  report.sample_count = hoeffding_sample_count(s, d);
  report.shape = shape;
  report.threshold = pow2_inverse(s + 1);
  report.agent_weight = weight(agent, fragment);
  report.sample_weights.assign(report.sample_count, Rat(0));

  const std::int64_t n = static_cast<std::int64_t>(report.sample_count);
  if (jobs == 1) {
    for (std::int64_t i = 0; i < n; ++i) {
      DeterministicPolicyTable t =
          sample_policy(agent, shape, derive_seed(seed, static_cast<std::uint64_t>(i)));
      report.sample_weights[i] = table_fragment_weight(t, fragment);
    }
  } else {
#pragma omp parallel for schedule(dynamic, 16) \
    num_threads(jobs > 0 ? jobs : omp_get_max_threads())
    for (std::int64_t i = 0; i < n; ++i) {
      DeterministicPolicyTable t =
          sample_policy(agent, shape, derive_seed(seed, static_cast<std::uint64_t>(i)));
      report.sample_weights[i] = table_fragment_weight(t, fragment);
    }
  }

  report.empirical_max_weight = 0;
  for (std::size_t i = 0; i < report.sample_weights.size(); ++i) {
    const Rat& w = report.sample_weights[i];
    if (w > report.empirical_max_weight) report.empirical_max_weight = w;
    if (!report.winner && w > report.threshold) report.winner = i;
  }
  return report;
}

DeterministicPolicyTable rebuild_sampled_table(const AgentBehavior& agent,
                                               const PolicyShape& shape,
                                               std::uint64_t seed, std::uint64_t sample_id) {
  return sample_policy(agent, shape, derive_seed(seed, sample_id));
}

DerandomizationReport derandomize_escalating(const AgentBehavior& agent,
                                             const EnvironmentBehavior& env,
                                             std::uint32_t s, std::uint64_t initial_d,
                                             const GameConfig& cfg, std::uint64_t seed,
                                             std::uint32_t max_doublings, int jobs) {
  std::uint64_t d = initial_d;
  DerandomizationReport last;
  for (std::uint32_t attempt = 0; attempt <= max_doublings; ++attempt, d *= 2) {
    last = derandomize(agent, env, s, d, cfg, derive_seed(seed, attempt), jobs);
    if (last.winner) return last;
  }
  throw NoWinnerFound("no sampled table crossed 2^-(s+1) after " +
                      std::to_string(max_doublings) + " doublings; best weight " +
                      rat_to_string(last.empirical_max_weight));
}

AgentBehavior partial_derandomize(std::vector<DeterministicPolicyTable> tables) {
  if (tables.empty()) throw ConfigInvalid("partial_derandomize requires at least one table");
  for (const auto& t : tables) {
    if (!(t.shape == tables.front().shape))
      throw ShapeMismatch("policy tables do not share a common shape");
  }
  auto shared = std::make_shared<const std::vector<DeterministicPolicyTable>>(std::move(tables));
  return AgentBehavior::probabilistic([shared](const History& h) {
    std::vector<std::uint32_t> counts;  // per action, found lazily
    std::vector<std::uint32_t> actions;
    std::uint32_t consistent = 0;
    History prefix;
    prefix.reserve(h.size());
    for (const auto& table : *shared) {
      prefix.clear();
      bool ok = true;
      for (const auto& step : h) {
        if (table.action_at(prefix) != step.action) {
          ok = false;
          break;
        }
        prefix.push_back(step);
      }
      if (!ok) continue;
      ++consistent;
      const std::uint32_t a = table.action_at(h);
      auto it = std::find(actions.begin(), actions.end(), a);
      if (it == actions.end()) {
        actions.push_back(a);
        counts.push_back(1);
      } else {
        ++counts[static_cast<std::size_t>(it - actions.begin())];
      }
    }
    auto dist = std::make_shared<ActionDistribution>();
    if (consistent == 0) {
      dist->entries.push_back({0, Rat(1)});
    } else {
      std::vector<std::size_t> order(actions.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(),
                [&](std::size_t x, std::size_t y) { return actions[x] < actions[y]; });
      for (std::size_t i : order) {
        dist->entries.push_back({actions[i], Rat(counts[i], consistent)});
      }
    }
    dist->finalize();
    return DistPtr(dist);
  });
}

}  // namespace winhalt
