#include "winhalt/fragments.hpp"

#include <algorithm>
#include <utility>

namespace winhalt {

namespace {

using Path = GameFragment::Path;

void collect_paths(const GameFragment::AgentNode& node, Path& prefix,
                   std::vector<Path>& out) {
  for (const auto& ab : node.actions) {
    for (const auto& rb : ab.responses) {
      prefix.push_back({ab.action, rb.response, rb.weight});
      if (rb.child) {
        collect_paths(*rb.child, prefix, out);
      } else {
        out.push_back(prefix);
      }
      prefix.pop_back();
    }
  }
}

bool response_order_ok(const std::vector<GameFragment::ResponseBranch>& rs) {
  for (std::size_t i = 1; i < rs.size(); ++i) {
    const auto& a = rs[i - 1].response;
    const auto& b = rs[i].response;
    if (b.is_halt) return false;  // halt sorts first
    if (!a.is_halt && a.value >= b.value) return false;
  }
  return true;
}

bool node_well_formed(const GameFragment::AgentNode& node, const History& expect,
                      std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (node.history != expect) return fail("stored history mismatch");
  for (std::size_t i = 1; i < node.actions.size(); ++i) {
    if (node.actions[i - 1].action >= node.actions[i].action)
      return fail("action branches not strictly ascending");
  }
  for (const auto& ab : node.actions) {
    if (ab.responses.empty()) return fail("action branch with no responses");
    if (!response_order_ok(ab.responses)) return fail("response branches out of order");
    Rat sibling_sum(0);
    for (const auto& rb : ab.responses) {
      if (rb.weight < 0 || rb.weight > 1) return fail("edge weight outside [0,1]");
      sibling_sum += rb.weight;
      if (rb.response.is_halt != (rb.child == nullptr))
        return fail("halt edges and leaves must coincide");
      if (rb.child) {
        History h = expect;
        h.push_back({ab.action, rb.response});
        if (!node_well_formed(*rb.child, h, why)) return false;
        if (rb.child->actions.empty()) return fail("interior node with no actions");
      }
    }
    if (sibling_sum > 1) return fail("sibling response weights exceed 1");
  }
  return true;
}

}  // namespace

std::vector<Path> GameFragment::paths() const {
  std::vector<Path> out;
  Path prefix;
  collect_paths(root, prefix, out);
  return out;
}

std::uint64_t GameFragment::path_count() const {
  std::uint64_t n = 0;
  Path prefix;
  std::vector<Path> all;
  collect_paths(root, prefix, all);
  n = all.size();
  return n;
}

bool GameFragment::well_formed(std::string* why) const {
  if (!root.history.empty()) {
    if (why) *why = "root history not empty";
    return false;
  }
  History empty;
  return node_well_formed(root, empty, why);
}

namespace {

nlohmann::json node_to_json(const GameFragment::AgentNode& node) {
  nlohmann::json actions = nlohmann::json::array();
  for (const auto& ab : node.actions) {
    nlohmann::json responses = nlohmann::json::array();
    for (const auto& rb : ab.responses) {
      nlohmann::json r;
      if (rb.response.is_halt) {
        r["response"] = "halt";
      } else {
        r["response"] = rb.response.value;
      }
      r["weight"] = rat_to_string(rb.weight);
      if (rb.child) r["child"] = node_to_json(*rb.child);
      responses.push_back(std::move(r));
    }
    actions.push_back({{"action", ab.action}, {"responses", std::move(responses)}});
  }
  return nlohmann::json{{"actions", std::move(actions)}};
}

GameFragment::AgentNode node_from_json(const nlohmann::json& j, const History& h) {
  GameFragment::AgentNode node;
  node.history = h;
  for (const auto& aj : j.at("actions")) {
    GameFragment::ActionBranch ab;
    ab.action = aj.at("action").get<std::uint32_t>();
    for (const auto& rj : aj.at("responses")) {
      GameFragment::ResponseBranch rb;
      if (rj.at("response").is_string()) {
        if (rj.at("response").get<std::string>() != "halt")
          throw ConfigInvalid("fragment response must be a number or \"halt\"");
        rb.response = Response::halt();
      } else {
        rb.response = Response::number(rj.at("response").get<std::uint32_t>());
      }
      rb.weight = rat_from_string(rj.at("weight").get<std::string>());
      if (rj.contains("child")) {
        History ch = h;
        ch.push_back({ab.action, rb.response});
        rb.child = std::make_unique<GameFragment::AgentNode>(
            node_from_json(rj.at("child"), ch));
      }
      ab.responses.push_back(std::move(rb));
    }
    node.actions.push_back(std::move(ab));
  }
  return node;
}

}  // namespace

nlohmann::json GameFragment::to_json() const { return node_to_json(root); }

GameFragment GameFragment::from_json(const nlohmann::json& j) {
  GameFragment f;
  f.root = node_from_json(j, History{});
  std::string why;
  if (!f.well_formed(&why)) throw ConfigInvalid("fragment JSON not well formed: " + why);
  return f;
}

namespace {

void stats_rec(const GameFragment::AgentNode& node, std::uint32_t depth,
               FragmentStats& st) {
  for (const auto& ab : node.actions) {
    st.action_bound = std::max(st.action_bound, ab.action + 1);
    for (const auto& rb : ab.responses) {
      if (!rb.response.is_halt)
        st.action_bound = std::max(st.action_bound, rb.response.value + 1);
      st.max_depth = std::max(st.max_depth, depth + 1);
      if (rb.child) {
        stats_rec(*rb.child, depth + 1, st);
      } else {
        ++st.path_count;
      }
    }
  }
}

}  // namespace

FragmentStats fragment_stats(const GameFragment& fragment) {
  FragmentStats st;
  stats_rec(fragment.root, 0, st);
  return st;
}

namespace {

Rat weight_rec(const AgentBehavior& agent, const GameFragment::AgentNode& node,
               bool& undefined) {
  DistPtr d = agent.distribution_at(node.history);
  Rat total(0);
  for (const auto& ab : node.actions) {
    const Rat& pa = d->prob_of(ab.action);
    if (pa == 0) {
      bool mentioned = false;
      for (const auto& e : d->entries) {
        if (e.action == ab.action) {
          mentioned = true;
          break;
        }
      }
      if (!mentioned) undefined = true;
      continue;
    }
    Rat under(0);
    for (const auto& rb : ab.responses) {
      if (rb.child) {
        Rat sub = weight_rec(agent, *rb.child, undefined);
        if (sub != 0) under += rb.weight * sub;
      } else {
        under += rb.weight;
      }
    }
    total += pa * under;
  }
  return total;
}

}  // namespace

WeightResult weight_detailed(const AgentBehavior& agent, const GameFragment& fragment) {
  WeightResult r;
  r.undefined_action = false;
  r.value = weight_rec(agent, fragment.root, r.undefined_action);
  return r;
}

Rat weight(const AgentBehavior& agent, const GameFragment& fragment) {
  return weight_detailed(agent, fragment).value;
}

namespace {

struct WinPath {
  GameFragment::Path steps;
  Rat prob;  // full path probability under (agent, env)
};

void enumerate_win_paths(const AgentBehavior& agent, const EnvironmentBehavior& env,
                         const GameConfig& cfg, const ExtractOptions& opts,
                         History& h, GameFragment::Path& steps, const Rat& prefix,
                         std::uint32_t depth, std::uint64_t& nodes,
                         std::vector<WinPath>& out) {
  if (depth == cfg.horizon) return;
  DistPtr ad = agent.distribution_at(h);
  // Lexicographic order: ascending actions, halt first among responses,
  // then ascending numeric responses. Entries may arrive unordered from the
  // behavior, so sort indices.
  std::vector<std::size_t> aidx(ad->entries.size());
  for (std::size_t i = 0; i < aidx.size(); ++i) aidx[i] = i;
  std::sort(aidx.begin(), aidx.end(), [&](std::size_t x, std::size_t y) {
    return ad->entries[x].action < ad->entries[y].action;
  });
  for (std::size_t ai : aidx) {
    const auto& ae = ad->entries[ai];
    if (ae.prob == 0) continue;
    RespDistPtr rd = env.distribution_at(h, ae.action);
    std::vector<std::size_t> ridx(rd->entries.size());
    for (std::size_t i = 0; i < ridx.size(); ++i) ridx[i] = i;
    std::sort(ridx.begin(), ridx.end(), [&](std::size_t x, std::size_t y) {
      const auto& rx = rd->entries[x].response;
      const auto& ry = rd->entries[y].response;
      if (rx.is_halt != ry.is_halt) return rx.is_halt;
      return rx.value < ry.value;
    });
    for (std::size_t ri : ridx) {
      const auto& re = rd->entries[ri];
      if (re.prob == 0) continue;
      if (++nodes > opts.node_budget)
        throw BudgetExceeded("extract_fragment node budget exceeded");
      steps.push_back({ae.action, re.response, re.prob});
      const Rat p = prefix * ae.prob * re.prob;
      if (re.response.is_halt) {
        out.push_back({steps, p});
      } else {
        h.push_back({ae.action, re.response});
        enumerate_win_paths(agent, env, cfg, opts, h, steps, p, depth + 1, nodes, out);
        h.pop_back();
      }
      steps.pop_back();
    }
  }
}

void insert_path(GameFragment::AgentNode& node, const GameFragment::Path& path,
                 std::size_t i, const History& h) {
  const auto& step = path[i];
  auto ait = std::find_if(node.actions.begin(), node.actions.end(),
                          [&](const auto& ab) { return ab.action >= step.action; });
  if (ait == node.actions.end() || ait->action != step.action) {
    GameFragment::ActionBranch ab;
    ab.action = step.action;
    ait = node.actions.insert(ait, std::move(ab));
  }
  auto& responses = ait->responses;
  auto rit = std::find_if(responses.begin(), responses.end(), [&](const auto& rb) {
    if (step.response.is_halt) return true;  // halt sorts first
    if (rb.response.is_halt) return false;
    return rb.response.value >= step.response.value;
  });
  if (rit == responses.end() || !(rit->response == step.response)) {
    GameFragment::ResponseBranch rb;
    rb.response = step.response;
    rb.weight = step.env_weight;
    if (!step.response.is_halt) {
      rb.child = std::make_unique<GameFragment::AgentNode>();
      rb.child->history = h;
      rb.child->history.push_back({step.action, step.response});
    }
    rit = responses.insert(rit, std::move(rb));
  }
  if (i + 1 < path.size()) {
    insert_path(*rit->child, path, i + 1, rit->child->history);
  }
}

}  // namespace

GameFragment extract_fragment(const AgentBehavior& agent, const EnvironmentBehavior& env,
                              std::uint32_t s, const GameConfig& cfg,
                              const ExtractOptions& opts) {
  cfg.validate();
  std::vector<WinPath> paths;
  History h;
  GameFragment::Path steps;
  std::uint64_t nodes = 0;
  enumerate_win_paths(agent, env, cfg, opts, h, steps, Rat(1), 0, nodes, paths);

  // Shortest-win-first; the depth-first enumeration above already emits
  // lexicographic order within each depth, so a stable sort keeps it.
  std::stable_sort(paths.begin(), paths.end(), [](const WinPath& a, const WinPath& b) {
    return a.steps.size() < b.steps.size();
  });

  const Rat threshold = pow2_inverse(s);
  Rat cumulative(0);
  std::size_t take = 0;
  for (; take < paths.size(); ++take) {
    cumulative += paths[take].prob;
    if (cumulative > threshold) {
      ++take;
      break;
    }
  }
  if (cumulative <= threshold)
    throw InsufficientMass("total winning mass " + rat_to_string(cumulative) +
                           " within horizon does not exceed 2^-" + std::to_string(s));

  GameFragment fragment;
  for (std::size_t i = 0; i < take; ++i) {
    insert_path(fragment.root, paths[i].steps, 0, fragment.root.history);
  }
  return fragment;
}

namespace {

bool validate_rec(const GameFragment::AgentNode& node, const EnvironmentBehavior& env) {
  for (const auto& ab : node.actions) {
    RespDistPtr rd = env.distribution_at(node.history, ab.action);
    for (const auto& rb : ab.responses) {
      const Rat p = rd->prob_of(rb.response);
      if (p == 0 || rb.weight > p) return false;
      if (rb.child && !validate_rec(*rb.child, env)) return false;
    }
  }
  return true;
}

}  // namespace

bool validate_fragment(const GameFragment& fragment, const EnvironmentBehavior& env) {
  if (!fragment.well_formed(nullptr)) return false;
  return validate_rec(fragment.root, env);
}

}  // namespace winhalt
