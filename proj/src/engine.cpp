#include "winhalt/engine.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

namespace winhalt {

namespace {

const Rat kZero(0);

// floor(c * 2^64) for c in [0, 1]; exact via big integers.
u128 scale_threshold(const Rat& c) {
  BigInt t = (boost::multiprecision::numerator(c) << 64) /
             boost::multiprecision::denominator(c);
  return t.convert_to<u128>();
}

}  // namespace

void ActionDistribution::finalize() {
  mass = 0;
  std::unordered_set<std::uint32_t> seen;
  for (const Entry& e : entries) {
    if (e.prob < 0) throw InvalidDistribution("negative action probability");
    if (!seen.insert(e.action).second)
      throw InvalidDistribution("duplicate action in distribution");
    mass += e.prob;
  }
  if (mass > 1) throw InvalidDistribution("action probabilities sum to more than 1");
  cdf.clear();
  cdf.reserve(entries.size());
  Rat cum = 0;
  for (const Entry& e : entries) {
    cum += e.prob;
    cdf.push_back(scale_threshold(cum));
  }
}

std::optional<std::uint32_t> ActionDistribution::sample(std::uint64_t r) const {
  const u128 x = r;
  for (std::size_t i = 0; i < cdf.size(); ++i) {
    if (x < cdf[i]) return entries[i].action;
  }
  return std::nullopt;
}

const Rat& ActionDistribution::prob_of(std::uint32_t action) const {
  for (const Entry& e : entries) {
    if (e.action == action) return e.prob;
  }
  return kZero;
}

ActionDistribution ActionDistribution::point(std::uint32_t action) {
  ActionDistribution d;
  d.entries.push_back({action, Rat(1)});
  d.finalize();
  return d;
}

ActionDistribution ActionDistribution::uniform(std::uint32_t action_count) {
  if (action_count == 0) throw InvalidDistribution("uniform over zero actions");
  ActionDistribution d;
  d.entries.reserve(action_count);
  for (std::uint32_t a = 0; a < action_count; ++a)
    d.entries.push_back({a, Rat(1, action_count)});
  d.finalize();
  return d;
}

void ResponseDistribution::finalize() {
  Rat mass = 0;
  bool halt_seen = false;
  std::unordered_set<std::uint32_t> values;
  for (const Entry& e : entries) {
    if (e.prob < 0) throw InvalidDistribution("negative response probability");
    if (e.response.is_halt) {
      if (halt_seen) throw InvalidDistribution("duplicate halt entry");
      halt_seen = true;
    } else if (!values.insert(e.response.value).second) {
      throw InvalidDistribution("duplicate response value");
    }
    mass += e.prob;
  }
  if (mass != 1)
    throw InvalidDistribution("response probabilities must sum to exactly 1");
  cdf.clear();
  cdf.reserve(entries.size());
  Rat cum = 0;
  for (const Entry& e : entries) {
    cum += e.prob;
    cdf.push_back(scale_threshold(cum));
  }
}

std::size_t ResponseDistribution::sample(std::uint64_t r) const {
  const u128 x = r;
  for (std::size_t i = 0; i + 1 < cdf.size(); ++i) {
    if (x < cdf[i]) return i;
  }
  return cdf.size() - 1;
}

Rat ResponseDistribution::prob_of(const Response& resp) const {
  for (const Entry& e : entries) {
    if (e.response == resp) return e.prob;
  }
  return Rat(0);
}

ResponseDistribution ResponseDistribution::point(const Response& resp) {
  ResponseDistribution d;
  d.entries.push_back({resp, Rat(1)});
  d.finalize();
  return d;
}

AgentBehavior AgentBehavior::deterministic(std::function<std::uint32_t(const History&)> fn) {
  AgentBehavior b;
  b.kind = Kind::Deterministic;
  b.act = std::move(fn);
  return b;
}

AgentBehavior AgentBehavior::probabilistic(std::function<DistPtr(const History&)> fn) {
  AgentBehavior b;
  b.kind = Kind::Probabilistic;
  b.dist = std::move(fn);
  return b;
}

AgentBehavior AgentBehavior::semi(std::function<DistPtr(const History&)> fn) {
  AgentBehavior b;
  b.kind = Kind::Semi;
  b.dist = std::move(fn);
  return b;
}

AgentBehavior AgentBehavior::probabilistic_fixed(ActionDistribution d) {
  auto shared = std::make_shared<const ActionDistribution>(std::move(d));
  AgentBehavior b = probabilistic([shared](const History&) { return shared; });
  b.stationary = shared;
  return b;
}

AgentBehavior AgentBehavior::semi_fixed(ActionDistribution d) {
  auto shared = std::make_shared<const ActionDistribution>(std::move(d));
  AgentBehavior b = semi([shared](const History&) { return shared; });
  b.stationary = shared;
  return b;
}

AgentBehavior AgentBehavior::uniform(std::uint32_t action_count) {
  return probabilistic_fixed(ActionDistribution::uniform(action_count));
}

AgentBehavior AgentBehavior::constant(std::uint32_t action) {
  return deterministic([action](const History&) { return action; });
}

DistPtr AgentBehavior::distribution_at(const History& h) const {
  if (kind == Kind::Deterministic)
    return std::make_shared<const ActionDistribution>(ActionDistribution::point(act(h)));
  DistPtr d = stationary ? stationary : dist(h);
  if (kind == Kind::Probabilistic && d->mass != 1)
    throw InvalidDistribution("probabilistic agent mass != 1");
  return d;
}

EnvironmentBehavior EnvironmentBehavior::deterministic(
    std::function<Response(const History&, std::uint32_t)> fn) {
  EnvironmentBehavior b;
  b.kind = Kind::Deterministic;
  b.respond = std::move(fn);
  return b;
}

EnvironmentBehavior EnvironmentBehavior::probabilistic(
    std::function<RespDistPtr(const History&, std::uint32_t)> fn) {
  EnvironmentBehavior b;
  b.kind = Kind::Probabilistic;
  b.dist = std::move(fn);
  return b;
}

EnvironmentBehavior EnvironmentBehavior::always_halt() {
  return deterministic([](const History&, std::uint32_t) { return Response::halt(); });
}

EnvironmentBehavior EnvironmentBehavior::never_halt() {
  return deterministic(
      [](const History&, std::uint32_t a) { return Response::number(a); });
}

EnvironmentBehavior EnvironmentBehavior::halt_iff_action(std::uint32_t target) {
  return deterministic([target](const History&, std::uint32_t a) {
    return a == target ? Response::halt() : Response::number(a);
  });
}

RespDistPtr EnvironmentBehavior::distribution_at(const History& h,
                                                 std::uint32_t action) const {
  if (kind == Kind::Deterministic)
    return std::make_shared<const ResponseDistribution>(
        ResponseDistribution::point(respond(h, action)));
  return dist(h, action);
}

void GameConfig::validate() const {
  if (horizon < 1) throw ConfigInvalid("horizon must be >= 1");
  if (max_action < 1) throw ConfigInvalid("max_action must be >= 1");
}

Outcome play(const AgentBehavior& agent, const EnvironmentBehavior& env,
             const GameConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SplitMix64 rng(seed);
  Outcome out;
  out.transcript.reserve(cfg.horizon);
  // History-independent agents skip the per-round lookup entirely.
  const ActionDistribution* fixed = agent.stationary.get();
  if (fixed && agent.kind == AgentBehavior::Kind::Probabilistic && fixed->mass != 1)
    throw InvalidDistribution("probabilistic agent mass != 1");
  for (std::uint32_t round = 1; round <= cfg.horizon; ++round) {
    std::uint32_t action;
    if (fixed) {
      auto pick = fixed->sample(rng.next());
      if (!pick) {
        out.froze = true;
        return out;
      }
      action = *pick;
    } else if (agent.kind == AgentBehavior::Kind::Deterministic) {
      action = agent.act(out.transcript);
    } else {
      DistPtr d = agent.dist(out.transcript);
      if (agent.kind == AgentBehavior::Kind::Probabilistic && d->mass != 1)
        throw InvalidDistribution("probabilistic agent mass != 1");
      auto pick = d->sample(rng.next());
      if (!pick) {
        out.froze = true;
        return out;
      }
      action = *pick;
    }
    Response resp;
    if (env.kind == EnvironmentBehavior::Kind::Deterministic) {
      resp = env.respond(out.transcript, action);
    } else {
      RespDistPtr d = env.dist(out.transcript, action);
      resp = d->entries[d->sample(rng.next())].response;
    }
    out.transcript.push_back({action, resp});
    if (resp.is_halt) {
      out.win = true;
      out.win_round = round;
      return out;
    }
  }
  return out;
}

namespace {

struct ExactState {
  const AgentBehavior& agent;
  const EnvironmentBehavior& env;
  const GameConfig& cfg;
  std::uint64_t budget;
  std::uint64_t nodes = 0;

  Rat go(History& h, std::uint32_t depth) {
    if (depth == cfg.horizon) return Rat(0);
    DistPtr ad = agent.distribution_at(h);
    Rat total(0);
    for (const auto& ae : ad->entries) {
      if (ae.prob == 0) continue;
      RespDistPtr rd = env.distribution_at(h, ae.action);
      for (const auto& re : rd->entries) {
        if (re.prob == 0) continue;
        if (++nodes > budget) throw BudgetExceeded("exact_win_prob node budget exceeded");
        if (re.response.is_halt) {
          total += ae.prob * re.prob;
        } else {
          h.push_back({ae.action, re.response});
          Rat sub = go(h, depth + 1);
          h.pop_back();
          if (sub != 0) total += ae.prob * re.prob * sub;
        }
      }
    }
    return total;
  }
};

McResult summarize(std::uint64_t wins, std::uint64_t freezes, std::uint64_t trials) {
  McResult r;
  r.wins = wins;
  r.freezes = freezes;
  r.trials = trials;
  r.estimate = trials ? static_cast<double>(wins) / static_cast<double>(trials) : 0.0;
  const double p = r.estimate;
  r.ci_halfwidth =
      trials ? 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(trials)) : 0.0;
  return r;
}

}  // namespace

Rat exact_win_prob(const AgentBehavior& agent, const EnvironmentBehavior& env,
                   const GameConfig& cfg, const ExactOptions& opts) {
  cfg.validate();
  ExactState st{agent, env, cfg, opts.node_budget};
  History h;
  h.reserve(cfg.horizon);
  return st.go(h, 0);
}

McResult mc_win_prob_serial(const AgentBehavior& agent, const EnvironmentBehavior& env,
                            const GameConfig& cfg, std::uint64_t trials) {
  if (trials < 1) throw ConfigInvalid("mc_win_prob requires trials >= 1");
  std::uint64_t wins = 0, freezes = 0;
  for (std::uint64_t i = 0; i < trials; ++i) {
    Outcome o = play(agent, env, cfg, derive_seed(cfg.master_seed, i));
    wins += o.win ? 1 : 0;
    freezes += o.froze ? 1 : 0;
  }
  return summarize(wins, freezes, trials);
}

McResult mc_win_prob(const AgentBehavior& agent, const EnvironmentBehavior& env,
                     const GameConfig& cfg, std::uint64_t trials, int jobs) {
  if (jobs == 1) return mc_win_prob_serial(agent, env, cfg, trials);
  if (trials < 1) throw ConfigInvalid("mc_win_prob requires trials >= 1");
  std::uint64_t wins = 0, freezes = 0;
  const std::int64_t n = static_cast<std::int64_t>(trials);
#pragma omp parallel for schedule(static) reduction(+ : wins, freezes) \
    num_threads(jobs > 0 ? jobs : omp_get_max_threads())
  for (std::int64_t i = 0; i < n; ++i) {
    Outcome o = play(agent, env, cfg, derive_seed(cfg.master_seed, static_cast<std::uint64_t>(i)));
    wins += o.win ? 1 : 0;
    freezes += o.froze ? 1 : 0;
  }
  return summarize(wins, freezes, trials);
}

namespace {

bool semi_monotone_rec(const AgentBehavior& agent, History& h, std::uint32_t action_bound,
                       std::uint32_t response_bound, std::uint32_t depth) {
  if (depth == 0) return true;
  DistPtr parent = agent.distribution_at(h);
  for (std::uint32_t a = 0; a < action_bound; ++a) {
    const Rat pa = parent->prob_of(a);
    for (std::uint32_t e = 0; e < response_bound; ++e) {
      h.push_back({a, Response::number(e)});
      DistPtr child = agent.distribution_at(h);
      const bool ok = child->mass <= pa &&
                      semi_monotone_rec(agent, h, action_bound, response_bound, depth - 1);
      h.pop_back();
      if (!ok) return false;
    }
  }
  return true;
}

}  // namespace

bool semi_monotone(const AgentBehavior& agent, std::uint32_t action_bound,
                   std::uint32_t response_bound, std::uint32_t depth) {
  History h;
  return semi_monotone_rec(agent, h, action_bound, response_bound, depth);
}

}  // namespace winhalt
