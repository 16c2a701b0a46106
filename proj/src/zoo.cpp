#include "winhalt/zoo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <queue>
#include <sstream>

namespace winhalt {

// ---------------------------------------------------------------------------
// Probability utilities
// ---------------------------------------------------------------------------

Rat binomial_upper_tail(std::uint32_t n, std::uint32_t k) {
  if (k > n) return Rat(0);
  // C(n, k), then walk j -> j+1 multiplicatively.
  BigInt c = 1;
  for (std::uint32_t j = 0; j < k; ++j) {
    c = c * (n - j) / (j + 1);
  }
  BigInt sum = 0;
  for (std::uint32_t j = k; j <= n; ++j) {
    sum += c;
    if (j < n) c = c * (n - j) / (j + 1);
  }
  return Rat(sum, BigInt(1) << n);
}

double normal_upper_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double normal_upper_quantile(double tail_mass) {
  if (tail_mass <= 0.0 || tail_mass >= 1.0)
    throw ConfigInvalid("normal_upper_quantile needs tail mass in (0,1)");
  double lo = -40.0, hi = 40.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (normal_upper_tail(mid) > tail_mass) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Labyrinth
// ---------------------------------------------------------------------------

void Labyrinth::build() {
  if (room_count == 0) throw ConfigInvalid("labyrinth has no rooms");
  if (corridors.empty()) throw ConfigInvalid("labyrinth has no corridors");
  if (start >= room_count || goal >= room_count)
    throw ConfigInvalid("labyrinth start/goal out of range");
  doors.assign(room_count, {});
  for (std::uint32_t i = 0; i < corridors.size(); ++i) {
    const auto [u, v] = corridors[i];
    if (u >= room_count || v >= room_count)
      throw ConfigInvalid("corridor endpoint out of range");
    doors[u].push_back({i, v});
    doors[v].push_back({i, u});  // a self-loop contributes two doors
  }
  std::vector<bool> seen(room_count, false);
  std::queue<std::uint32_t> q;
  q.push(start);
  seen[start] = true;
  std::uint32_t reached = 1;
  while (!q.empty()) {
    const std::uint32_t r = q.front();
    q.pop();
    for (const Door& d : doors[r]) {
      if (!seen[d.to]) {
        seen[d.to] = true;
        ++reached;
        q.push(d.to);
      }
    }
  }
  if (reached != room_count) throw ConfigInvalid("labyrinth is not connected");
}

std::uint32_t Labyrinth::max_degree() const {
  std::uint32_t m = 0;
  for (const auto& ds : doors) m = std::max(m, static_cast<std::uint32_t>(ds.size()));
  return m;
}

bool Labyrinth::is_bipartite() const {
  for (const auto& [u, v] : corridors) {
    if (u == v) return false;
  }
  std::vector<int> color(room_count, -1);
  std::queue<std::uint32_t> q;
  color[start] = 0;
  q.push(start);
  while (!q.empty()) {
    const std::uint32_t r = q.front();
    q.pop();
    for (const Door& d : doors[r]) {
      if (color[d.to] == -1) {
        color[d.to] = 1 - color[r];
        q.push(d.to);
      } else if (color[d.to] == color[r]) {
        return false;
      }
    }
  }
  return true;
}

Labyrinth Labyrinth::parse(std::istream& in) {
  Labyrinth lab;
  std::string line;
  bool have_header = false;
  std::uint32_t max_room = 0;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    if (!have_header) {
      if (ls >> lab.start >> lab.goal >> lab.turns) have_header = true;
      continue;
    }
    std::uint32_t u, v;
    if (ls >> u >> v) {
      lab.corridors.emplace_back(u, v);
      max_room = std::max({max_room, u, v});
    }
  }
  if (!have_header) throw ConfigInvalid("labyrinth file missing 'start goal turns' header");
  lab.room_count = std::max({max_room + 1, lab.start + 1, lab.goal + 1});
  lab.build();
  return lab;
}

std::string Labyrinth::to_edge_list() const {
  std::ostringstream os;
  os << start << ' ' << goal << ' ' << turns << '\n';
  for (const auto& [u, v] : corridors) os << u << ' ' << v << '\n';
  return os.str();
}

Labyrinth Labyrinth::complete_graph(std::uint32_t rooms, std::uint32_t start,
                                    std::uint32_t goal, std::uint32_t turns) {
  Labyrinth lab;
  lab.room_count = rooms;
  lab.start = start;
  lab.goal = goal;
  lab.turns = turns;
  for (std::uint32_t u = 0; u < rooms; ++u) {
    for (std::uint32_t v = u + 1; v < rooms; ++v) lab.corridors.emplace_back(u, v);
  }
  lab.build();
  return lab;
}

Labyrinth Labyrinth::path_graph(std::uint32_t rooms, std::uint32_t start,
                                std::uint32_t goal, std::uint32_t turns) {
  Labyrinth lab;
  lab.room_count = rooms;
  lab.start = start;
  lab.goal = goal;
  lab.turns = turns;
  for (std::uint32_t u = 0; u + 1 < rooms; ++u) lab.corridors.emplace_back(u, u + 1);
  lab.build();
  return lab;
}

MinotaurPolicy MinotaurPolicy::identity() {
  return deterministic([](std::uint32_t, std::uint32_t degree, const History&) {
    Permutation p(degree);
    for (std::uint32_t i = 0; i < degree; ++i) p[i] = i;
    return p;
  });
}

MinotaurPolicy MinotaurPolicy::uniform() {
  MinotaurPolicy p =
      probabilistic([](std::uint32_t, std::uint32_t degree, const History&) {
        PermDist dist;
        Permutation perm(degree);
        for (std::uint32_t i = 0; i < degree; ++i) perm[i] = i;
        BigInt fact = 1;
        for (std::uint32_t i = 2; i <= degree; ++i) fact *= i;
        const Rat prob(BigInt(1), fact);
        do {
          dist.entries.emplace_back(perm, prob);
        } while (std::next_permutation(perm.begin(), perm.end()));
        return dist;
      });
  // The marginal of a uniformly random permutation sends any stated door to
  // each real door with probability 1/degree; the environment uses this
  // shortcut instead of expanding degree! entries.
  p.uniform_doors = true;
  return p;
}

MinotaurPolicy MinotaurPolicy::deterministic(
    std::function<Permutation(std::uint32_t, std::uint32_t, const History&)> fn) {
  MinotaurPolicy p;
  p.kind = Kind::Deterministic;
  p.permute = std::move(fn);
  return p;
}

MinotaurPolicy MinotaurPolicy::probabilistic(
    std::function<PermDist(std::uint32_t, std::uint32_t, const History&)> fn) {
  MinotaurPolicy p;
  p.kind = Kind::Probabilistic;
  p.permute_dist = std::move(fn);
  return p;
}

namespace {

struct Belief {
  std::vector<Rat> rooms;
  Rat forfeit;
};

// Door-choice marginal for `action` at `room`: marginal[j] = P(door j taken).
std::vector<Rat> door_marginal(const Labyrinth& lab, const MinotaurPolicy& policy,
                               std::uint32_t room, const History& h,
                               std::uint32_t action) {
  const std::uint32_t deg = lab.degree(room);
  std::vector<Rat> marginal(deg, Rat(0));
  if (policy.uniform_doors) {
    for (auto& m : marginal) m = Rat(1, deg);
    return marginal;
  }
  if (policy.kind == MinotaurPolicy::Kind::Deterministic) {
    MinotaurPolicy::Permutation perm = policy.permute(room, deg, h);
    if (perm.size() != deg) throw ConfigInvalid("minotaur permutation has wrong size");
    const std::uint32_t door = perm[action];
    if (door >= deg) throw ConfigInvalid("minotaur permutation maps outside doors");
    marginal[door] = 1;
    return marginal;
  }
  MinotaurPolicy::PermDist dist = policy.permute_dist(room, deg, h);
  Rat total(0);
  for (const auto& [perm, prob] : dist.entries) {
    if (perm.size() != deg) throw ConfigInvalid("minotaur permutation has wrong size");
    if (perm[action] >= deg) throw ConfigInvalid("minotaur permutation maps outside doors");
    marginal[perm[action]] += prob;
    total += prob;
  }
  if (total != 1) throw InvalidDistribution("minotaur permutation weights must sum to 1");
  return marginal;
}

struct LabyrinthModel {
  Labyrinth lab;
  MinotaurPolicy policy;
  bool halt_on_first_arrival = false;

  bool halts_at(std::uint32_t round) const {
    return halt_on_first_arrival || round == lab.turns;
  }

  // Pushes belief through the hero's move; forfeit mass is absorbing.
  Belief propagate(const Belief& b, const History& h, std::uint32_t action) const {
    Belief out;
    out.rooms.assign(lab.room_count, Rat(0));
    out.forfeit = b.forfeit;
    for (std::uint32_t r = 0; r < lab.room_count; ++r) {
      if (b.rooms[r] == 0) continue;
      if (action >= lab.degree(r)) {
        out.forfeit += b.rooms[r];
        continue;
      }
      std::vector<Rat> marginal = door_marginal(lab, policy, r, h, action);
      for (std::uint32_t j = 0; j < marginal.size(); ++j) {
        if (marginal[j] == 0) continue;
        out.rooms[lab.doors[r][j].to] += b.rooms[r] * marginal[j];
      }
    }
    return out;
  }

  // Conditional-on-history belief; the hero starts at `start` and each past
  // step conditions on the announced door count (0 = forfeited).
  Belief replay(const History& h) const {
    Belief b;
    b.rooms.assign(lab.room_count, Rat(0));
    b.rooms[lab.start] = 1;
    b.forfeit = 0;
    History prefix;
    prefix.reserve(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
      const auto& step = h[i];
      Belief moved = propagate(b, prefix, step.action);
      const std::uint32_t round = static_cast<std::uint32_t>(i) + 1;
      const std::uint32_t e = step.response.value;
      Belief next;
      next.rooms.assign(lab.room_count, Rat(0));
      next.forfeit = 0;
      Rat mass(0);
      if (e == 0) {
        mass = moved.forfeit;
        next.forfeit = 1;
      } else {
        for (std::uint32_t r = 0; r < lab.room_count; ++r) {
          if (moved.rooms[r] == 0 || lab.degree(r) != e) continue;
          if (halts_at(round) && r == lab.goal) continue;  // that branch halted
          mass += moved.rooms[r];
        }
        if (mass != 0) {
          for (std::uint32_t r = 0; r < lab.room_count; ++r) {
            if (moved.rooms[r] == 0 || lab.degree(r) != e) continue;
            if (halts_at(round) && r == lab.goal) continue;
            next.rooms[r] = moved.rooms[r] / mass;
          }
        }
      }
      if (mass == 0) throw Error("labyrinth: impossible history");
      b = std::move(next);
      prefix.push_back(step);
    }
    return b;
  }

  RespDistPtr response(const History& h, std::uint32_t action) const {
    auto d = std::make_shared<ResponseDistribution>();
    if (lab.turns == 0) {
      d->entries.push_back({lab.start == lab.goal ? Response::halt() : Response::number(0),
                            Rat(1)});
      d->finalize();
      return d;
    }
    const Belief b = replay(h);
    const Belief moved = propagate(b, h, action);
    const std::uint32_t round = static_cast<std::uint32_t>(h.size()) + 1;
    Rat halt_mass(0);
    std::vector<Rat> by_count;  // announcement value -> mass
    by_count.assign(lab.max_degree() + 1, Rat(0));
    by_count[0] = moved.forfeit;
    for (std::uint32_t r = 0; r < lab.room_count; ++r) {
      if (moved.rooms[r] == 0) continue;
      if (halts_at(round) && r == lab.goal) {
        halt_mass += moved.rooms[r];
      } else {
        by_count[lab.degree(r)] += moved.rooms[r];
      }
    }
    if (halt_mass != 0) d->entries.push_back({Response::halt(), halt_mass});
    for (std::uint32_t e = 0; e < by_count.size(); ++e) {
      if (by_count[e] != 0) d->entries.push_back({Response::number(e), by_count[e]});
    }
    d->finalize();
    return d;
  }
};

}  // namespace

EnvironmentBehavior labyrinth_env(const Labyrinth& lab, const MinotaurPolicy& policy,
                                  bool halt_on_first_arrival) {
  auto model = std::make_shared<const LabyrinthModel>(
      LabyrinthModel{lab, policy, halt_on_first_arrival});
  return EnvironmentBehavior::probabilistic(
      [model](const History& h, std::uint32_t action) { return model->response(h, action); });
}

GameConfig labyrinth_config(const Labyrinth& lab, std::uint64_t master_seed) {
  GameConfig cfg;
  cfg.horizon = std::max<std::uint32_t>(1, lab.turns);
  cfg.max_action = lab.max_degree() + 1;
  cfg.master_seed = master_seed;
  return cfg;
}

AgentBehavior uniform_hero(const Labyrinth& lab) {
  const std::uint32_t start_degree = lab.degree(lab.start);
  auto cache = std::make_shared<std::vector<DistPtr>>();
  cache->resize(lab.max_degree() + 2);
  for (std::uint32_t e = 0; e < cache->size(); ++e) {
    (*cache)[e] = std::make_shared<const ActionDistribution>(
        e == 0 ? ActionDistribution::point(0) : ActionDistribution::uniform(e));
  }
  return AgentBehavior::probabilistic([cache, start_degree](const History& h) -> DistPtr {
    const std::uint32_t e = h.empty() ? start_degree : h.back().response.value;
    if (e < cache->size()) return (*cache)[e];
    return std::make_shared<const ActionDistribution>(ActionDistribution::uniform(e));
  });
}

std::vector<Rat> stationary_distribution(const Labyrinth& lab) {
  std::vector<Rat> pi(lab.room_count);
  const std::uint32_t twice_c = 2 * lab.corridor_count();
  for (std::uint32_t r = 0; r < lab.room_count; ++r) {
    pi[r] = Rat(lab.degree(r), twice_c);
  }
  return pi;
}

std::vector<Rat> walk_distribution(const Labyrinth& lab, std::uint32_t t) {
  std::vector<Rat> dist(lab.room_count, Rat(0));
  dist[lab.start] = 1;
  for (std::uint32_t step = 0; step < t; ++step) {
    std::vector<Rat> next(lab.room_count, Rat(0));
    for (std::uint32_t r = 0; r < lab.room_count; ++r) {
      if (dist[r] == 0) continue;
      const Rat share = dist[r] / lab.degree(r);
      for (const auto& door : lab.doors[r]) next[door.to] += share;
    }
    dist = std::move(next);
  }
  return dist;
}

double mixing_distance(const Labyrinth& lab, std::uint32_t t) {
  if (lab.is_bipartite())
    throw Bipartite("bipartite labyrinth: the uniform walk does not converge");
  const std::vector<Rat> walk = walk_distribution(lab, t);
  const std::vector<Rat> pi = stationary_distribution(lab);
  Rat tv(0);
  for (std::uint32_t r = 0; r < lab.room_count; ++r) {
    tv += abs(walk[r] - pi[r]);
  }
  tv /= 2;
  return rat_to_double(tv);
}

// ---------------------------------------------------------------------------
// Even-Odds
// ---------------------------------------------------------------------------

std::int64_t EvenOddsSpec::default_target(std::uint32_t rounds) {
  return static_cast<std::int64_t>(std::ceil(std::sqrt(static_cast<double>(rounds))));
}

EvenOddsSpec EvenOddsSpec::deterministic(std::uint32_t rounds, std::int64_t target,
                                         std::function<std::uint32_t(const History&)> fn) {
  EvenOddsSpec s;
  s.rounds = rounds;
  s.score_target = target;
  s.kind = Kind::Deterministic;
  s.choose_bit = std::move(fn);
  return s;
}

EvenOddsSpec EvenOddsSpec::probabilistic(std::uint32_t rounds, std::int64_t target,
                                         std::function<Rat(const History&)> fn) {
  EvenOddsSpec s;
  s.rounds = rounds;
  s.score_target = target;
  s.kind = Kind::Probabilistic;
  s.prob_one = std::move(fn);
  return s;
}

EvenOddsSpec EvenOddsSpec::zeros(std::uint32_t rounds, std::int64_t target) {
  return deterministic(rounds, target, [](const History&) { return 0u; });
}

EvenOddsSpec EvenOddsSpec::ones(std::uint32_t rounds, std::int64_t target) {
  return deterministic(rounds, target, [](const History&) { return 1u; });
}

EvenOddsSpec EvenOddsSpec::alternating(std::uint32_t rounds, std::int64_t target) {
  return deterministic(rounds, target, [](const History& h) {
    return static_cast<std::uint32_t>(h.size() % 2);
  });
}

EvenOddsSpec EvenOddsSpec::copy_last_action(std::uint32_t rounds, std::int64_t target) {
  return deterministic(rounds, target, [](const History& h) {
    return h.empty() ? 0u : (h.back().action & 1u);
  });
}

EvenOddsSpec EvenOddsSpec::majority_of_actions(std::uint32_t rounds, std::int64_t target) {
  return deterministic(rounds, target, [](const History& h) {
    std::int64_t balance = 0;
    for (const auto& step : h) balance += (step.action & 1u) ? 1 : -1;
    return balance > 0 ? 1u : 0u;
  });
}

EvenOddsSpec EvenOddsSpec::coin(std::uint32_t rounds, std::int64_t target) {
  return probabilistic(rounds, target, [](const History&) { return Rat(1, 2); });
}

std::int64_t even_odds_score(const History& h) {
  std::int64_t score = 0;
  for (const auto& step : h) {
    score += ((step.action ^ step.response.value) & 1u) ? 1 : -1;
  }
  return score;
}

EnvironmentBehavior even_odds_env(const EvenOddsSpec& spec) {
  auto shared = std::make_shared<const EvenOddsSpec>(spec);
  if (spec.kind == EvenOddsSpec::Kind::Deterministic) {
    return EnvironmentBehavior::deterministic(
        [shared](const History& h, std::uint32_t b) {
          const std::uint32_t e = shared->choose_bit(h) & 1u;
          const std::uint32_t round = static_cast<std::uint32_t>(h.size()) + 1;
          if (round < shared->rounds) return Response::number(e);
          const std::int64_t score =
              even_odds_score(h) + (((e ^ b) & 1u) ? 1 : -1);
          return score >= shared->score_target ? Response::halt() : Response::number(e);
        });
  }
  return EnvironmentBehavior::probabilistic(
      [shared](const History& h, std::uint32_t b) {
        const Rat p1 = shared->prob_one(h);
        if (p1 < 0 || p1 > 1) throw InvalidDistribution("even-odds bit probability");
        const std::uint32_t round = static_cast<std::uint32_t>(h.size()) + 1;
        auto d = std::make_shared<ResponseDistribution>();
        if (round < shared->rounds) {
          if (p1 != 1) d->entries.push_back({Response::number(0), 1 - p1});
          if (p1 != 0) d->entries.push_back({Response::number(1), p1});
        } else {
          const std::int64_t base = even_odds_score(h);
          Rat halt_mass(0);
          std::vector<std::pair<Response, Rat>> numbers;
          for (std::uint32_t e = 0; e <= 1; ++e) {
            const Rat pe = e == 1 ? p1 : 1 - p1;
            if (pe == 0) continue;
            const std::int64_t score = base + (((e ^ b) & 1u) ? 1 : -1);
            if (score >= shared->score_target) {
              halt_mass += pe;
            } else {
              numbers.emplace_back(Response::number(e), pe);
            }
          }
          if (halt_mass != 0) d->entries.push_back({Response::halt(), halt_mass});
          for (auto& [r, p] : numbers) d->entries.push_back({r, p});
        }
        d->finalize();
        return RespDistPtr(d);
      });
}

GameConfig even_odds_config(std::uint32_t rounds, std::uint64_t master_seed) {
  return GameConfig{rounds, 2, master_seed};
}

Rat even_odds_uniform_exact(std::uint32_t rounds, std::int64_t target) {
  // score = 2W - N >= T  <=>  W >= ceil((N + T) / 2)
  const std::int64_t nt = static_cast<std::int64_t>(rounds) + target;
  const std::int64_t wmin = nt >= 0 ? (nt + 1) / 2 : nt / 2;
  if (wmin <= 0) return Rat(1);
  if (wmin > static_cast<std::int64_t>(rounds)) return Rat(0);
  return binomial_upper_tail(rounds, static_cast<std::uint32_t>(wmin));
}

// ---------------------------------------------------------------------------
// Zero-sum repeated games
// ---------------------------------------------------------------------------

StageGame StageGame::matching_pennies() {
  StageGame g;
  g.n = 2;
  g.payoff = {Rat(1), Rat(-1), Rat(-1), Rat(1)};
  return g;
}

StageGame StageGame::rock_paper_scissors() {
  StageGame g;
  g.n = 3;
  g.payoff.assign(9, Rat(0));
  for (std::uint32_t a = 0; a < 3; ++a) {
    for (std::uint32_t b = 0; b < 3; ++b) {
      if (a == b) continue;
      g.payoff[a * 3 + b] = ((b + 1) % 3 == a) ? Rat(1) : Rat(-1);
    }
  }
  return g;
}

StageGame StageGame::from_json(const nlohmann::json& j) {
  StageGame g;
  const auto& rows = j.at("payoff");
  g.n = static_cast<std::uint32_t>(rows.size());
  if (g.n == 0) throw ConfigInvalid("stage game needs at least one action");
  for (const auto& row : rows) {
    if (row.size() != g.n) throw ConfigInvalid("stage game payoff matrix must be square");
    for (const auto& cell : row) {
      if (cell.is_string()) {
        g.payoff.push_back(rat_from_string(cell.get<std::string>()));
      } else if (cell.is_number_integer()) {
        g.payoff.push_back(Rat(cell.get<std::int64_t>()));
      } else {
        throw ConfigInvalid("stage game payoffs must be integers or \"num/den\" strings");
      }
    }
  }
  return g;
}

nlohmann::json StageGame::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::uint32_t a = 0; a < n; ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (std::uint32_t b = 0; b < n; ++b) row.push_back(rat_to_string(at(a, b)));
    rows.push_back(std::move(row));
  }
  return nlohmann::json{{"payoff", std::move(rows)}};
}

KappaResult kappa_constant(const StageGame& game) {
  if (game.n == 0) throw ConfigInvalid("empty stage game");
  const std::uint32_t cells = game.n * game.n;
  Rat mean(0);
  for (const Rat& p : game.payoff) mean += p;
  mean /= cells;
  Rat var(0);
  for (const Rat& p : game.payoff) {
    const Rat dev = p - mean;
    var += dev * dev;
  }
  var /= cells;
  if (var == 0) throw DegenerateGame("uniform-play payoff variance is zero");
  KappaResult r;
  r.sigma2 = var;
  r.kappa = std::sqrt(rat_to_double(var)) * normal_upper_quantile(1.0 / 3.0);
  return r;
}

namespace {

struct ZeroSumModel {
  StageGame game;
  AgentBehavior opponent;
  std::uint32_t rounds;
  Rat threshold;  // kappa * sqrt(rounds), the exact dyadic value of the double

  // Integer fast mirror for the per-episode score scan.
  bool integral = false;
  std::vector<std::int64_t> ipayoff;

  std::int64_t iat(std::uint32_t a, std::uint32_t b) const {
    return ipayoff[a * game.n + b];
  }

  Rat prefix_score(const History& h) const {
    if (integral) {
      std::int64_t s = 0;
      for (const auto& step : h) s += iat(step.action, step.response.value);
      return Rat(s);
    }
    Rat s(0);
    for (const auto& step : h) s += game.at(step.action, step.response.value);
    return s;
  }

  void check_action(std::uint32_t a) const {
    if (a >= game.n) throw ActionOutOfRange("action outside the stage game range");
  }
};

std::shared_ptr<const ZeroSumModel> make_zero_sum_model(const StageGame& game,
                                                        const AgentBehavior& opponent,
                                                        std::uint32_t rounds) {
  auto m = std::make_shared<ZeroSumModel>();
  m->game = game;
  m->opponent = opponent;
  m->rounds = rounds;
  m->threshold = rat_from_double(kappa_constant(game).kappa *
                                 std::sqrt(static_cast<double>(rounds)));
  m->integral = true;
  std::int64_t max_abs = 0;
  for (const Rat& p : game.payoff) {
    if (boost::multiprecision::denominator(p) != 1) {
      m->integral = false;
      break;
    }
    const BigInt num = boost::multiprecision::numerator(p);
    if (num > 1'000'000'000 || num < -1'000'000'000) {
      m->integral = false;
      break;
    }
    max_abs = std::max(max_abs, abs(num.convert_to<std::int64_t>()));
  }
  if (m->integral &&
      max_abs > (std::numeric_limits<std::int64_t>::max() / 2) / std::max(1u, rounds))
    m->integral = false;
  if (m->integral) {
    for (const Rat& p : game.payoff)
      m->ipayoff.push_back(
          boost::multiprecision::numerator(p).convert_to<std::int64_t>());
  }
  return m;
}

}  // namespace

EnvironmentBehavior repeated_zero_sum_env(const StageGame& game,
                                          const AgentBehavior& opponent,
                                          std::uint32_t rounds) {
  auto model = make_zero_sum_model(game, opponent, rounds);

  if (opponent.kind == AgentBehavior::Kind::Deterministic) {
    return EnvironmentBehavior::deterministic(
        [model](const History& h, std::uint32_t a) {
          // B's move is fixed before A's action is consulted.
          const std::uint32_t b = model->opponent.act(h);
          model->check_action(b);
          model->check_action(a);
          const std::uint32_t round = static_cast<std::uint32_t>(h.size()) + 1;
          if (round < model->rounds) return Response::number(b);
          const Rat score = model->prefix_score(h) + model->game.at(a, b);
          return score > model->threshold ? Response::halt() : Response::number(b);
        });
  }

  return EnvironmentBehavior::probabilistic(
      [model](const History& h, std::uint32_t a) -> RespDistPtr {
        DistPtr bdist = model->opponent.distribution_at(h);
        model->check_action(a);
        const std::uint32_t round = static_cast<std::uint32_t>(h.size()) + 1;
        if (round < model->rounds) {
          // One cached conversion per distinct opponent distribution; hot
          // opponents reuse a shared distribution object every round.
          thread_local const ActionDistribution* cached_key = nullptr;
          thread_local RespDistPtr cached_value;
          thread_local DistPtr cached_keeper;
          if (cached_key == bdist.get()) return cached_value;
          auto d = std::make_shared<ResponseDistribution>();
          for (const auto& e : bdist->entries) {
            model->check_action(e.action);
            if (e.prob != 0) d->entries.push_back({Response::number(e.action), e.prob});
          }
          d->finalize();
          cached_keeper = bdist;  // pins the address our key refers to
          cached_key = bdist.get();
          cached_value = d;
          return cached_value;
        }
        const Rat base = model->prefix_score(h);
        Rat halt_mass(0);
        auto d = std::make_shared<ResponseDistribution>();
        std::vector<std::pair<Response, Rat>> numbers;
        for (const auto& e : bdist->entries) {
          model->check_action(e.action);
          if (e.prob == 0) continue;
          if (base + model->game.at(a, e.action) > model->threshold) {
            halt_mass += e.prob;
          } else {
            numbers.emplace_back(Response::number(e.action), e.prob);
          }
        }
        if (halt_mass != 0) d->entries.push_back({Response::halt(), halt_mass});
        for (auto& [r, p] : numbers) d->entries.push_back({r, p});
        d->finalize();
        return d;
      });
}

GameConfig zero_sum_config(const StageGame& game, std::uint32_t rounds,
                           std::uint64_t master_seed) {
  return GameConfig{rounds, game.n, master_seed};
}

}  // namespace winhalt
