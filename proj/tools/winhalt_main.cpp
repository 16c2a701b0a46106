// winhalt: reproducible experiment runner for Win/No-Halt games.
//
// Every run is driven by a JSON config (strictly validated, unknown fields
// rejected; see docs/experiment_config.schema.json) and writes a RunRecord
// plus per-subcommand artifacts under --out. Exit codes: 0 success, 2 config
// error, 3 precondition failure, 4 search found nothing.

#include "winhalt/complexity.hpp"
#include "winhalt/derandomize.hpp"
#include "winhalt/engine.hpp"
#include "winhalt/fragments.hpp"
#include "winhalt/version.hpp"
#include "winhalt/zoo.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace winhalt;

namespace {

// ---------------------------------------------------------------------------
// Strict config access
// ---------------------------------------------------------------------------

void check_keys(const json& j, const std::string& where,
                const std::set<std::string>& required,
                const std::set<std::string>& optional) {
  if (!j.is_object()) throw ConfigInvalid(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!required.count(key) && !optional.count(key))
      throw ConfigInvalid(where + ": unknown field \"" + key + "\"");
  }
  for (const auto& key : required) {
    if (!j.contains(key)) throw ConfigInvalid(where + ": missing field \"" + key + "\"");
  }
}

std::uint64_t get_u64(const json& j, const std::string& where) {
  if (!j.is_number_unsigned()) throw ConfigInvalid(where + ": expected a nonnegative integer");
  return j.get<std::uint64_t>();
}

std::uint32_t get_u32(const json& j, const std::string& where) {
  const std::uint64_t v = get_u64(j, where);
  if (v > 0xFFFFFFFFULL) throw ConfigInvalid(where + ": value too large");
  return static_cast<std::uint32_t>(v);
}

std::int64_t get_i64(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigInvalid(where + ": expected an integer");
  return j.get<std::int64_t>();
}

Rat get_rat(const json& j, const std::string& where) {
  if (j.is_string()) return rat_from_string(j.get<std::string>());
  if (j.is_number_integer()) return Rat(j.get<std::int64_t>());
  throw ConfigInvalid(where + ": expected an integer or \"num/den\" string");
}

std::string get_string(const json& j, const std::string& where) {
  if (!j.is_string()) throw ConfigInvalid(where + ": expected a string");
  return j.get<std::string>();
}

// ---------------------------------------------------------------------------
// Game construction from config
// ---------------------------------------------------------------------------

struct BuiltGame {
  std::optional<AgentBehavior> agent;
  EnvironmentBehavior env;
  GameConfig cfg;
  std::optional<Labyrinth> labyrinth;  // set when env.type == "labyrinth"
};

Labyrinth load_labyrinth_file(const fs::path& base, const std::string& rel,
                              std::optional<std::uint32_t> turns_override) {
  const fs::path path =
      fs::path(rel).is_absolute() ? fs::path(rel) : base / rel;
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open labyrinth file " + path.string());
  Labyrinth lab = Labyrinth::parse(in);
  if (turns_override) {
    lab.turns = *turns_override;
  }
  return lab;
}

MinotaurPolicy policy_by_name(const std::string& name) {
  if (name == "identity") return MinotaurPolicy::identity();
  if (name == "uniform") return MinotaurPolicy::uniform();
  throw ConfigInvalid("unknown minotaur policy \"" + name + "\" (identity|uniform)");
}

EvenOddsSpec even_odds_spec_from(const json& j, const std::string& where) {
  check_keys(j, where, {"rounds"}, {"target", "strategy"});
  const std::uint32_t rounds = get_u32(j.at("rounds"), where + ".rounds");
  const std::int64_t target = j.contains("target")
                                  ? get_i64(j.at("target"), where + ".target")
                                  : EvenOddsSpec::default_target(rounds);
  const std::string strategy =
      j.contains("strategy") ? get_string(j.at("strategy"), where + ".strategy") : "zeros";
  if (strategy == "zeros") return EvenOddsSpec::zeros(rounds, target);
  if (strategy == "ones") return EvenOddsSpec::ones(rounds, target);
  if (strategy == "alternating") return EvenOddsSpec::alternating(rounds, target);
  if (strategy == "copy_last") return EvenOddsSpec::copy_last_action(rounds, target);
  if (strategy == "majority") return EvenOddsSpec::majority_of_actions(rounds, target);
  if (strategy == "coin") return EvenOddsSpec::coin(rounds, target);
  throw ConfigInvalid(where + ": unknown strategy \"" + strategy + "\"");
}

StageGame stage_game_from(const json& j, const fs::path& base, const std::string& where) {
  if (j.is_string()) {
    const fs::path path = fs::path(j.get<std::string>()).is_absolute()
                              ? fs::path(j.get<std::string>())
                              : base / j.get<std::string>();
    std::ifstream in(path);
    if (!in) throw ConfigInvalid("cannot open stage game file " + path.string());
    json g = json::parse(in, nullptr, true, true);
    check_keys(g, where, {"payoff"}, {});
    return StageGame::from_json(g);
  }
  check_keys(j, where, {"payoff"}, {});
  return StageGame::from_json(j);
}

AgentBehavior build_agent(const json& j, const BuiltGame& game, const std::string& where);

EnvironmentBehavior bernoulli_halt_env(const Rat& p) {
  if (p < 0 || p > 1) throw ConfigInvalid("bernoulli_halt: p outside [0,1]");
  return EnvironmentBehavior::probabilistic([p](const History&, std::uint32_t a) {
    auto d = std::make_shared<ResponseDistribution>();
    if (p != 0) d->entries.push_back({Response::halt(), p});
    if (p != 1) d->entries.push_back({Response::number(a), 1 - p});
    d->finalize();
    return RespDistPtr(d);
  });
}

EnvironmentBehavior echo_halt_env(std::uint32_t max_action) {
  return EnvironmentBehavior::deterministic(
      [max_action](const History& h, std::uint32_t a) {
        if (h.empty()) return Response::number((a + 1) % max_action);
        return a == h.back().response.value ? Response::halt()
                                            : Response::number((a + 1) % max_action);
      });
}

BuiltGame build_game(const json& game_json, const fs::path& base, bool need_agent) {
  check_keys(game_json, "game", {"env"}, {"agent", "horizon", "max_action"});
  BuiltGame out;

  const json& env_json = game_json.at("env");
  if (!env_json.is_object() || !env_json.contains("type"))
    throw ConfigInvalid("game.env: expected an object with a \"type\"");
  const std::string type = get_string(env_json.at("type"), "game.env.type");

  const bool structured = type == "labyrinth" || type == "even_odds" || type == "zero_sum";
  if (structured && (game_json.contains("horizon") || game_json.contains("max_action")))
    throw ConfigInvalid("game: horizon/max_action are derived for env type \"" + type +
                        "\" and must be omitted");
  if (!structured) {
    if (!game_json.contains("horizon") || !game_json.contains("max_action"))
      throw ConfigInvalid("game: horizon and max_action are required for env type \"" +
                          type + "\"");
    out.cfg.horizon = get_u32(game_json.at("horizon"), "game.horizon");
    out.cfg.max_action = get_u32(game_json.at("max_action"), "game.max_action");
  }

  if (type == "always_halt") {
    check_keys(env_json, "game.env", {"type"}, {});
    out.env = EnvironmentBehavior::always_halt();
  } else if (type == "never_halt") {
    check_keys(env_json, "game.env", {"type"}, {});
    out.env = EnvironmentBehavior::never_halt();
  } else if (type == "halt_iff_action") {
    check_keys(env_json, "game.env", {"type", "action"}, {});
    out.env = EnvironmentBehavior::halt_iff_action(
        get_u32(env_json.at("action"), "game.env.action"));
  } else if (type == "bernoulli_halt") {
    check_keys(env_json, "game.env", {"type", "p"}, {});
    out.env = bernoulli_halt_env(get_rat(env_json.at("p"), "game.env.p"));
  } else if (type == "echo_halt") {
    check_keys(env_json, "game.env", {"type"}, {});
    out.env = echo_halt_env(out.cfg.max_action);
  } else if (type == "labyrinth") {
    check_keys(env_json, "game.env", {"type", "file"},
               {"policy", "turns", "halt_on_first_arrival"});
    std::optional<std::uint32_t> turns;
    if (env_json.contains("turns")) turns = get_u32(env_json.at("turns"), "game.env.turns");
    Labyrinth lab =
        load_labyrinth_file(base, get_string(env_json.at("file"), "game.env.file"), turns);
    const std::string policy = env_json.contains("policy")
                                   ? get_string(env_json.at("policy"), "game.env.policy")
                                   : "uniform";
    bool first_arrival = false;
    if (env_json.contains("halt_on_first_arrival")) {
      if (!env_json.at("halt_on_first_arrival").is_boolean())
        throw ConfigInvalid("game.env.halt_on_first_arrival: expected a boolean");
      first_arrival = env_json.at("halt_on_first_arrival").get<bool>();
    }
    out.env = labyrinth_env(lab, policy_by_name(policy), first_arrival);
    out.cfg = labyrinth_config(lab, 0);
    out.labyrinth = std::move(lab);
  } else if (type == "even_odds") {
    check_keys(env_json, "game.env", {"type", "rounds"}, {"target", "strategy"});
    json spec_json = env_json;
    spec_json.erase("type");
    EvenOddsSpec spec = even_odds_spec_from(spec_json, "game.env");
    out.env = even_odds_env(spec);
    out.cfg = even_odds_config(spec.rounds, 0);
  } else if (type == "zero_sum") {
    check_keys(env_json, "game.env", {"type", "game", "opponent", "rounds"}, {});
    StageGame stage = stage_game_from(env_json.at("game"), base, "game.env.game");
    const std::uint32_t rounds = get_u32(env_json.at("rounds"), "game.env.rounds");
    out.cfg = zero_sum_config(stage, rounds, 0);
    BuiltGame tmp;
    tmp.cfg = out.cfg;
    AgentBehavior opponent = build_agent(env_json.at("opponent"), tmp, "game.env.opponent");
    out.env = repeated_zero_sum_env(stage, opponent, rounds);
  } else {
    throw ConfigInvalid("game.env.type: unknown environment \"" + type + "\"");
  }

  if (game_json.contains("agent")) {
    out.agent = build_agent(game_json.at("agent"), out, "game.agent");
  } else if (need_agent) {
    throw ConfigInvalid("game: this subcommand requires game.agent");
  }
  return out;
}

AgentBehavior build_agent(const json& j, const BuiltGame& game, const std::string& where) {
  if (!j.is_object() || !j.contains("type"))
    throw ConfigInvalid(where + ": expected an object with a \"type\"");
  const std::string type = get_string(j.at("type"), where + ".type");
  if (type == "uniform") {
    check_keys(j, where, {"type", "actions"}, {});
    return AgentBehavior::uniform(get_u32(j.at("actions"), where + ".actions"));
  }
  if (type == "constant") {
    check_keys(j, where, {"type", "action"}, {});
    return AgentBehavior::constant(get_u32(j.at("action"), where + ".action"));
  }
  if (type == "fixed") {
    check_keys(j, where, {"type", "entries"}, {"semi"});
    ActionDistribution d;
    for (const auto& e : j.at("entries")) {
      check_keys(e, where + ".entries[]", {"action", "prob"}, {});
      d.entries.push_back({get_u32(e.at("action"), where + ".entries[].action"),
                           get_rat(e.at("prob"), where + ".entries[].prob")});
    }
    d.finalize();
    const bool semi = j.contains("semi") && j.at("semi").get<bool>();
    return semi ? AgentBehavior::semi_fixed(std::move(d))
                : AgentBehavior::probabilistic_fixed(std::move(d));
  }
  if (type == "program") {
    check_keys(j, where, {"type", "bits"}, {"fuel"});
    const AgentProgram prog = decode_program(get_string(j.at("bits"), where + ".bits"));
    const std::uint32_t fuel =
        j.contains("fuel") ? get_u32(j.at("fuel"), where + ".fuel") : kDefaultFuel;
    return program_agent(prog, game.cfg.max_action, fuel);
  }
  if (type == "policy_table") {
    check_keys(j, where, {"type", "depth", "label_bound", "actions"}, {});
    json t = j;
    t.erase("type");
    return DeterministicPolicyTable::from_json(t).as_agent();
  }
  if (type == "uniform_hero") {
    check_keys(j, where, {"type"}, {});
    if (!game.labyrinth)
      throw ConfigInvalid(where + ": uniform_hero requires a labyrinth environment");
    return uniform_hero(*game.labyrinth);
  }
  throw ConfigInvalid(where + ".type: unknown agent \"" + type + "\"");
}

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json history_to_json(const History& h) {
  json steps = json::array();
  for (const auto& step : h) {
    json s{{"action", step.action}};
    if (step.response.is_halt) {
      s["response"] = "halt";
    } else {
      s["response"] = step.response.value;
    }
    steps.push_back(std::move(s));
  }
  return steps;
}

struct RunContext {
  fs::path out_dir;
  fs::path base_dir;  // config file's directory; file references resolve here
  std::uint64_t seed = 0;
  int jobs = 0;
  std::string format = "json";
  std::vector<std::pair<std::string, std::string>> csv_rows;  // metric, value
  std::vector<std::pair<std::string, json>> artifacts;        // filename, payload
};

void put_csv(RunContext& ctx, const std::string& metric, const std::string& value) {
  ctx.csv_rows.emplace_back(metric, value);
}

// ---------------------------------------------------------------------------
// Subcommand handlers: config -> metrics json
// ---------------------------------------------------------------------------

json run_play(const json& cfgj, RunContext& ctx) {
  check_keys(cfgj, "config", {"subcommand", "game"}, {"seed", "jobs"});
  BuiltGame game = build_game(cfgj.at("game"), ctx.base_dir, true);
  game.cfg.master_seed = ctx.seed;
  Outcome o = play(*game.agent, game.env, game.cfg, ctx.seed);
  json metrics{{"win", o.win}, {"froze", o.froze}, {"rounds_played", o.transcript.size()}};
  if (o.win) metrics["win_round"] = o.win_round;
  metrics["transcript"] = history_to_json(o.transcript);
  put_csv(ctx, "win", o.win ? "1" : "0");
  put_csv(ctx, "rounds_played", std::to_string(o.transcript.size()));
  return metrics;
}

json run_winprob(const json& cfgj, RunContext& ctx) {
  check_keys(cfgj, "config", {"subcommand", "game", "params"}, {"seed", "jobs"});
  const json& p = cfgj.at("params");
  check_keys(p, "params", {"mode"}, {"trials", "node_budget"});
  const std::string mode = get_string(p.at("mode"), "params.mode");
  BuiltGame game = build_game(cfgj.at("game"), ctx.base_dir, true);
  game.cfg.master_seed = ctx.seed;
  json metrics{{"mode", mode}};
  if (mode == "exact") {
    ExactOptions opts;
    if (p.contains("node_budget"))
      opts.node_budget = get_u64(p.at("node_budget"), "params.node_budget");
    const Rat v = exact_win_prob(*game.agent, game.env, game.cfg, opts);
    metrics["exact_win_prob"] = rat_to_string(v);
    metrics["exact_win_prob_approx"] = rat_to_double(v);
    put_csv(ctx, "exact_win_prob", rat_to_string(v));
  } else if (mode == "mc") {
    const std::uint64_t trials =
        p.contains("trials") ? get_u64(p.at("trials"), "params.trials") : 100000;
    McResult r = mc_win_prob(*game.agent, game.env, game.cfg, trials, ctx.jobs);
    metrics["estimate"] = r.estimate;
    metrics["ci_halfwidth"] = r.ci_halfwidth;
    metrics["wins"] = r.wins;
    metrics["freezes"] = r.freezes;
    metrics["trials"] = r.trials;
    put_csv(ctx, "estimate", std::to_string(r.estimate));
    put_csv(ctx, "wins", std::to_string(r.wins));
    put_csv(ctx, "trials", std::to_string(r.trials));
  } else {
    throw ConfigInvalid("params.mode: expected \"exact\" or \"mc\"");
  }
  return metrics;
}

json run_fragment(const json& cfgj, RunContext& ctx) {
  check_keys(cfgj, "config", {"subcommand", "game", "params"}, {"seed", "jobs"});
  const json& p = cfgj.at("params");
  check_keys(p, "params", {"s"}, {"node_budget"});
  BuiltGame game = build_game(cfgj.at("game"), ctx.base_dir, true);
  const std::uint32_t s = get_u32(p.at("s"), "params.s");
  ExtractOptions opts;
  if (p.contains("node_budget"))
    opts.node_budget = get_u64(p.at("node_budget"), "params.node_budget");
  GameFragment f = extract_fragment(*game.agent, game.env, s, game.cfg, opts);
  const FragmentStats st = fragment_stats(f);
  const Rat w = weight(*game.agent, f);
  const bool valid = validate_fragment(f, game.env);
  json metrics{{"s", s},
               {"path_count", st.path_count},
               {"max_depth", st.max_depth},
               {"action_bound", st.action_bound},
               {"weight", rat_to_string(w)},
               {"weight_approx", rat_to_double(w)},
               {"validates", valid}};
  ctx.artifacts.emplace_back("fragment.json", f.to_json());
  put_csv(ctx, "path_count", std::to_string(st.path_count));
  put_csv(ctx, "weight", rat_to_string(w));
  return metrics;
}

json run_derandomize(const json& cfgj, RunContext& ctx) {
  check_keys(cfgj, "config", {"subcommand", "game", "params"}, {"seed", "jobs"});
  const json& p = cfgj.at("params");
  check_keys(p, "params", {"s", "d"}, {"verify_winner"});
  BuiltGame game = build_game(cfgj.at("game"), ctx.base_dir, true);
  const std::uint32_t s = get_u32(p.at("s"), "params.s");
  const std::uint64_t d = get_u64(p.at("d"), "params.d");
  DerandomizationReport r =
      derandomize(*game.agent, game.env, s, d, game.cfg, ctx.seed, ctx.jobs);
  ctx.artifacts.emplace_back("derandomize_report.json", r.to_json());
  json metrics{{"s", r.s},
               {"d", r.d},
               {"sample_count", r.sample_count},
               {"threshold", rat_to_string(r.threshold)},
               {"agent_weight", rat_to_string(r.agent_weight)},
               {"empirical_max_weight", rat_to_string(r.empirical_max_weight)}};
  put_csv(ctx, "sample_count", std::to_string(r.sample_count));
  put_csv(ctx, "empirical_max_weight", rat_to_string(r.empirical_max_weight));
  if (!r.winner) throw NoWinnerFound("no sampled table crossed the weight threshold");
  metrics["winner_id"] = *r.winner;
  metrics["winner_weight"] = rat_to_string(r.sample_weights[*r.winner]);
  DeterministicPolicyTable w =
      rebuild_sampled_table(*game.agent, r.shape, ctx.seed, *r.winner);
  ctx.artifacts.emplace_back("winner_table.json", w.to_json());
  const bool verify = !p.contains("verify_winner") || p.at("verify_winner").get<bool>();
  if (verify) {
    const Rat win = exact_win_prob(w.as_agent(), game.env, game.cfg);
    metrics["winner_exact_win_prob"] = rat_to_string(win);
    metrics["winner_sound"] = win > r.threshold;
  }
  put_csv(ctx, "winner_id", std::to_string(*r.winner));
  put_csv(ctx, "winner_weight", rat_to_string(r.sample_weights[*r.winner]));
  return metrics;
}

json run_partial(const json& cfgj, RunContext& ctx) {
  check_keys(cfgj, "config", {"subcommand", "game", "params"}, {"seed", "jobs"});
  const json& p = cfgj.at("params");
  check_keys(p, "params", {"tables"}, {});
  BuiltGame game = build_game(cfgj.at("game"), ctx.base_dir, false);
  std::vector<DeterministicPolicyTable> tables;
  for (const auto& tj : p.at("tables")) {
    check_keys(tj, "params.tables[]", {"depth", "label_bound", "actions"}, {});
    tables.push_back(DeterministicPolicyTable::from_json(tj));
  }
  if (tables.empty()) throw ConfigInvalid("params.tables: need at least one table");
  Rat average(0);
  json members = json::array();
  for (const auto& t : tables) {
    const Rat w = exact_win_prob(t.as_agent(), game.env, game.cfg);
    members.push_back(rat_to_string(w));
    average += w;
  }
  average /= static_cast<std::uint64_t>(tables.size());
  const AgentBehavior mixture = partial_derandomize(tables);
  const Rat mixed = exact_win_prob(mixture, game.env, game.cfg);
  json metrics{{"table_count", tables.size()},
               {"member_win_probs", members},
               {"member_average", rat_to_string(average)},
               {"mixture_win_prob", rat_to_string(mixed)},
               {"mixture_equals_average", mixed == average}};
  put_csv(ctx, "mixture_win_prob", rat_to_string(mixed));
  put_csv(ctx, "member_average", rat_to_string(average));
  return metrics;
}

json run_search(const json& cfgj, RunContext& ctx) {
  check_keys(cfgj, "config", {"subcommand", "game", "params"}, {"seed", "jobs"});
  const json& p = cfgj.at("params");
  check_keys(p, "params", {"max_bits"}, {"threshold", "fuel", "members"});
  BuiltGame game = build_game(cfgj.at("game"), ctx.base_dir, false);
  const std::uint32_t max_bits = get_u32(p.at("max_bits"), "params.max_bits");
  const Rat threshold =
      p.contains("threshold") ? get_rat(p.at("threshold"), "params.threshold") : Rat(0);
  const std::uint32_t fuel =
      p.contains("fuel") ? get_u32(p.at("fuel"), "params.fuel") : kDefaultFuel;
  AgentSpace space = AgentSpace::all();
  if (p.contains("members")) {
    std::vector<std::string> members;
    for (const auto& m : p.at("members"))
      members.push_back(get_string(m, "params.members[]"));
    space = AgentSpace::enumerated(std::move(members));
  }
  auto found =
      min_winning_description(game.env, game.cfg, max_bits, threshold, space, fuel, ctx.jobs);
  if (!found) throw NoWinnerFound("search: no winning program within the bit budget");
  json metrics{{"bits", found->bits},
               {"program_bits", found->program.to_bits()},
               {"program_hex", found->program.to_hex()},
               {"mnemonics", found->program.mnemonics()}};
  put_csv(ctx, "bits", std::to_string(found->bits));
  put_csv(ctx, "mnemonics", found->program.mnemonics());
  return metrics;
}

json run_xi(const json& cfgj, RunContext& ctx) {
  check_keys(cfgj, "config", {"subcommand", "game", "params"}, {"seed", "jobs"});
  const json& p = cfgj.at("params");
  check_keys(p, "params", {"max_bits"}, {"fuel"});
  BuiltGame game = build_game(cfgj.at("game"), ctx.base_dir, false);
  const std::uint32_t max_bits = get_u32(p.at("max_bits"), "params.max_bits");
  const std::uint32_t fuel =
      p.contains("fuel") ? get_u32(p.at("fuel"), "params.fuel") : kDefaultFuel;
  XiReport r = xi_proxy(game.env, game.cfg, max_bits, fuel, ctx.jobs);
  ctx.artifacts.emplace_back("xi_report.json", r.to_json());
  json metrics{{"budget_bits", r.budget_bits},
               {"mass", rat_to_string(r.mass)},
               {"winning_programs", r.contributions.size()}};
  metrics["xi"] = r.xi ? json(*r.xi) : json("inf");
  put_csv(ctx, "mass", rat_to_string(r.mass));
  put_csv(ctx, "xi", r.xi ? std::to_string(*r.xi) : "inf");
  return metrics;
}

json run_labyrinth(const json& cfgj, RunContext& ctx) {
  check_keys(cfgj, "config", {"subcommand", "params"}, {"seed", "jobs"});
  const json& p = cfgj.at("params");
  check_keys(p, "params", {"file"}, {"tv_threshold", "curve_steps"});
  Labyrinth lab =
      load_labyrinth_file(ctx.base_dir, get_string(p.at("file"), "params.file"), {});
  const double tv_threshold =
      p.contains("tv_threshold") ? p.at("tv_threshold").get<double>() : 0.005;

  const std::uint32_t c = lab.corridor_count();
  const std::uint32_t d = lab.goal_degree();
  std::uint32_t first_n = 0;
  while (mixing_distance(lab, first_n) >= tv_threshold) {
    if (++first_n > 100000) throw Error("mixing did not reach the threshold");
  }
  const Rat occupancy = walk_distribution(lab, first_n)[lab.goal];
  const Rat pi_goal = Rat(d, 2 * c);
  json metrics{{"rooms", lab.room_count},
               {"corridors", c},
               {"goal_degree", d},
               {"stationary_goal", rat_to_string(pi_goal)},
               {"tv_threshold", tv_threshold},
               {"first_n_below_threshold", first_n},
               {"occupancy_at_n", rat_to_string(occupancy)},
               {"occupancy_at_n_approx", rat_to_double(occupancy)},
               {"clears_drift_bound", occupancy > Rat(100 * d, 201 * c)}};
  const std::uint32_t curve_steps =
      p.contains("curve_steps") ? get_u32(p.at("curve_steps"), "params.curve_steps")
                                : first_n + 5;
  json curve = json::array();
  for (std::uint32_t t = 0; t <= curve_steps; ++t) {
    curve.push_back({{"t", t}, {"tv", mixing_distance(lab, t)}});
  }
  ctx.artifacts.emplace_back("mixing_curve.json", curve);
  put_csv(ctx, "first_n_below_threshold", std::to_string(first_n));
  put_csv(ctx, "occupancy_at_n", rat_to_string(occupancy));
  put_csv(ctx, "stationary_goal", rat_to_string(pi_goal));
  return metrics;
}

json run_evenodds(const json& cfgj, RunContext& ctx) {
  check_keys(cfgj, "config", {"subcommand", "params"}, {"seed", "jobs"});
  const json& p = cfgj.at("params");
  check_keys(p, "params", {"rounds", "mode"}, {"target", "strategy", "trials"});
  json spec_json = p;
  spec_json.erase("mode");
  if (spec_json.contains("trials")) spec_json.erase("trials");
  EvenOddsSpec spec = even_odds_spec_from(spec_json, "params");
  const std::string mode = get_string(p.at("mode"), "params.mode");
  json metrics{{"rounds", spec.rounds}, {"target", spec.score_target}, {"mode", mode}};
  if (mode == "exact") {
    const Rat tail = even_odds_uniform_exact(spec.rounds, spec.score_target);
    metrics["uniform_exact_tail"] = rat_to_string(tail);
    metrics["uniform_exact_tail_approx"] = rat_to_double(tail);
    put_csv(ctx, "uniform_exact_tail", rat_to_string(tail));
  } else if (mode == "mc") {
    const std::uint64_t trials =
        p.contains("trials") ? get_u64(p.at("trials"), "params.trials") : 100000;
    GameConfig cfg = even_odds_config(spec.rounds, ctx.seed);
    McResult r = mc_win_prob(AgentBehavior::uniform(2), even_odds_env(spec), cfg, trials,
                             ctx.jobs);
    metrics["estimate"] = r.estimate;
    metrics["ci_halfwidth"] = r.ci_halfwidth;
    metrics["trials"] = r.trials;
    put_csv(ctx, "estimate", std::to_string(r.estimate));
  } else {
    throw ConfigInvalid("params.mode: expected \"exact\" or \"mc\"");
  }
  return metrics;
}

json run_zerosum(const json& cfgj, RunContext& ctx) {
  check_keys(cfgj, "config", {"subcommand", "params"}, {"seed", "jobs"});
  const json& p = cfgj.at("params");
  check_keys(p, "params", {"game", "rounds", "mode"}, {"opponent", "agent", "trials"});
  StageGame stage = stage_game_from(p.at("game"), ctx.base_dir, "params.game");
  const std::uint32_t rounds = get_u32(p.at("rounds"), "params.rounds");
  const KappaResult k = kappa_constant(stage);

  GameConfig cfg = zero_sum_config(stage, rounds, ctx.seed);
  BuiltGame scratch;
  scratch.cfg = cfg;
  AgentBehavior opponent = p.contains("opponent")
                               ? build_agent(p.at("opponent"), scratch, "params.opponent")
                               : AgentBehavior::uniform(stage.n);
  AgentBehavior agent = p.contains("agent")
                            ? build_agent(p.at("agent"), scratch, "params.agent")
                            : AgentBehavior::uniform(stage.n);
  const EnvironmentBehavior env = repeated_zero_sum_env(stage, opponent, rounds);

  json metrics{{"n", stage.n},
               {"rounds", rounds},
               {"sigma2", rat_to_string(k.sigma2)},
               {"kappa", k.kappa},
               {"score_threshold", k.kappa * std::sqrt(static_cast<double>(rounds))}};
  const std::string mode = get_string(p.at("mode"), "params.mode");
  metrics["mode"] = mode;
  if (mode == "exact") {
    const Rat v = exact_win_prob(agent, env, cfg);
    metrics["exact_win_prob"] = rat_to_string(v);
    metrics["exact_win_prob_approx"] = rat_to_double(v);
    put_csv(ctx, "exact_win_prob", rat_to_string(v));
  } else if (mode == "mc") {
    const std::uint64_t trials =
        p.contains("trials") ? get_u64(p.at("trials"), "params.trials") : 100000;
    McResult r = mc_win_prob(agent, env, cfg, trials, ctx.jobs);
    metrics["estimate"] = r.estimate;
    metrics["ci_halfwidth"] = r.ci_halfwidth;
    metrics["trials"] = r.trials;
    put_csv(ctx, "estimate", std::to_string(r.estimate));
  } else {
    throw ConfigInvalid("params.mode: expected \"exact\" or \"mc\"");
  }
  put_csv(ctx, "kappa", std::to_string(k.kappa));
  put_csv(ctx, "sigma2", rat_to_string(k.sigma2));
  return metrics;
}

json run_report(const json& cfgj, RunContext& ctx) {
  check_keys(cfgj, "config", {"subcommand", "params"}, {"seed", "jobs"});
  const json& p = cfgj.at("params");
  check_keys(p, "params", {"dir"}, {});
  const std::string rel = get_string(p.at("dir"), "params.dir");
  const fs::path dir = fs::path(rel).is_absolute() ? fs::path(rel) : ctx.base_dir / rel;
  if (!fs::is_directory(dir)) throw ConfigInvalid("report: not a directory: " + dir.string());
  json rows = json::array();
  std::vector<fs::path> records;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "run_record.json")
      records.push_back(entry.path());
  }
  std::sort(records.begin(), records.end());
  for (const auto& path : records) {
    std::ifstream in(path);
    json rec = json::parse(in, nullptr, true, true);
    rows.push_back({{"path", path.string()},
                    {"subcommand", rec.value("subcommand", "")},
                    {"config_hash", rec.value("config_hash", "")},
                    {"seed", rec.value("seed", std::uint64_t(0))}});
    put_csv(ctx, rec.value("subcommand", "?"), path.string());
  }
  return json{{"records", rows}, {"count", rows.size()}};
}

// ---------------------------------------------------------------------------

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigInvalid*>(&e)) return 2;
  if (dynamic_cast<const NoWinnerFound*>(&e)) return 4;
  if (dynamic_cast<const Error*>(&e)) return 3;
  if (dynamic_cast<const json::exception*>(&e)) return 2;
  return 1;
}

std::string error_type(const std::exception& e) {
  if (dynamic_cast<const ConfigInvalid*>(&e)) return "ConfigInvalid";
  if (dynamic_cast<const InsufficientMass*>(&e)) return "InsufficientMass";
  if (dynamic_cast<const NoWinnerFound*>(&e)) return "NoWinnerFound";
  if (dynamic_cast<const BudgetExceeded*>(&e)) return "BudgetExceeded";
  if (dynamic_cast<const InvalidDistribution*>(&e)) return "InvalidDistribution";
  if (dynamic_cast<const Bipartite*>(&e)) return "Bipartite";
  if (dynamic_cast<const DegenerateGame*>(&e)) return "DegenerateGame";
  if (dynamic_cast<const ActionOutOfRange*>(&e)) return "ActionOutOfRange";
  if (dynamic_cast<const Overflow*>(&e)) return "Overflow";
  if (dynamic_cast<const TruncatedCode*>(&e)) return "TruncatedCode";
  if (dynamic_cast<const UnknownOpcode*>(&e)) return "UnknownOpcode";
  if (dynamic_cast<const json::exception*>(&e)) return "ConfigInvalid";
  return "InternalError";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"winhalt: Win/No-Halt game simulation and derandomization lab"};
  std::string config_path;
  std::string out_dir = "out";
  std::string format = "json";
  std::uint64_t seed_flag = 0;
  bool seed_given = false;
  int jobs = 0;
  app.add_option("--config", config_path, "experiment config JSON")->required();
  app.add_option("--out", out_dir, "output directory (default: out)");
  auto* seed_opt = app.add_option("--seed", seed_flag, "master seed; overrides config");
  app.add_option("--jobs", jobs, "worker cap; 0 = all cores, 1 = serial");
  app.add_option("--format", format, "results format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  CLI11_PARSE(app, argc, argv);
  seed_given = seed_opt->count() > 0;

  json config;
  RunContext ctx;
  try {
    std::ifstream in(config_path);
    if (!in) throw ConfigInvalid("cannot open config file " + config_path);
    config = json::parse(in, nullptr, true, true);
    if (!config.is_object() || !config.contains("subcommand"))
      throw ConfigInvalid("config: missing \"subcommand\"");

    ctx.out_dir = out_dir;
    ctx.base_dir = fs::path(config_path).parent_path();
    ctx.format = format;
    ctx.jobs = jobs;
    if (config.contains("jobs") && jobs == 0)
      ctx.jobs = static_cast<int>(get_u64(config.at("jobs"), "config.jobs"));
    ctx.seed = config.contains("seed") ? get_u64(config.at("seed"), "config.seed") : 0;
    if (seed_given) ctx.seed = seed_flag;

    const std::string sub = get_string(config.at("subcommand"), "config.subcommand");
    using Handler = json (*)(const json&, RunContext&);
    static const std::map<std::string, Handler> handlers = {
        {"play", run_play},           {"winprob", run_winprob},
        {"fragment", run_fragment},   {"derandomize", run_derandomize},
        {"partial", run_partial},     {"search", run_search},
        {"xi", run_xi},               {"labyrinth", run_labyrinth},
        {"evenodds", run_evenodds},   {"zerosum", run_zerosum},
        {"report", run_report},
    };
    const auto it = handlers.find(sub);
    if (it == handlers.end())
      throw ConfigInvalid("config.subcommand: unknown subcommand \"" + sub + "\"");

    const auto t0 = std::chrono::steady_clock::now();
    json metrics = it->second(config, ctx);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    json record{{"artifact_version", kVersion},
                {"subcommand", sub},
                {"config_hash", hex64(fnv1a64(config.dump()))},
                {"seed", ctx.seed},
                {"wall_time_seconds", wall},
                {"metrics", metrics}};

    fs::create_directories(ctx.out_dir);
    {
      std::ofstream rec(ctx.out_dir / "run_record.json");
      rec << record.dump(2) << '\n';
    }
    for (const auto& [name, payload] : ctx.artifacts) {
      std::ofstream art(ctx.out_dir / name);
      art << payload.dump(2) << '\n';
    }
    if (ctx.format == "csv") {
      std::ofstream csv(ctx.out_dir / "results.csv");
      csv << "metric,value\n";
      for (const auto& [metric, value] : ctx.csv_rows) {
        csv << metric << ',' << value << '\n';
      }
    } else {
      std::ofstream res(ctx.out_dir / "results.json");
      res << metrics.dump(2) << '\n';
    }
    std::cout << record.dump(2) << std::endl;
    return 0;
  } catch (const std::exception& e) {
    const json err{{"error", {{"type", error_type(e)}, {"message", e.what()}}}};
    std::cout << err.dump(2) << std::endl;
    return exit_code_for(e);
  }
}
