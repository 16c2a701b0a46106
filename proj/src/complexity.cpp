#include "winhalt/complexity.hpp"

#include <omp.h>

#include <algorithm>
#include <unordered_set>

namespace winhalt {

namespace {

struct OpcodeInfo {
  Opcode op;
  const char* bits;     // encoding prefix
  std::uint32_t length; // total encoded length incl. CONST payload
};

// Interior opcodes in lexicographic encoding order (CONST payloads extend
// "00" and stay first).
constexpr OpcodeInfo kInterior[] = {
    {Opcode::Const, "00", 6},      {Opcode::LastResponse, "01", 2},
    {Opcode::TurnIndex, "100", 3}, {Opcode::AddMod, "101", 3},
    {Opcode::Xor, "110", 3},       {Opcode::Dup, "1110", 4},
};

constexpr std::uint32_t kHaltBits = 4;  // "1111"

std::uint32_t instruction_bits(const Instruction& ins) {
  switch (ins.op) {
    case Opcode::Const:
      return 6;
    case Opcode::LastResponse:
      return 2;
    case Opcode::TurnIndex:
    case Opcode::AddMod:
    case Opcode::Xor:
      return 3;
    case Opcode::Dup:
    case Opcode::HaltTop:
      return 4;
  }
  return 0;
}

void append_bits(std::string& out, const Instruction& ins) {
  switch (ins.op) {
    case Opcode::Const: {
      out += "00";
      for (int b = 3; b >= 0; --b) out += ((ins.arg >> b) & 1) ? '1' : '0';
      break;
    }
    case Opcode::LastResponse:
      out += "01";
      break;
    case Opcode::TurnIndex:
      out += "100";
      break;
    case Opcode::AddMod:
      out += "101";
      break;
    case Opcode::Xor:
      out += "110";
      break;
    case Opcode::Dup:
      out += "1110";
      break;
    case Opcode::HaltTop:
      out += "1111";
      break;
  }
}

// Interior opcode lengths are {2,3,4,6}; every count except 1 is fillable.
bool fillable(std::uint32_t bits) { return bits != 1; }

void mark_complete(AgentProgram& p) {
  p.complete = false;
  if (p.code.empty()) return;
  for (std::size_t i = 0; i + 1 < p.code.size(); ++i) {
    if (p.code[i].op == Opcode::HaltTop) return;
  }
  p.complete = p.code.back().op == Opcode::HaltTop;
}

}  // namespace

std::string AgentProgram::to_bits() const {
  std::string out;
  out.reserve(bit_length);
  for (const Instruction& ins : code) append_bits(out, ins);
  return out;
}

std::string AgentProgram::to_hex() const {
  const std::string bits = to_bits();
  std::string hex;
  for (std::size_t i = 0; i < bits.size(); i += 4) {
    std::uint32_t nibble = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      nibble <<= 1;
      if (i + j < bits.size() && bits[i + j] == '1') nibble |= 1;
    }
    hex += "0123456789ABCDEF"[nibble];
  }
  return hex;
}

std::string AgentProgram::mnemonics() const {
  std::string out;
  for (const Instruction& ins : code) {
    if (!out.empty()) out += ' ';
    switch (ins.op) {
      case Opcode::Const:
        out += "CONST(" + std::to_string(ins.arg) + ")";
        break;
      case Opcode::LastResponse:
        out += "LAST_RESPONSE";
        break;
      case Opcode::TurnIndex:
        out += "TURN_INDEX";
        break;
      case Opcode::AddMod:
        out += "ADD_MOD";
        break;
      case Opcode::Xor:
        out += "XOR";
        break;
      case Opcode::Dup:
        out += "DUP";
        break;
      case Opcode::HaltTop:
        out += "HALT_TOP";
        break;
    }
  }
  return out;
}

AgentProgram decode_program(std::string_view bits) {
  if (bits.empty()) throw TruncatedCode("empty code");
  AgentProgram p;
  std::size_t i = 0;
  auto need = [&](std::size_t n) {
    if (i + n > bits.size()) throw TruncatedCode("code ends inside an opcode");
  };
  auto bit = [&](std::size_t k) {
    const char c = bits[k];
    if (c != '0' && c != '1') throw UnknownOpcode("non-binary character in code");
    return c == '1';
  };
  while (i < bits.size()) {
    need(2);
    if (!bit(i)) {
      if (!bit(i + 1)) {
        need(6);
        std::uint8_t k = 0;
        for (std::size_t j = 2; j < 6; ++j) k = static_cast<std::uint8_t>((k << 1) | bit(i + j));
        p.code.push_back({Opcode::Const, k});
        i += 6;
      } else {
        p.code.push_back({Opcode::LastResponse, 0});
        i += 2;
      }
    } else {
      need(3);
      if (!bit(i + 1)) {
        p.code.push_back({bit(i + 2) ? Opcode::AddMod : Opcode::TurnIndex, 0});
        i += 3;
      } else if (!bit(i + 2)) {
        p.code.push_back({Opcode::Xor, 0});
        i += 3;
      } else {
        need(4);
        p.code.push_back({bit(i + 3) ? Opcode::HaltTop : Opcode::Dup, 0});
        i += 4;
      }
    }
  }
  p.bit_length = static_cast<std::uint32_t>(bits.size());
  mark_complete(p);
  return p;
}

std::optional<std::uint32_t> run_program(const AgentProgram& program, const History& history,
                                         std::uint32_t max_action, std::uint32_t fuel) {
  std::vector<std::uint64_t> stack;
  stack.reserve(8);
  for (const Instruction& ins : program.code) {
    if (fuel == 0) return std::nullopt;
    --fuel;
    switch (ins.op) {
      case Opcode::Const:
        stack.push_back(ins.arg);
        break;
      case Opcode::LastResponse:
        stack.push_back(history.empty() ? 0 : history.back().response.value);
        break;
      case Opcode::TurnIndex:
        stack.push_back(history.size());
        break;
      case Opcode::AddMod: {
        if (stack.size() < 2) return std::nullopt;
        const std::uint64_t b = stack.back();
        stack.pop_back();
        stack.back() = (stack.back() + b) % max_action;
        break;
      }
      case Opcode::Xor: {
        if (stack.size() < 2) return std::nullopt;
        const std::uint64_t b = stack.back();
        stack.pop_back();
        stack.back() = (stack.back() ^ b) % max_action;
        break;
      }
      case Opcode::Dup:
        if (stack.empty()) return std::nullopt;
        stack.push_back(stack.back());
        break;
      case Opcode::HaltTop:
        if (stack.empty()) return std::nullopt;
        return static_cast<std::uint32_t>(stack.back() % max_action);
    }
  }
  return std::nullopt;  // no HALT_TOP executed
}

AgentBehavior program_agent(const AgentProgram& program, std::uint32_t max_action,
                            std::uint32_t fuel) {
  auto empty = std::make_shared<ActionDistribution>();
  empty->finalize();
  DistPtr frozen = empty;
  auto prog = std::make_shared<const AgentProgram>(program);
  return AgentBehavior::semi([prog, max_action, fuel, frozen](const History& h) -> DistPtr {
    auto a = run_program(*prog, h, max_action, fuel);
    if (!a) return frozen;
    return std::make_shared<const ActionDistribution>(ActionDistribution::point(*a));
  });
}

AgentSpace AgentSpace::all() { return AgentSpace{}; }

AgentSpace AgentSpace::enumerated(std::vector<std::string> program_bits) {
  std::unordered_set<std::string> seen;
  for (const auto& b : program_bits) {
    if (!seen.insert(b).second)
      throw ConfigInvalid("duplicate program in enumerated agent space");
  }
  AgentSpace s;
  s.kind = Kind::Enumerated;
  s.members = std::move(program_bits);
  return s;
}

AgentSpace AgentSpace::filtered(std::function<bool(const AgentProgram&)> pred) {
  AgentSpace s;
  s.kind = Kind::Filtered;
  s.predicate = std::move(pred);
  return s;
}

bool AgentSpace::contains(const AgentProgram& p) const {
  switch (kind) {
    case Kind::All:
      return true;
    case Kind::Enumerated: {
      const std::string bits = p.to_bits();
      return std::find(members.begin(), members.end(), bits) != members.end();
    }
    case Kind::Filtered:
      return predicate(p);
  }
  return false;
}

namespace {

bool gen_interior(std::uint32_t remaining, AgentProgram& partial,
                  const std::function<bool(const AgentProgram&)>& fn) {
  if (remaining == 0) {
    partial.code.push_back({Opcode::HaltTop, 0});
    partial.complete = true;
    const bool keep_going = fn(partial);
    partial.code.pop_back();
    return keep_going;
  }
  for (const OpcodeInfo& info : kInterior) {
    if (info.length > remaining || !fillable(remaining - info.length)) continue;
    if (info.op == Opcode::Const) {
      for (std::uint8_t k = 0; k < 16; ++k) {
        partial.code.push_back({Opcode::Const, k});
        const bool keep_going = gen_interior(remaining - info.length, partial, fn);
        partial.code.pop_back();
        if (!keep_going) return false;
      }
    } else {
      partial.code.push_back({info.op, 0});
      const bool keep_going = gen_interior(remaining - info.length, partial, fn);
      partial.code.pop_back();
      if (!keep_going) return false;
    }
  }
  return true;
}

}  // namespace

void for_each_program(std::uint32_t max_bits,
                      const std::function<bool(const AgentProgram&)>& fn) {
  for (std::uint32_t len = kHaltBits; len <= max_bits; ++len) {
    const std::uint32_t interior = len - kHaltBits;
    if (!fillable(interior)) continue;
    AgentProgram partial;
    partial.bit_length = len;
    if (!gen_interior(interior, partial, fn)) return;
  }
}

std::vector<AgentProgram> enumerate_programs(std::uint32_t max_bits) {
  std::vector<AgentProgram> out;
  for_each_program(max_bits, [&](const AgentProgram& p) {
    out.push_back(p);
    return true;
  });
  return out;
}

std::optional<SearchResult> min_winning_description(
    const EnvironmentBehavior& env, const GameConfig& cfg, std::uint32_t max_bits,
    const Rat& threshold, const AgentSpace& space, std::uint32_t fuel, int jobs) {
  if (threshold < 0 || threshold >= 1)
    throw ConfigInvalid("search threshold must lie in [0, 1)");
  if (jobs == 1) {
    std::optional<SearchResult> found;
    for_each_program(max_bits, [&](const AgentProgram& p) {
      if (!space.contains(p)) return true;
      if (exact_win_prob(program_agent(p, cfg.max_action, fuel), env, cfg) > threshold) {
        found = SearchResult{p, p.bit_length};
        return false;
      }
      return true;
    });
    return found;
  }

  // Parallel variant: evaluate candidates in enumeration order, merge to the
  // earliest winner. Splitting by candidate index keeps the result identical
  // to the serial reference.
  std::vector<AgentProgram> candidates;
  for_each_program(max_bits, [&](const AgentProgram& p) {
    if (space.contains(p)) candidates.push_back(p);
    return true;
  });
  const std::int64_t n = static_cast<std::int64_t>(candidates.size());
  std::int64_t best = n;
#pragma omp parallel num_threads(jobs > 0 ? jobs : omp_get_max_threads())
  {
#pragma omp for schedule(dynamic, 64)
    for (std::int64_t i = 0; i < n; ++i) {
      std::int64_t current;
#pragma omp atomic read
      current = best;
      if (i >= current) continue;
      if (exact_win_prob(program_agent(candidates[i], cfg.max_action, fuel), env, cfg) >
          threshold) {
#pragma omp critical
        {
          if (i < best) best = i;
        }
      }
    }
  }
  if (best == n) return std::nullopt;
  return SearchResult{candidates[best], candidates[best].bit_length};
}

nlohmann::json XiReport::to_json() const {
  nlohmann::json contribs = nlohmann::json::array();
  for (const auto& c : contributions) {
    contribs.push_back({{"bits", c.program.to_bits()},
                        {"hex", c.program.to_hex()},
                        {"mnemonics", c.program.mnemonics()},
                        {"bit_length", c.program.bit_length},
                        {"win_prob", rat_to_string(c.win_prob)},
                        {"contribution", rat_to_string(c.contribution)}});
  }
  nlohmann::json j{{"budget_bits", budget_bits},
                   {"mass", rat_to_string(mass)},
                   {"contributions", std::move(contribs)}};
  if (xi) {
    j["xi"] = *xi;
  } else {
    j["xi"] = "inf";
  }
  return j;
}

XiReport xi_proxy(const EnvironmentBehavior& env, const GameConfig& cfg,
                  std::uint32_t max_bits, std::uint32_t fuel, int jobs) {
  XiReport report;
  report.budget_bits = max_bits;
  report.mass = 0;

  std::vector<AgentProgram> programs = enumerate_programs(max_bits);
  std::vector<Rat> wins(programs.size(), Rat(0));
  const std::int64_t n = static_cast<std::int64_t>(programs.size());
  if (jobs == 1) {
    for (std::int64_t i = 0; i < n; ++i)
      wins[i] = exact_win_prob(program_agent(programs[i], cfg.max_action, fuel), env, cfg);
  } else {
#pragma omp parallel for schedule(dynamic, 64) \
    num_threads(jobs > 0 ? jobs : omp_get_max_threads())
    for (std::int64_t i = 0; i < n; ++i)
      wins[i] = exact_win_prob(program_agent(programs[i], cfg.max_action, fuel), env, cfg);
  }

  for (std::size_t i = 0; i < programs.size(); ++i) {
    if (wins[i] == 0) continue;
    const Rat contribution = pow2_inverse(programs[i].bit_length) * wins[i];
    report.mass += contribution;
    report.contributions.push_back({programs[i], wins[i], contribution});
  }
  if (report.mass > 0) report.xi = ceil_neg_log2(report.mass);
  return report;
}

}  // namespace winhalt
