#pragma once

#include "winhalt/engine.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace winhalt {

// Fixed prefix-free bytecode whose bit length is the description-length
// proxy. Opcode encodings:
//   CONST(k)       00 + k in 4 bits
//   LAST_RESPONSE  01
//   TURN_INDEX     100
//   ADD_MOD        101
//   XOR            110
//   DUP            1110
//   HALT_TOP       1111
// A string is a complete program iff it parses exactly and its single
// HALT_TOP is the final opcode; complete programs form a prefix-free set and
// are the unit of enumeration and of the 2^-length mass.
enum class Opcode : std::uint8_t {
  Const,
  LastResponse,
  TurnIndex,
  AddMod,
  Xor,
  Dup,
  HaltTop,
};

struct Instruction {
  Opcode op = Opcode::Const;
  std::uint8_t arg = 0;  // CONST payload
};

struct AgentProgram {
  std::vector<Instruction> code;
  std::uint32_t bit_length = 0;
  bool complete = false;

  std::string to_bits() const;       // "0"/"1" string
  std::string to_hex() const;        // bits packed MSB-first, zero-padded to bytes
  std::string mnemonics() const;     // e.g. "CONST(7) HALT_TOP"

  friend bool operator==(const AgentProgram& a, const AgentProgram& b) {
    return a.to_bits() == b.to_bits();
  }
};

// Parses a complete encoding. Throws TruncatedCode when the bits end inside
// an opcode and UnknownOpcode on a non-binary character.
AgentProgram decode_program(std::string_view bits);

inline constexpr std::uint32_t kDefaultFuel = 256;

// Stack execution; nullopt is Freeze (fuel exhausted, stack underflow, or no
// HALT_TOP executed). LAST_RESPONSE pushes the latest environment number (0
// at the start); TURN_INDEX pushes the number of completed rounds.
std::optional<std::uint32_t> run_program(const AgentProgram& program, const History& history,
                                         std::uint32_t max_action,
                                         std::uint32_t fuel = kDefaultFuel);

// The program as a semi agent: a point mass on its action, or an empty
// distribution (pure freeze) for rounds where execution freezes.
AgentBehavior program_agent(const AgentProgram& program, std::uint32_t max_action,
                            std::uint32_t fuel = kDefaultFuel);

struct AgentSpace {
  enum class Kind { All, Enumerated, Filtered };
  Kind kind = Kind::All;
  std::vector<std::string> members;  // bit strings, Enumerated only
  std::function<bool(const AgentProgram&)> predicate;

  static AgentSpace all();
  // Throws ConfigInvalid on duplicate members.
  static AgentSpace enumerated(std::vector<std::string> program_bits);
  static AgentSpace filtered(std::function<bool(const AgentProgram&)> pred);

  bool contains(const AgentProgram& p) const;
};

// Calls fn for every complete program of at most max_bits bits, shortest
// first, lexicographic within a length; fn returns false to stop early.
void for_each_program(std::uint32_t max_bits,
                      const std::function<bool(const AgentProgram&)>& fn);
std::vector<AgentProgram> enumerate_programs(std::uint32_t max_bits);

struct SearchResult {
  AgentProgram program;
  std::uint32_t bits = 0;
};

// First program in (length, lex) order within `space` whose deterministic
// play beats `threshold` exactly; nullopt when none exists within the
// budget. jobs = 1 runs the serial reference; parallel runs return the same
// winner because candidates merge in enumeration order.
std::optional<SearchResult> min_winning_description(
    const EnvironmentBehavior& env, const GameConfig& cfg, std::uint32_t max_bits,
    const Rat& threshold, const AgentSpace& space = AgentSpace::all(),
    std::uint32_t fuel = kDefaultFuel, int jobs = 0);

struct XiReport {
  std::uint32_t budget_bits = 0;
  Rat mass;                                  // sum of 2^-len * win over programs
  std::optional<std::uint32_t> xi;           // nullopt = infinite (mass 0)
  struct Contribution {
    AgentProgram program;
    Rat win_prob;
    Rat contribution;  // 2^-bit_length * win_prob
  };
  std::vector<Contribution> contributions;   // winners only, enumeration order

  nlohmann::json to_json() const;
};

XiReport xi_proxy(const EnvironmentBehavior& env, const GameConfig& cfg,
                  std::uint32_t max_bits, std::uint32_t fuel = kDefaultFuel, int jobs = 0);

}  // namespace winhalt
