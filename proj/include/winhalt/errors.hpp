#pragma once

#include <stdexcept>
#include <string>

namespace winhalt {

// Base class for all library errors so callers can catch the whole family.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidDistribution : Error {
  using Error::Error;
};
struct BudgetExceeded : Error {
  using Error::Error;
};
struct InsufficientMass : Error {
  using Error::Error;
};
struct NoWinnerFound : Error {
  using Error::Error;
};
struct ShapeMismatch : Error {
  using Error::Error;
};
struct Overflow : Error {
  using Error::Error;
};
struct TruncatedCode : Error {
  using Error::Error;
};
struct UnknownOpcode : Error {
  using Error::Error;
};
struct Bipartite : Error {
  using Error::Error;
};
struct InvalidDoor : Error {
  using Error::Error;
};
struct DegenerateGame : Error {
  using Error::Error;
};
struct ActionOutOfRange : Error {
  using Error::Error;
};
struct ConfigInvalid : Error {
  using Error::Error;
};

}  // namespace winhalt
