#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>

namespace winhalt {

// All probabilities in the core are exact rationals; floats appear only in
// Monte-Carlo estimates and normal-distribution utilities.
using Rat = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// Renders "num/den" in lowest terms, or just "num" when den == 1.
std::string rat_to_string(const Rat& r);

// Accepts "num/den" or "num". Throws ConfigInvalid on malformed input.
Rat rat_from_string(const std::string& s);

// Exact value 2^-k.
Rat pow2_inverse(std::uint32_t k);

// Smallest k >= 0 with 2^-k <= mass. Requires 0 < mass <= 1.
std::uint32_t ceil_neg_log2(const Rat& mass);

double rat_to_double(const Rat& r);

// Exact conversion; every finite double is a dyadic rational.
Rat rat_from_double(double x);

}  // namespace winhalt
