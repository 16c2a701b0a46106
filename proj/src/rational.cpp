#include "winhalt/rational.hpp"

#include "winhalt/errors.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <sstream>

namespace winhalt {

std::string rat_to_string(const Rat& r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

Rat rat_from_string(const std::string& s) {
  if (s.empty()) throw ConfigInvalid("empty rational literal");
  auto parse_int = [](const std::string& t) {
    if (t.empty()) throw ConfigInvalid("empty integer in rational literal");
    std::size_t i = (t[0] == '-' || t[0] == '+') ? 1 : 0;
    if (i == t.size()) throw ConfigInvalid("sign without digits in rational literal");
    for (; i < t.size(); ++i) {
      if (t[i] < '0' || t[i] > '9')
        throw ConfigInvalid("bad character in rational literal: " + t);
    }
    return BigInt(t);
  };
  auto slash = s.find('/');
  if (slash == std::string::npos) return Rat(parse_int(s));
  BigInt num = parse_int(s.substr(0, slash));
  BigInt den = parse_int(s.substr(slash + 1));
  if (den == 0) throw ConfigInvalid("zero denominator in rational literal: " + s);
  return Rat(num, den);
}

Rat pow2_inverse(std::uint32_t k) { return Rat(BigInt(1), BigInt(1) << k); }

std::uint32_t ceil_neg_log2(const Rat& mass) {
  if (mass <= 0 || mass > 1) throw Error("ceil_neg_log2 requires mass in (0,1]");
  const BigInt num = boost::multiprecision::numerator(mass);
  const BigInt den = boost::multiprecision::denominator(mass);
  // Smallest k with num * 2^k >= den.
  std::uint32_t k = 0;
  BigInt lhs = num;
  while (lhs < den) {
    lhs <<= 1;
    ++k;
  }
  return k;
}

double rat_to_double(const Rat& r) { return r.convert_to<double>(); }

Rat rat_from_double(double x) {
  // cpp_rational converts finite doubles exactly.
  return Rat(x);
}

}  // namespace winhalt
