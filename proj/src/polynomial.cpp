#include "opf/polynomial.hpp"

#include <numeric>

namespace opf {

int Monomial::degree() const {
  return std::accumulate(exponents.begin(), exponents.end(), 0);
}

Monomial Monomial::unit(int num_vars, int var, int power) {
  Monomial m(num_vars);
  m.exponents.at(static_cast<std::size_t>(var)) = static_cast<std::uint8_t>(power);
  return m;
}

Monomial Monomial::operator*(const Monomial& other) const {
  if (other.exponents.size() != exponents.size()) throw std::invalid_argument("monomial arity mismatch");
  Monomial out = *this;
  for (std::size_t i = 0; i < exponents.size(); ++i) out.exponents[i] += other.exponents[i];
  return out;
}

}  // namespace opf
