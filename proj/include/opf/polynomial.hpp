#pragma once

// Sparse multivariate polynomials over real or complex coefficients.

#include <complex>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

namespace opf {

using Complex = std::complex<double>;

struct Monomial {
  std::vector<std::uint8_t> exponents;

  Monomial() = default;
  explicit Monomial(int num_vars) : exponents(static_cast<std::size_t>(num_vars), 0) {}
  Monomial(std::initializer_list<std::uint8_t> e) : exponents(e) {}

  int num_vars() const { return static_cast<int>(exponents.size()); }
  int degree() const;
  bool is_constant() const { return degree() == 0; }

  static Monomial unit(int num_vars, int var, int power = 1);

  Monomial operator*(const Monomial& other) const;
  auto operator<=>(const Monomial&) const = default;
  bool operator==(const Monomial&) const = default;
};

template <typename T>
class Polynomial {
 public:
  using Terms = std::map<Monomial, T>;

  explicit Polynomial(int num_vars = 0) : num_vars_(num_vars) {}

  static Polynomial constant(int num_vars, T value) {
    Polynomial p(num_vars);
    p.add_term(Monomial(num_vars), value);
    return p;
  }
  static Polynomial variable(int num_vars, int var, T coef = T(1)) {
    Polynomial p(num_vars);
    p.add_term(Monomial::unit(num_vars, var), coef);
    return p;
  }

  int num_vars() const { return num_vars_; }
  const Terms& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }

  void add_term(const Monomial& m, T coef) {
    if (m.num_vars() != num_vars_) throw std::invalid_argument("monomial arity mismatch");
    if (coef == T(0)) return;
    auto [it, inserted] = terms_.emplace(m, coef);
    if (!inserted) {
      it->second += coef;
      if (it->second == T(0)) terms_.erase(it);
    }
  }

  T coefficient(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? T(0) : it->second;
  }

  int degree() const {
    int d = 0;
    for (const auto& [m, c] : terms_) d = std::max(d, m.degree());
    return d;
  }

  /// Drops coefficients with magnitude <= tol.
  void normalize(double tol = 0.0) {
    for (auto it = terms_.begin(); it != terms_.end();) {
      if (std::abs(it->second) <= tol)
        it = terms_.erase(it);
      else
        ++it;
    }
  }

  T evaluate(std::span<const T> x) const {
    T total(0);
    for (const auto& [m, c] : terms_) {
      T v = c;
      for (int i = 0; i < num_vars_; ++i)
        for (int e = 0; e < m.exponents[i]; ++e) v *= x[i];
      total += v;
    }
    return total;
  }

  Polynomial& operator+=(const Polynomial& o) {
    check(o);
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
  }
  Polynomial& operator-=(const Polynomial& o) {
    check(o);
    for (const auto& [m, c] : o.terms_) add_term(m, -c);
    return *this;
  }
  Polynomial& operator*=(T s) {
    if (s == T(0)) {
      terms_.clear();
      return *this;
    }
    for (auto& [m, c] : terms_) c *= s;
    return *this;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, T s) { return a *= s; }
  friend Polynomial operator*(T s, Polynomial a) { return a *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    a.check(b);
    Polynomial out(a.num_vars_);
    for (const auto& [ma, ca] : a.terms_)
      for (const auto& [mb, cb] : b.terms_) out.add_term(ma * mb, ca * cb);
    return out;
  }

  /// Same polynomial over a larger variable set; variable i maps to map[i].
  Polynomial remap(int new_num_vars, std::span<const int> map) const {
    Polynomial out(new_num_vars);
    for (const auto& [m, c] : terms_) {
      Monomial r(new_num_vars);
      for (int i = 0; i < num_vars_; ++i)
        if (m.exponents[i]) r.exponents[map[i]] += m.exponents[i];
      out.add_term(r, c);
    }
    return out;
  }

  template <typename U>
  Polynomial<U> cast() const {
    Polynomial<U> out(num_vars_);
    for (const auto& [m, c] : terms_) out.add_term(m, U(c));
    return out;
  }

 private:
  void check(const Polynomial& o) const {
    if (o.num_vars_ != num_vars_) throw std::invalid_argument("polynomial arity mismatch");
  }

  int num_vars_;
  Terms terms_;
};

using RealPolynomial = Polynomial<double>;
using ComplexPolynomial = Polynomial<Complex>;

}  // namespace opf
