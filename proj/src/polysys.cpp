#include "opf/polysys.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace opf {

namespace {

class Builder {
 public:
  explicit Builder(const VoltageVariables& vars) : vars_(vars) {}

  RealPolynomial zero() const { return RealPolynomial(vars_.num_vars); }

  // coef * x_a * x_b, skipping identically-zero components.
  void product(RealPolynomial& p, double coef, int a, int b) const {
    if (coef == 0.0 || a < 0 || b < 0) return;
    Monomial m(vars_.num_vars);
    m.exponents[a] += 1;
    m.exponents[b] += 1;
    p.add_term(m, coef);
  }

  // coef * (vd_i vd_k + vq_i vq_k)
  void re(RealPolynomial& p, double coef, int i, int k) const {
    product(p, coef, vars_.vd[i], vars_.vd[k]);
    product(p, coef, vars_.vq[i], vars_.vq[k]);
  }

  // coef * (vd_i vq_k - vq_i vd_k)
  void im(RealPolynomial& p, double coef, int i, int k) const {
    product(p, coef, vars_.vd[i], vars_.vq[k]);
    product(p, -coef, vars_.vq[i], vars_.vd[k]);
  }

 private:
  const VoltageVariables& vars_;
};

}  // namespace

VoltagePolynomials voltage_polynomials(const NetworkCase& c, const AdmittanceMatrix& y,
                                       const VoltageVariables& vars) {
  const int n = c.n_bus();
  if (static_cast<int>(vars.vd.size()) != n || static_cast<int>(vars.vq.size()) != n)
    throw std::invalid_argument("voltage variable map does not match bus count");
  Builder bld(vars);
  VoltagePolynomials out;
  for (int i = 0; i < n; ++i) {
    RealPolynomial p = bld.zero(), q = bld.zero(), v = bld.zero();
    p.add_term(Monomial(vars.num_vars), c.buses[i].p_load);
    q.add_term(Monomial(vars.num_vars), c.buses[i].q_load);
    for (int k = 0; k < n; ++k) {
      const double g = y.g(i, k), b = y.b(i, k);
      if (g == 0.0 && b == 0.0) continue;
      bld.re(p, g, i, k);
      bld.im(p, -b, i, k);
      bld.im(q, -g, i, k);
      bld.re(q, -b, i, k);
    }
    bld.re(v, 1.0, i, i);
    out.p.push_back(std::move(p));
    out.q.push_back(std::move(q));
    out.v.push_back(std::move(v));
  }
  for (const auto& br : c.branches) {
    const double g = br.g(), b = br.b(), bsh = br.b_sh;
    const double y2 = g * g + b * b;
    std::array<RealPolynomial, 2> fp{bld.zero(), bld.zero()}, fq = fp, fs = fp, fi = fp;
    for (int dir = 0; dir < 2; ++dir) {
      const int l = dir == 0 ? br.from : br.to;
      const int m = dir == 0 ? br.to : br.from;
      bld.re(fp[dir], g, l, l);
      bld.re(fp[dir], -g, l, m);
      bld.im(fp[dir], b, l, m);
      bld.re(fq[dir], -(b + 0.5 * bsh), l, l);
      bld.re(fq[dir], b, l, m);
      bld.im(fq[dir], g, l, m);
      fs[dir] = fp[dir] * fp[dir] + fq[dir] * fq[dir];
      bld.re(fi[dir], y2, m, m);
      bld.re(fi[dir], -b * bsh - 2.0 * y2, l, m);
      bld.re(fi[dir], y2 + b * bsh + 0.25 * bsh * bsh, l, l);
      bld.im(fi[dir], -bsh * g, l, m);
    }
    out.flow_p.push_back(std::move(fp));
    out.flow_q.push_back(std::move(fq));
    out.flow_s.push_back(std::move(fs));
    out.current.push_back(std::move(fi));
  }
  return out;
}

ParameterizedSystem build_pf_system(const NetworkCase& c, const AdmittanceMatrix& y, int slack) {
  const int n = c.n_bus();
  if (slack < 0 || slack >= n || !c.is_generator(slack))
    throw std::invalid_argument("slack bus " + std::to_string(slack) + " is not a generator bus");

  ParameterizedSystem sys;
  sys.slack = slack;
  sys.num_unknowns = 2 * n - 2;

  std::vector<int> others;
  for (int i = 0; i < n; ++i)
    if (i != slack) others.push_back(i);
  std::vector<int> gens;
  for (int i : others)
    if (c.is_generator(i)) gens.push_back(i);
  const int ng = static_cast<int>(gens.size());
  sys.num_params = 2 * ng + 1;

  VoltageVariables vars;
  vars.num_vars = sys.num_vars();
  vars.vd.assign(n, -1);
  vars.vq.assign(n, -1);
  const int half = n - 1;
  for (int k = 0; k < half; ++k) {
    vars.vd[others[k]] = k;
    vars.vq[others[k]] = half + k;
    sys.unknown_map.push_back({others[k], VoltagePart::kReal});
  }
  for (int k = 0; k < half; ++k) sys.unknown_map.push_back({others[k], VoltagePart::kImag});
  const int slack_param = sys.num_unknowns + 2 * ng;
  vars.vd[slack] = slack_param;

  const VoltagePolynomials vp = voltage_polynomials(c, y, vars);

  sys.param_map.resize(sys.num_params);
  for (int i : others) {
    RealPolynomial e1 = vp.p[i];
    RealPolynomial e2 = c.is_generator(i) ? vp.v[i] : vp.q[i];
    if (c.is_generator(i)) {
      const int g = static_cast<int>(std::find(gens.begin(), gens.end(), i) - gens.begin());
      const int pp = sys.num_unknowns + g, pv = sys.num_unknowns + ng + g;
      e1 -= RealPolynomial::variable(vars.num_vars, pp);
      e2 -= RealPolynomial::variable(vars.num_vars, pv);
      const int eq = static_cast<int>(sys.equations.size());
      sys.param_map[g] = {eq, ParamRole::kActivePower, i};
      sys.param_map[ng + g] = {eq + 1, ParamRole::kVoltageSquared, i};
    }
    sys.equations.push_back(e1.cast<Complex>());
    sys.equations.push_back(e2.cast<Complex>());
  }
  sys.param_map[2 * ng] = {-1, ParamRole::kSlackVoltage, slack};
  return sys;
}

Eigen::VectorXcd ParameterizedSystem::params_for(const Eigen::VectorXd& p_set,
                                                 const Eigen::VectorXd& v_set) const {
  Eigen::VectorXcd out(num_params);
  for (int k = 0; k < num_params; ++k) {
    const ParamSlot& s = param_map[k];
    switch (s.role) {
      case ParamRole::kActivePower:
        out(k) = p_set(s.bus);
        break;
      case ParamRole::kVoltageSquared:
        out(k) = v_set(s.bus) * v_set(s.bus);
        break;
      case ParamRole::kSlackVoltage:
        out(k) = v_set(s.bus);
        break;
    }
  }
  return out;
}

Eigen::VectorXcd ParameterizedSystem::unknowns_for(const VoltagePoint& v) const {
  Eigen::VectorXcd x(num_unknowns);
  for (int k = 0; k < num_unknowns; ++k) {
    const UnknownSlot& s = unknown_map[k];
    x(k) = s.part == VoltagePart::kReal ? v.vd(s.bus) : v.vq(s.bus);
  }
  return x;
}

VoltagePoint ParameterizedSystem::voltage_point(const Eigen::VectorXd& x, double slack_v) const {
  const int n = num_unknowns / 2 + 1;
  VoltagePoint v{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  v.vd(slack) = slack_v;
  for (int k = 0; k < num_unknowns; ++k) {
    const UnknownSlot& s = unknown_map[k];
    (s.part == VoltagePart::kReal ? v.vd : v.vq)(s.bus) = x(k);
  }
  return v;
}

PolynomialSystem substitute_parameters(const ParameterizedSystem& sys, const Eigen::VectorXcd& params) {
  if (params.size() != sys.num_params)
    throw std::invalid_argument("expected " + std::to_string(sys.num_params) + " parameters, got " +
                                std::to_string(params.size()));
  PolynomialSystem out;
  out.num_vars = sys.num_unknowns;
  for (const auto& eq : sys.equations) {
    ComplexPolynomial p(sys.num_unknowns);
    for (const auto& [m, coef] : eq.terms()) {
      Complex value = coef;
      Monomial reduced(sys.num_unknowns);
      for (int i = 0; i < sys.num_vars(); ++i) {
        const int e = m.exponents[i];
        if (i < sys.num_unknowns)
          reduced.exponents[i] = static_cast<std::uint8_t>(e);
        else
          for (int k = 0; k < e; ++k) value *= params(i - sys.num_unknowns);
      }
      p.add_term(reduced, value);
    }
    out.equations.push_back(std::move(p));
  }
  return out;
}

CompiledPolynomials::CompiledPolynomials(const std::vector<ComplexPolynomial>& polys, int num_vars)
    : rows_(static_cast<int>(polys.size())), num_vars_(num_vars) {
  for (int r = 0; r < rows_; ++r) {
    if (polys[r].num_vars() != num_vars) throw std::invalid_argument("polynomial arity mismatch");
    for (const auto& [m, coef] : polys[r].terms()) {
      Term t{r, coef, static_cast<int>(factors_.size()), 0};
      for (int i = 0; i < num_vars; ++i)
        if (m.exponents[i]) {
          factors_.push_back({i, m.exponents[i]});
          ++t.num_factors;
        }
      terms_.push_back(t);
    }
  }
}

namespace {

inline Complex ipow(Complex x, int p) {
  Complex r = x;
  for (int k = 1; k < p; ++k) r *= x;
  return r;
}

}  // namespace

void CompiledPolynomials::evaluate(const Complex* x, Complex* f) const {
  std::fill(f, f + rows_, Complex(0.0));
  for (const Term& t : terms_) {
    Complex v = t.coef;
    for (int k = 0; k < t.num_factors; ++k) {
      const Factor& fa = factors_[t.first_factor + k];
      v *= ipow(x[fa.var], fa.power);
    }
    f[t.row] += v;
  }
}

void CompiledPolynomials::evaluate(const Complex* x, Complex* f, Eigen::MatrixXcd& jac) const {
  std::fill(f, f + rows_, Complex(0.0));
  jac.setZero(rows_, num_vars_);
  Complex pw[16];
  for (const Term& t : terms_) {
    const Factor* fa = factors_.data() + t.first_factor;
    if (t.num_factors > 16) throw std::logic_error("monomial has too many factors");
    Complex v = t.coef;
    for (int k = 0; k < t.num_factors; ++k) {
      pw[k] = ipow(x[fa[k].var], fa[k].power);
      v *= pw[k];
    }
    f[t.row] += v;
    for (int k = 0; k < t.num_factors; ++k) {
      Complex d = t.coef * static_cast<double>(fa[k].power);
      if (fa[k].power > 1) d *= ipow(x[fa[k].var], fa[k].power - 1);
      for (int j = 0; j < t.num_factors; ++j)
        if (j != k) d *= pw[j];
      jac(t.row, fa[k].var) += d;
    }
  }
}

SystemEvaluation eval_and_jacobian(const PolynomialSystem& sys, const Eigen::VectorXcd& x) {
  if (x.size() != sys.num_vars) throw std::invalid_argument("point length does not match unknown count");
  CompiledPolynomials cp(sys.equations, sys.num_vars);
  SystemEvaluation out{Eigen::VectorXcd(sys.size()), Eigen::MatrixXcd()};
  cp.evaluate(x.data(), out.residual.data(), out.jacobian);
  return out;
}

std::vector<ComplexPolynomial> homogenize(const std::vector<ComplexPolynomial>& polys, int num_homog,
                                          int degree) {
  std::vector<ComplexPolynomial> out;
  for (const auto& p : polys) {
    const int nv = p.num_vars();
    ComplexPolynomial h(nv + 1);
    for (const auto& [m, coef] : p.terms()) {
      Monomial r(nv + 1);
      int d = 0;
      for (int i = 0; i < nv; ++i) {
        const int dst = i < num_homog ? i : i + 1;
        r.exponents[dst] = m.exponents[i];
        if (i < num_homog) d += m.exponents[i];
      }
      if (d > degree) throw std::invalid_argument("polynomial exceeds homogenization degree");
      r.exponents[num_homog] = static_cast<std::uint8_t>(degree - d);
      h.add_term(r, coef);
    }
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace opf
