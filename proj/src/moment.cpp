#include "opf/moment.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace opf {

namespace {

constexpr double kFaceRankTol = 1e-10;

// Exponent vectors of total degree d in descending lex order.
void monomials_of_degree(int num_vars, int d, std::vector<Monomial>& out) {
  Monomial m(num_vars);
  std::function<void(int, int)> rec = [&](int var, int left) {
    if (var == num_vars - 1) {
      m.exponents[var] = static_cast<std::uint8_t>(left);
      out.push_back(m);
      return;
    }
    for (int e = left; e >= 0; --e) {
      m.exponents[var] = static_cast<std::uint8_t>(e);
      rec(var + 1, left - e);
    }
    m.exponents[var] = 0;
  };
  if (num_vars == 0) {
    if (d == 0) out.push_back(m);
    return;
  }
  rec(0, d);
}

RealPolynomial monomial_poly(const Monomial& a) {
  RealPolynomial p(a.num_vars());
  p.add_term(a, 1.0);
  return p;
}

}  // namespace

MonomialBasis MonomialBasis::build(int num_vars, int order) {
  if (num_vars < 0 || order < 0) throw std::invalid_argument("negative basis size");
  MonomialBasis b;
  b.order = order;
  b.num_vars = num_vars;
  for (int d = 0; d <= order; ++d) monomials_of_degree(num_vars, d, b.entries);
  return b;
}

MomentIndex::MomentIndex(int num_vars, int order) : basis_(MonomialBasis::build(num_vars, order)) {
  for (int k = 0; k < basis_.size(); ++k) pos_.emplace(basis_.entries[k], k);
}

int MomentIndex::find(const Monomial& alpha) const {
  auto it = pos_.find(alpha);
  if (it == pos_.end()) throw std::out_of_range("monomial outside the moment index");
  return it->second;
}

LinearExpr linearize(const RealPolynomial& g, const MomentIndex& idx) {
  if (g.num_vars() != idx.num_vars()) throw std::invalid_argument("linearize: arity mismatch");
  LinearExpr e;
  for (const auto& [m, c] : g.terms()) {
    const int k = idx.find(m);
    if (k == 0)
      e.constant += c;
    else
      e.terms.emplace_back(k - 1, c);
  }
  return e;
}

LmiBlock build_moment_matrix(const MonomialBasis& basis, const MomentIndex& idx) {
  const int n = basis.size();
  LmiBlock blk(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const int k = idx.find(basis.entries[i] * basis.entries[j]);
      if (k == 0)
        blk.add_constant(i, j, 1.0);
      else
        blk.add_term(i, j, k - 1, 1.0);
    }
  return blk;
}

LmiBlock build_localizing(const RealPolynomial& g, const MonomialBasis& basis, const MomentIndex& idx) {
  if (g.degree() + 2 * basis.order > idx.max_degree())
    throw std::out_of_range("localizing matrix exceeds the moment index degree");
  const int n = basis.size();
  LmiBlock blk(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const Monomial shift = basis.entries[i] * basis.entries[j];
      for (const auto& [m, c] : g.terms()) {
        const int k = idx.find(m * shift);
        if (k == 0)
          blk.add_constant(i, j, c);
        else
          blk.add_term(i, j, k - 1, c);
      }
    }
  return blk;
}

VoltageVariables relaxation_variables(const NetworkCase& c) {
  const int n = c.n_bus();
  VoltageVariables v;
  v.vd.resize(n);
  v.vq.resize(n);
  int k = 0;
  for (int i = 0; i < n; ++i) v.vd[i] = k++;
  for (int i = 0; i < n; ++i) v.vq[i] = i == c.ref_bus ? -1 : k++;
  v.num_vars = k;
  return v;
}

RelaxationObjective RelaxationObjective::minimize(RealPolynomial p) {
  RelaxationObjective o;
  o.kind = Kind::kPolynomial;
  o.poly = std::move(p);
  return o;
}

RelaxationObjective RelaxationObjective::projection(std::vector<std::pair<int, double>> p_target,
                                                    std::vector<std::pair<int, double>> v_target,
                                                    double beta) {
  RelaxationObjective o;
  o.kind = Kind::kProjection;
  o.p_target = std::move(p_target);
  o.v_target = std::move(v_target);
  o.beta = beta;
  return o;
}

Eigen::MatrixXd MomentProblem::moment_matrix(const Eigen::VectorXd& y) const {
  return program.blocks[moment_block].value(y);
}

double MomentProblem::moment(const Eigen::VectorXd& y, const Monomial& alpha) const {
  const int k = index.find(alpha);
  return k == 0 ? 1.0 : y(k - 1);
}

MomentProblem assemble_relaxation(const NetworkCase& c, const AdmittanceMatrix& y, const BoundSet& bounds,
                                  int gamma, const RelaxationObjective& objective, double slack,
                                  const std::vector<ExtraConstraint>& extra) {
  if (gamma != 1 && gamma != 2) throw std::invalid_argument("relaxation order must be 1 or 2");
  if (static_cast<int>(bounds.bus.size()) != c.n_bus() || bounds.s_sq_max.size() != c.branches.size())
    throw std::invalid_argument("bound set does not match the case");

  MomentProblem mp;
  mp.order = gamma;
  mp.n_bus = c.n_bus();
  mp.ref_bus = c.ref_bus;
  mp.vars = relaxation_variables(c);
  const int nv = mp.vars.num_vars;
  mp.basis = MonomialBasis::build(nv, gamma);
  mp.index = MomentIndex(nv, 2 * gamma);
  auto& prog = mp.program;
  for (int k = 1; k < mp.index.size(); ++k) prog.add_var();

  const VoltagePolynomials vp = voltage_polynomials(c, y, mp.vars);
  const RealPolynomial one = RealPolynomial::constant(nv, 1.0);
  auto lin = [&](const RealPolynomial& g) { return linearize(g, mp.index); };

  mp.moment_block = static_cast<int>(prog.blocks.size());
  prog.add_block(build_moment_matrix(mp.basis, mp.index));

  // g >= 0, localized at the largest order the index admits.
  auto add_ineq = [&](const RealPolynomial& g) {
    const int loc = gamma - (g.degree() + 1) / 2;
    if (loc <= 0)
      prog.add_nonnegative(lin(g));
    else
      prog.add_block(build_localizing(g, MonomialBasis::build(nv, loc), mp.index));
  };
  // Coefficient vectors (over the basis) of products h = x^b g with g == 0.
  // The shifted equalities force M h = 0, so M lives on their complement.
  std::vector<Eigen::VectorXd> kernel;
  // g == 0 together with every shift that stays inside the index.
  auto add_eq = [&](const RealPolynomial& g) {
    std::vector<Monomial> shifts;
    for (int d = 0; d <= 2 * gamma - g.degree(); ++d) monomials_of_degree(nv, d, shifts);
    for (const auto& s : shifts) {
      const RealPolynomial h = g * monomial_poly(s);
      prog.add_equality(lin(h));
      if (h.degree() > gamma) continue;
      Eigen::VectorXd k = Eigen::VectorXd::Zero(mp.basis.size());
      for (const auto& [m, c] : h.terms()) k(mp.index.find(m)) += c;
      kernel.push_back(std::move(k));
    }
  };
  auto add_range = [&](const RealPolynomial& f, double lo, double hi) {
    if (lo == hi) {
      add_eq(f - one * lo);
      return;
    }
    if (std::isfinite(lo)) add_ineq(f - one * (lo - slack));
    if (std::isfinite(hi)) add_ineq(one * (hi + slack) - f);
  };

  for (int i = 0; i < c.n_bus(); ++i) {
    const auto& b = bounds.bus[i];
    add_range(vp.p[i], b.p_min, b.p_max);
    add_range(vp.q[i], b.q_min, b.q_max);
    add_range(vp.v[i], b.v_sq_min, b.v_sq_max);
  }
  for (std::size_t k = 0; k < c.branches.size(); ++k) {
    const double s2 = bounds.s_sq_max[k];
    if (!std::isfinite(s2)) continue;
    for (int d = 0; d < 2; ++d) {
      if (gamma == 1)
        prog.add_block(encode_soc(LinearExpr(std::sqrt(s2 + slack)), {lin(vp.flow_p[k][d]), lin(vp.flow_q[k][d])}));
      else
        add_ineq(one * (s2 + slack) - vp.flow_s[k][d]);
    }
  }
  for (const auto& e : extra) {
    if (e.g.num_vars() != nv) throw std::invalid_argument("extra constraint arity mismatch");
    if (e.equality)
      add_eq(e.g);
    else
      add_ineq(e.g);
  }

  if (!kernel.empty()) {
    const int n = mp.basis.size();
    Eigen::MatrixXd k(n, static_cast<int>(kernel.size()));
    for (std::size_t j = 0; j < kernel.size(); ++j) k.col(static_cast<int>(j)) = kernel[j].normalized();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(k);
    qr.setThreshold(kFaceRankTol);
    const int r = static_cast<int>(qr.rank());
    if (r > 0 && r < n) {
      const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
      prog.blocks[mp.moment_block].set_face(q.rightCols(n - r));
    }
  }

  LinearExpr obj;
  switch (objective.kind) {
    case RelaxationObjective::Kind::kCost:
      for (const auto& g : c.generators) {
        const RealPolynomial& p = vp.p[g.bus];
        obj += LinearExpr(g.c0) + g.c1 * lin(p);
        if (g.c2 == 0.0) continue;
        if (gamma == 1) {
          // t >= P^2 as [[t, P], [P, 1]] PSD.
          const int t = prog.add_var();
          LmiBlock blk(2);
          blk.add_term(0, 0, t, 1.0);
          blk.add(1, 0, lin(p));
          blk.add_constant(1, 1, 1.0);
          prog.add_block(std::move(blk));
          obj += LinearExpr::var(t, g.c2);
        } else {
          obj += g.c2 * lin(p * p);
        }
      }
      break;
    case RelaxationObjective::Kind::kPolynomial:
      if (objective.poly.num_vars() != nv) throw std::invalid_argument("objective arity mismatch");
      obj = lin(objective.poly);
      break;
    case RelaxationObjective::Kind::kProjection: {
      std::vector<RealPolynomial> r;
      for (const auto& [bus, p0] : objective.p_target) r.push_back(vp.p.at(bus) - one * p0);
      const double sb = std::sqrt(objective.beta);
      for (const auto& [bus, v0] : objective.v_target) r.push_back((vp.v.at(bus) - one * (v0 * v0)) * sb);
      if (gamma == 1) {
        // omega >= ||r||; the caller squares omega.
        const int w = prog.add_var();
        std::vector<LinearExpr> u;
        for (const auto& ri : r) u.push_back(lin(ri));
        prog.add_block(encode_soc(LinearExpr::var(w), u));
        obj = LinearExpr::var(w);
      } else {
        RealPolynomial sum(nv);
        for (const auto& ri : r) sum += ri * ri;
        obj = lin(sum);
      }
      break;
    }
  }
  prog.set_objective(obj);
  return mp;
}

RankInfo check_rank_and_extract(const Eigen::MatrixXd& moment_matrix, const VoltageVariables& vars,
                                int ref_bus, double rank_ratio_tol) {
  const int m = vars.num_vars;
  if (moment_matrix.rows() < m + 1) throw std::invalid_argument("moment matrix smaller than order one");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(moment_matrix.block(1, 1, m, m));
  RankInfo info;
  info.eigenvalues = es.eigenvalues().reverse();
  const double l1 = info.eigenvalues(0);
  if (!(l1 > 0.0)) return info;
  for (Eigen::Index k = 0; k < info.eigenvalues.size(); ++k)
    if (info.eigenvalues(k) > rank_ratio_tol * l1) ++info.numeric_rank;
  const double l2 = m > 1 ? std::max(0.0, info.eigenvalues(1)) : 0.0;
  if (l2 / l1 >= rank_ratio_tol) return info;

  Eigen::VectorXd x = std::sqrt(l1) * es.eigenvectors().col(m - 1);
  if (x(vars.vd[ref_bus]) < 0.0) x = -x;
  const int n = static_cast<int>(vars.vd.size());
  VoltagePoint v{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (int i = 0; i < n; ++i) {
    if (vars.vd[i] >= 0) v.vd(i) = x(vars.vd[i]);
    if (vars.vq[i] >= 0) v.vq(i) = x(vars.vq[i]);
  }
  info.extracted = v;
  return info;
}

RelaxationResult solve_relaxation(const MomentProblem& p, const SdpOptions& options, double rank_ratio_tol) {
  RelaxationResult r;
  r.solution = solve_cone_program(p.program, options);
  if (r.solution.y.size() == p.program.num_vars) {
    r.rank = check_rank_and_extract(p.moment_matrix(r.solution.y), p.vars, p.ref_bus, rank_ratio_tol);
    if (!r.optimal()) r.rank.extracted.reset();
  }
  return r;
}

}  // namespace opf
