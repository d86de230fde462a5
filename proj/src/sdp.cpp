#include "opf/sdp.hpp"


#include <Eigen/Sparse>
#include <cmath>
#include <map>
#include <stdexcept>

#include "opf/kernels.hpp"

namespace opf {

LinearExpr& LinearExpr::operator+=(const LinearExpr& o) {
  constant += o.constant;
  terms.insert(terms.end(), o.terms.begin(), o.terms.end());
  return *this;
}

LinearExpr& LinearExpr::operator*=(double s) {
  constant *= s;
  for (auto& t : terms) t.second *= s;
  return *this;
}

double LinearExpr::evaluate(const Eigen::VectorXd& y) const {
  double v = constant;
  for (const auto& [i, c] : terms) v += c * y(i);
  return v;
}

void LmiBlock::add_constant(int r, int c, double v) {
  if (r < c) std::swap(r, c);
  if (r >= dim_ || c < 0) throw std::out_of_range("block entry outside the block");
  if (v != 0.0) entries_.push_back({r, c, -1, v});
}

void LmiBlock::add_term(int r, int c, int var, double coef) {
  if (r < c) std::swap(r, c);
  if (r >= dim_ || c < 0) throw std::out_of_range("block entry outside the block");
  if (var < 0) throw std::out_of_range("negative variable index");
  if (coef != 0.0) entries_.push_back({r, c, var, coef});
}

void LmiBlock::add(int r, int c, const LinearExpr& e) {
  add_constant(r, c, e.constant);
  for (const auto& [var, coef] : e.terms) add_term(r, c, var, coef);
}

Eigen::MatrixXd LmiBlock::value(const Eigen::VectorXd& y) const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim_, dim_);
  for (const auto& e : entries_) {
    const double v = e.var < 0 ? e.value : e.value * y(e.var);
    m(e.row, e.col) += v;
    if (e.row != e.col) m(e.col, e.row) += v;
  }
  return m;
}

void LmiBlock::set_face(Eigen::MatrixXd q) {
  if (q.rows() != dim_ || q.cols() < 1 || q.cols() > dim_) throw std::invalid_argument("face basis has the wrong shape");
  if (dim_ == 1) throw std::invalid_argument("a 1x1 block has no proper face");
  face_ = std::move(q);
}

int ConeProgram::add_var() {
  objective.conservativeResize(num_vars + 1);
  objective(num_vars) = 0.0;
  return num_vars++;
}

void ConeProgram::set_objective(const LinearExpr& e) {
  objective = Eigen::VectorXd::Zero(num_vars);
  objective_constant = e.constant;
  for (const auto& [i, c] : e.terms) objective(i) += c;
}

void ConeProgram::add_nonnegative(const LinearExpr& e) {
  LmiBlock b(1);
  b.add(0, 0, e);
  blocks.push_back(std::move(b));
}

LmiBlock encode_soc(const LinearExpr& t, const std::vector<LinearExpr>& u) {
  const int k = static_cast<int>(u.size());
  LmiBlock b(k + 1);
  b.add(0, 0, t);
  for (int i = 0; i < k; ++i) {
    b.add(i + 1, 0, u[i]);
    b.add(i + 1, i + 1, t);
  }
  return b;
}

const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::kOptimal:
      return "optimal";
    case SdpStatus::kInfeasible:
      return "infeasible-certificate";
    case SdpStatus::kMaxIters:
      return "max-iters";
    case SdpStatus::kNumericalFailure:
      return "numerical-failure";
  }
  return "?";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

constexpr double kInfeasibleObjective = 1e8;
constexpr double kStepFraction = 0.95;
constexpr int kRefinePasses = 2;
constexpr double kSnapPrimal = 1e-6;
constexpr double kPrimalFreeze = 0.5;
constexpr int kBacktracks = 20;
constexpr double kBacktrackFactor = 0.9;
constexpr double kLostAccuracyBest = 1e-4;
constexpr double kLostAccuracyFactor = 1e3;

// One PSD block with its coefficient matrices grouped by variable. With a
// face basis Q the cone variable is Q' F(y) Q of size n; coefficients stay in
// the full space of size nf.
struct SdpBlock {
  int n = 0, nf = 0;
  MatrixXd q;  // nf x n, empty when n == nf
  MatrixXd f0;
  std::vector<int> vars;   // distinct variables, ascending
  std::vector<int> start;  // per vars[k]: entries [start[k], start[k+1])
  std::vector<int> ep, eq;
  std::vector<double> ev;
  // tr(F_i M) = gather_dot(w, flat, M) for symmetric M (column major).
  std::vector<double> w;
  std::vector<std::int32_t> flat;

  double trace_with(int k, const MatrixXd& m) const {
    const int b = start[k], e = start[k + 1];
    return simd::gather_dot(std::span(w.data() + b, e - b), std::span(flat.data() + b, e - b), m.data());
  }

  void add_scaled(int k, double s, MatrixXd& m) const {
    for (int t = start[k]; t < start[k + 1]; ++t) {
      m(ep[t], eq[t]) += s * ev[t];
      if (ep[t] != eq[t]) m(eq[t], ep[t]) += s * ev[t];
    }
  }

  MatrixXd lift(const MatrixXd& m) const { return q.size() ? MatrixXd(q * m * q.transpose()) : m; }
  MatrixXd reduce(const MatrixXd& m) const { return q.size() ? MatrixXd(q.transpose() * m * q) : m; }

  MatrixXd value(const VectorXd& y) const {
    MatrixXd m = f0;
    for (std::size_t k = 0; k < vars.size(); ++k) add_scaled(static_cast<int>(k), y(vars[k]), m);
    return reduce(m);
  }
};

SdpBlock make_block(const LmiBlock& b) {
  SdpBlock out;
  out.nf = b.dim();
  out.q = b.face();
  out.n = out.q.size() ? static_cast<int>(out.q.cols()) : out.nf;
  out.f0 = MatrixXd::Zero(out.nf, out.nf);
  std::map<int, std::map<std::pair<int, int>, double>> by_var;
  for (const auto& e : b.entries()) {
    if (e.var < 0) {
      out.f0(e.row, e.col) += e.value;
      if (e.row != e.col) out.f0(e.col, e.row) += e.value;
    } else {
      by_var[e.var][{e.row, e.col}] += e.value;
    }
  }
  for (const auto& [var, ents] : by_var) {
    out.vars.push_back(var);
    out.start.push_back(static_cast<int>(out.ev.size()));
    for (const auto& [rc, v] : ents) {
      if (v == 0.0) continue;
      out.ep.push_back(rc.first);
      out.eq.push_back(rc.second);
      out.ev.push_back(v);
      out.w.push_back(rc.first == rc.second ? v : 2.0 * v);
      out.flat.push_back(rc.first + rc.second * out.nf);
    }
  }
  out.start.push_back(static_cast<int>(out.ev.size()));
  return out;
}

MatrixXd sym(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// Largest alpha in (0, inf] with S + alpha dS PSD, given the Cholesky factor of S.
double max_step(const Eigen::LLT<MatrixXd>& chol, const MatrixXd& ds) {
  MatrixXd t = chol.matrixL().solve(ds);
  t = chol.matrixL().solve(t.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym(t), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  return lmin < 0.0 ? -1.0 / lmin : INFINITY;
}

class Solver {
 public:
  Solver(const ConeProgram& p, double tol, int max_iters) : tol_(tol), max_iters_(max_iters) {
    if (!(tol > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    m_ = p.num_vars;
    if (p.objective.size() != m_) throw std::invalid_argument("objective length does not match num_vars");
    const double cmax = p.objective.size() ? p.objective.cwiseAbs().maxCoeff() : 0.0;
    obj_scale_ = cmax > 0.0 ? cmax : 1.0;
    c_ = p.objective / obj_scale_;
    c0_ = p.objective_constant;

    std::vector<Eigen::Triplet<double>> lp;
    for (const auto& b : p.blocks) {
      if (b.dim() < 1) throw std::invalid_argument("block dimension must be >= 1");
      for (const auto& e : b.entries())
        if (e.var >= m_) throw std::invalid_argument("block references an unknown variable");
      if (b.dim() == 1) {
        const int row = static_cast<int>(lp_const_.size());
        double c = 0.0;
        for (const auto& e : b.entries()) {
          if (e.var < 0)
            c += e.value;
          else
            lp.emplace_back(row, e.var, e.value);
        }
        lp_const_.push_back(c);
      } else {
        blocks_.push_back(make_block(b));
      }
    }
    a_lp_.resize(static_cast<int>(lp_const_.size()), m_);
    a_lp_.setFromTriplets(lp.begin(), lp.end());

    presolve_equalities(p.equalities);
  }

  SDPSolution run();

 private:
  void presolve_equalities(const std::vector<LinearExpr>& eqs);
  double dual_objective() const;
  void residuals();
  void snap_slack();
  bool assemble_schur();
  void direction(const std::vector<MatrixXd>& rc, const VectorXd& rc_lp, VectorXd& dy, VectorXd& dl,
                 std::vector<MatrixXd>& dS, std::vector<MatrixXd>& dX, VectorXd& ds, VectorXd& dx) const;

  double tol_;
  int max_iters_;
  int m_ = 0;
  double obj_scale_ = 1.0;
  VectorXd c_;
  double c0_ = 0.0;
  std::vector<SdpBlock> blocks_;
  SpMat a_lp_;
  std::vector<double> lp_const_;
  MatrixXd a_eq_;
  VectorXd b_eq_;
  bool eq_inconsistent_ = false;

  // Iterates.
  VectorXd y_, lam_, x_, s_;
  std::vector<MatrixXd> X_, S_;
  // Residuals and factorizations at the current iterate.
  std::vector<MatrixXd> P_;
  std::vector<Eigen::LLT<MatrixXd>> chol_s_, chol_x_;
  // Nesterov-Todd scaling: W S W = X, W = G G', G' S G = G^-1 X G^-T = diag(d).
  std::vector<MatrixXd> W_, G_, Ginv_;
  std::vector<VectorXd> d_;
  VectorXd p_lp_, r_e_, r_d_;
  // Pivoted LDL': B is semidefinite to working precision near degenerate optima.
  Eigen::LDLT<MatrixXd> chol_b_, chol_k_;
  MatrixXd binv_at_;  // B^{-1} A_eq'
  MatrixXd b_;        // Schur matrix, kept for refinement
  // Off once the primal residual is far below tolerance: correcting it further
  // only injects W P W, which the scaling amplifies near a degenerate optimum.
  bool correct_primal_ = true;
};

void Solver::presolve_equalities(const std::vector<LinearExpr>& eqs) {
  const int p = static_cast<int>(eqs.size());
  MatrixXd a = MatrixXd::Zero(p, m_);
  VectorXd b(p);
  for (int j = 0; j < p; ++j) {
    for (const auto& [i, c] : eqs[j].terms) {
      if (i < 0 || i >= m_) throw std::invalid_argument("equality references an unknown variable");
      a(j, i) += c;
    }
    b(j) = -eqs[j].constant;
  }
  if (p == 0) {
    a_eq_.resize(0, m_);
    b_eq_.resize(0);
    return;
  }
  // Keep a maximal independent set of rows.
  Eigen::ColPivHouseholderQR<MatrixXd> qr(a.transpose());
  qr.setThreshold(1e-10);
  const int r = static_cast<int>(qr.rank());
  std::vector<int> keep;
  for (int k = 0; k < r; ++k) keep.push_back(qr.colsPermutation().indices()(k));
  std::sort(keep.begin(), keep.end());
  a_eq_.resize(r, m_);
  b_eq_.resize(r);
  for (int k = 0; k < r; ++k) {
    a_eq_.row(k) = a.row(keep[k]);
    b_eq_(k) = b(keep[k]);
  }
  if (r < p) {
    // Dropped rows must be implied by the kept ones.
    const VectorXd y0 = a_eq_.completeOrthogonalDecomposition().solve(b_eq_);
    const double err = (a * y0 - b).cwiseAbs().maxCoeff();
    eq_inconsistent_ = err > 1e-8 * (1.0 + b.cwiseAbs().maxCoeff());
  }
}

double Solver::dual_objective() const {
  double d = 0.0;
  for (std::size_t k = 0; k < blocks_.size(); ++k) d -= (blocks_[k].f0.cwiseProduct(blocks_[k].lift(X_[k]))).sum();
  for (std::size_t j = 0; j < lp_const_.size(); ++j) d -= lp_const_[j] * x_(j);
  d += b_eq_.dot(lam_);
  return d;
}

void Solver::residuals() {
  P_.resize(blocks_.size());
  for (std::size_t k = 0; k < blocks_.size(); ++k) P_[k] = blocks_[k].value(y_) - S_[k];
  p_lp_ = a_lp_ * y_ - s_;
  for (std::size_t j = 0; j < lp_const_.size(); ++j) p_lp_(j) += lp_const_[j];
  r_e_ = b_eq_ - a_eq_ * y_;
  r_d_ = c_ - a_lp_.transpose() * x_ - a_eq_.transpose() * lam_;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const SdpBlock& b = blocks_[k];
    const MatrixXd x = b.lift(X_[k]);
    for (std::size_t v = 0; v < b.vars.size(); ++v) r_d_(b.vars[v]) -= b.trace_with(static_cast<int>(v), x);
  }
}

void Solver::snap_slack() {
  std::vector<MatrixXd> fs(blocks_.size());
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    fs[k] = blocks_[k].value(y_);
    Eigen::LLT<MatrixXd> llt(fs[k]);
    if (llt.info() != Eigen::Success) return;
  }
  VectorXd s = a_lp_ * y_;
  for (std::size_t j = 0; j < lp_const_.size(); ++j) {
    s(j) += lp_const_[j];
    if (!(s(j) > 0.0)) return;
  }
  S_ = std::move(fs);
  s_ = std::move(s);
}

bool Solver::assemble_schur() {
  MatrixXd B = MatrixXd::Zero(m_, m_);
  for (auto* v : {&W_, &G_, &Ginv_}) v->resize(blocks_.size());
  d_.resize(blocks_.size());
  chol_s_.resize(blocks_.size());
  chol_x_.resize(blocks_.size());
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const SdpBlock& b = blocks_[k];
    chol_s_[k].compute(S_[k]);
    chol_x_[k].compute(X_[k]);
    if (chol_s_[k].info() != Eigen::Success || chol_x_[k].info() != Eigen::Success) return false;
    // S = L L', L' X L = Q diag(lam) Q', G = L^-T Q diag(lam^1/4).
    const MatrixXd lt = chol_s_[k].matrixU();
    const MatrixXd m = sym(lt * X_[k] * lt.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
    if (es.info() != Eigen::Success || !(es.eigenvalues()(0) > 0.0)) return false;
    const VectorXd q4 = es.eigenvalues().array().sqrt().sqrt();
    d_[k] = q4.array().square();
    G_[k] = chol_s_[k].matrixU().solve(es.eigenvectors() * q4.asDiagonal());
    Ginv_[k] = q4.cwiseInverse().asDiagonal() * es.eigenvectors().transpose() * lt;
    W_[k] = G_[k] * G_[k].transpose();
    const MatrixXd W = b.lift(W_[k]);
    MatrixXd G(b.nf, b.nf);
    // Column j of B: tr(F_i W F_j W), accumulated as G_j = W F_j W.
    for (std::size_t j = 0; j < b.vars.size(); ++j) {
      G.setZero();
      for (int t = b.start[j]; t < b.start[j + 1]; ++t) {
        const int p = b.ep[t], q = b.eq[t];
        const double v = b.ev[t];
        for (int col = 0; col < b.nf; ++col) {
          simd::axpy(v * W(q, col), std::span(W.col(p).data(), b.nf), std::span(G.col(col).data(), b.nf));
          if (p != q)
            simd::axpy(v * W(p, col), std::span(W.col(q).data(), b.nf), std::span(G.col(col).data(), b.nf));
        }
      }
      const int vj = b.vars[j];
      for (std::size_t i = j; i < b.vars.size(); ++i) {
        const double val = b.trace_with(static_cast<int>(i), G);
        B(b.vars[i], vj) += val;
        if (i != j) B(vj, b.vars[i]) += val;
      }
    }
  }
  if (a_lp_.rows() > 0) {
    const VectorXd d = x_.cwiseQuotient(s_);
    const SpMat scaled = d.asDiagonal() * a_lp_;
    B += MatrixXd(a_lp_.transpose() * scaled);
  }
  chol_b_.compute(B);
  b_ = B;
  if (chol_b_.info() != Eigen::Success) {
    const double reg = 1e-13 * std::max(1.0, B.diagonal().cwiseAbs().maxCoeff());
    B.diagonal().array() += reg;
    chol_b_.compute(B);
    if (chol_b_.info() != Eigen::Success) return false;
  }
  if (a_eq_.rows() > 0) {
    binv_at_ = chol_b_.solve(a_eq_.transpose());
    chol_k_.compute(a_eq_ * binv_at_);
    if (chol_k_.info() != Eigen::Success) return false;
  }
  return true;
}

void Solver::direction(const std::vector<MatrixXd>& rc, const VectorXd& rc_lp, VectorXd& dy, VectorXd& dl,
                       std::vector<MatrixXd>& dS, std::vector<MatrixXd>& dX, VectorXd& ds, VectorXd& dx) const {
  // Scaled complementarity d o H = rc, unscaled as G H G'.
  std::vector<MatrixXd> rn(blocks_.size());
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const VectorXd& d = d_[k];
    MatrixXd hm = rc[k];
    for (int j = 0; j < hm.cols(); ++j)
      for (int i = 0; i < hm.rows(); ++i) hm(i, j) *= 2.0 / (d(i) + d(j));
    rn[k] = sym(G_[k] * hm * G_[k].transpose());
  }
  VectorXd h = r_d_;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const SdpBlock& b = blocks_[k];
    const MatrixXd M = b.lift(correct_primal_ ? MatrixXd(rn[k] - W_[k] * P_[k] * W_[k]) : rn[k]);
    for (std::size_t v = 0; v < b.vars.size(); ++v) h(b.vars[v]) -= b.trace_with(static_cast<int>(v), M);
  }
  const VectorXd p_lp = correct_primal_ ? p_lp_ : VectorXd::Zero(p_lp_.size());
  if (a_lp_.rows() > 0) h -= a_lp_.transpose() * (rc_lp - x_.cwiseProduct(p_lp)).cwiseQuotient(s_);

  // B dy = A' dl - h,  A dy = r_e, with a few rounds of iterative refinement.
  auto solve = [&](const VectorXd& g, const VectorXd& e, VectorXd& y, VectorXd& l) {
    if (a_eq_.rows() > 0) {
      l = chol_k_.solve(e + a_eq_ * chol_b_.solve(g));
      y = chol_b_.solve(a_eq_.transpose() * l - g);
    } else {
      l.resize(0);
      y = chol_b_.solve(-g);
    }
  };
  solve(h, r_e_, dy, dl);
  for (int pass = 0; pass < kRefinePasses; ++pass) {
    VectorXd g = b_ * dy - a_eq_.transpose() * dl + h;
    VectorXd e = r_e_ - a_eq_ * dy;
    VectorXd cy, cl;
    solve(g, e, cy, cl);
    dy += cy;
    dl += cl;
  }

  dS.resize(blocks_.size());
  dX.resize(blocks_.size());
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const SdpBlock& b = blocks_[k];
    MatrixXd step = MatrixXd::Zero(b.nf, b.nf);
    for (std::size_t v = 0; v < b.vars.size(); ++v) b.add_scaled(static_cast<int>(v), dy(b.vars[v]), step);
    dS[k] = b.reduce(step);
    if (correct_primal_) dS[k] += P_[k];
    dX[k] = rn[k] - sym(W_[k] * dS[k] * W_[k]);
  }
  ds = a_lp_ * dy + p_lp;
  dx = (rc_lp - x_.cwiseProduct(ds)).cwiseQuotient(s_);
}

SDPSolution Solver::run() {
  SDPSolution sol;
  if (eq_inconsistent_) {
    sol.status = SdpStatus::kInfeasible;
    sol.y = VectorXd::Zero(m_);
    sol.message = "inconsistent equality constraints";
    return sol;
  }
  const int nlp = static_cast<int>(lp_const_.size());
  int dim_total = nlp;
  double fscale = 1.0;
  for (const auto& b : blocks_) {
    dim_total += b.n;
    fscale = std::max(fscale, b.f0.cwiseAbs().maxCoeff());
  }
  for (double v : lp_const_) fscale = std::max(fscale, std::abs(v));
  if (dim_total == 0) throw std::invalid_argument("program has no cone constraints");

  const double xi_s = 10.0 * fscale, xi_x = 10.0;
  y_ = VectorXd::Zero(m_);
  lam_ = VectorXd::Zero(a_eq_.rows());
  x_ = VectorXd::Constant(nlp, xi_x);
  s_ = VectorXd::Constant(nlp, xi_s);
  X_.clear();
  S_.clear();
  for (const auto& b : blocks_) {
    X_.push_back(xi_x * MatrixXd::Identity(b.n, b.n));
    S_.push_back(xi_s * MatrixXd::Identity(b.n, b.n));
  }

  double f0_norm = 0.0;
  for (const auto& b : blocks_) f0_norm += b.f0.squaredNorm();
  for (double v : lp_const_) f0_norm += v * v;
  f0_norm = std::sqrt(f0_norm);
  const double c_norm = c_.norm();
  const double b_norm = b_eq_.norm();

  int stalls = 0;
  sol.status = SdpStatus::kMaxIters;
  // Degenerate programs can lose accuracy near the end; remember the best iterate.
  SDPSolution best;
  bool have_best = false;
  for (int it = 0;; ++it) {
    residuals();
    double pres = 0.0;
    for (const auto& p : P_) pres += p.squaredNorm();
    pres = std::sqrt(pres + p_lp_.squaredNorm());
    const double pobj = c_.dot(y_), dobj = dual_objective();
    sol.kkt.primal = std::max(pres / (1.0 + f0_norm), r_e_.norm() / (1.0 + b_norm));
    sol.kkt.dual = r_d_.norm() / (1.0 + c_norm);
    sol.kkt.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    sol.iterations = it;
    sol.objective_value = pobj * obj_scale_ + c0_;
    sol.dual_value = dobj * obj_scale_ + c0_;
    sol.y = y_;
    if (!have_best || sol.kkt.max() < best.kkt.max()) {
      best = sol;
      have_best = true;
    }
    if (sol.kkt.max() < tol_) {
      sol.status = SdpStatus::kOptimal;
      break;
    }
    if (dobj > kInfeasibleObjective * (1.0 + std::abs(pobj)) && sol.kkt.dual < 1e-6) {
      sol.status = SdpStatus::kInfeasible;
      sol.message = "dual objective unbounded";
      break;
    }
    if (pobj < -kInfeasibleObjective && sol.kkt.primal < 1e-6) {
      sol.status = SdpStatus::kNumericalFailure;
      sol.message = "objective unbounded below";
      break;
    }
    if (it >= max_iters_) {
      sol.status = SdpStatus::kMaxIters;
      break;
    }
    if (best.kkt.max() < kLostAccuracyBest && sol.kkt.max() > kLostAccuracyFactor * best.kkt.max()) {
      sol.status = SdpStatus::kNumericalFailure;
      sol.message = "lost accuracy";
      break;
    }
    correct_primal_ = sol.kkt.primal > kPrimalFreeze * tol_;
    if (!assemble_schur()) {
      sol.status = SdpStatus::kNumericalFailure;
      sol.message = "factorization breakdown";
      break;
    }

    double mu = x_.dot(s_);
    for (std::size_t k = 0; k < blocks_.size(); ++k) mu += X_[k].cwiseProduct(S_[k]).sum();
    mu /= dim_total;

    // Predictor.
    std::vector<MatrixXd> rc(blocks_.size()), dS, dX;
    for (std::size_t k = 0; k < blocks_.size(); ++k) rc[k] = MatrixXd(d_[k].array().square().matrix().asDiagonal()) * -1.0;
    VectorXd rc_lp = -x_.cwiseProduct(s_);
    VectorXd dy, dl, ds, dx;
    direction(rc, rc_lp, dy, dl, dS, dX, ds, dx);

    auto step_lengths = [&](double& ap, double& ad) {
      ap = INFINITY;
      ad = INFINITY;
      for (std::size_t k = 0; k < blocks_.size(); ++k) {
        ap = std::min(ap, max_step(chol_s_[k], dS[k]));
        ad = std::min(ad, max_step(chol_x_[k], dX[k]));
      }
      for (int j = 0; j < nlp; ++j) {
        if (ds(j) < 0.0) ap = std::min(ap, -s_(j) / ds(j));
        if (dx(j) < 0.0) ad = std::min(ad, -x_(j) / dx(j));
      }
    };
    double ap, ad;
    step_lengths(ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double mu_aff = (x_ + ad * dx).dot(s_ + ap * ds);
    for (std::size_t k = 0; k < blocks_.size(); ++k)
      mu_aff += (X_[k] + ad * dX[k]).cwiseProduct(S_[k] + ap * dS[k]).sum();
    mu_aff /= dim_total;
    const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

    // Corrector.
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      const MatrixXd dxs = Ginv_[k] * dX[k] * Ginv_[k].transpose();
      const MatrixXd dss = G_[k].transpose() * dS[k] * G_[k];
      rc[k] = -sym(dxs * dss);
      rc[k].diagonal().array() += sigma * mu - d_[k].array().square();
    }
    rc_lp = (sigma * mu) - (x_.cwiseProduct(s_) + dx.cwiseProduct(ds)).array();
    direction(rc, rc_lp, dy, dl, dS, dX, ds, dx);
    step_lengths(ap, ad);
    ap = std::min(1.0, kStepFraction * ap);
    ad = std::min(1.0, kStepFraction * ad);
    if (!dy.allFinite()) {
      sol.status = SdpStatus::kNumericalFailure;
      sol.message = "non-finite search direction";
      break;
    }

    // The ratio test is exact only up to round-off; back off until the new
    // iterate factors.
    auto factorable = [&](const std::vector<MatrixXd>& base, const std::vector<MatrixXd>& dir, double a) {
      for (std::size_t k = 0; k < blocks_.size(); ++k) {
        Eigen::LLT<MatrixXd> llt(base[k] + a * dir[k]);
        if (llt.info() != Eigen::Success) return false;
      }
      return true;
    };
    for (int t = 0; t < kBacktracks && !factorable(S_, dS, ap); ++t) ap *= kBacktrackFactor;
    for (int t = 0; t < kBacktracks && !factorable(X_, dX, ad); ++t) ad *= kBacktrackFactor;

    y_ += ap * dy;
    s_ += ap * ds;
    for (std::size_t k = 0; k < blocks_.size(); ++k) S_[k] += ap * dS[k];
    x_ += ad * dx;
    lam_ += ad * dl;
    for (std::size_t k = 0; k < blocks_.size(); ++k) X_[k] += ad * dX[k];

    // Once nearly primal feasible, use the exact slack so round-off in P is
    // not amplified by the scaling as S becomes singular.
    if (sol.kkt.primal < kSnapPrimal) snap_slack();

    stalls = (ap < 1e-8 && ad < 1e-8) ? stalls + 1 : 0;
    if (stalls >= 3) {
      residuals();
      sol.status = SdpStatus::kNumericalFailure;
      sol.message = "step lengths stalled";
      break;
    }
  }
  if (have_best && sol.status != SdpStatus::kOptimal && sol.status != SdpStatus::kInfeasible &&
      best.kkt.max() < sol.kkt.max()) {
    sol.y = best.y;
    sol.objective_value = best.objective_value;
    sol.dual_value = best.dual_value;
    sol.kkt = best.kkt;
  }
  return sol;
}

}  // namespace

SDPSolution solve_cone_program(const ConeProgram& p, double tol, int max_iters) {
  Solver s(p, tol, max_iters);
  return s.run();
}

SDPSolution solve_cone_program(const ConeProgram& p, const SdpOptions& options) {
  return solve_cone_program(p, options.tol, options.max_iters);
}

}  // namespace opf
