#pragma once

// Dense primal-dual interior-point solver for
//
//   minimize    c'y + c0
//   subject to  F_k(y) = F_k0 + sum_i y_i F_ki  PSD   for every block k
//               a_j'y + e_j = 0                       for every equality j
//
// 1x1 blocks are treated as a diagonal (LP) cone.

#include <Eigen/Dense>
#include <algorithm>
#include <string>
#include <utility>
#include <vector>

namespace opf {

/// e0 + sum_k coef_k * y[var_k]
struct LinearExpr {
  double constant = 0.0;
  std::vector<std::pair<int, double>> terms;

  LinearExpr() = default;
  explicit LinearExpr(double c) : constant(c) {}
  static LinearExpr var(int index, double coef = 1.0) {
    LinearExpr e;
    e.terms.emplace_back(index, coef);
    return e;
  }

  LinearExpr& operator+=(const LinearExpr& o);
  LinearExpr& operator*=(double s);
  friend LinearExpr operator+(LinearExpr a, const LinearExpr& b) { return a += b; }
  friend LinearExpr operator-(LinearExpr a, LinearExpr b) { return a += (b *= -1.0); }
  friend LinearExpr operator*(double s, LinearExpr a) { return a *= s; }

  double evaluate(const Eigen::VectorXd& y) const;
};

/// Symmetric matrix affine in y. Entries are stored once for row >= col.
class LmiBlock {
 public:
  explicit LmiBlock(int dim = 0) : dim_(dim) {}

  int dim() const { return dim_; }

  /// Adds `expr` to entries (r,c) and (c,r).
  void add(int r, int c, const LinearExpr& expr);
  void add_constant(int r, int c, double v);
  void add_term(int r, int c, int var, double coef);

  struct Entry {
    int row, col;  // row >= col
    int var;       // -1 for the constant matrix
    double value;
  };
  const std::vector<Entry>& entries() const { return entries_; }

  /// Full-size F(y), ignoring any face.
  Eigen::MatrixXd value(const Eigen::VectorXd& y) const;

  /// Restricts the constraint to Q' F(y) Q >= 0. Q has orthonormal columns
  /// and should span a face known to contain every feasible F(y).
  void set_face(Eigen::MatrixXd q);
  const Eigen::MatrixXd& face() const { return face_; }

 private:
  int dim_;
  std::vector<Entry> entries_;
  Eigen::MatrixXd face_;
};

struct ConeProgram {
  int num_vars = 0;
  Eigen::VectorXd objective;  // c, resized by add_var
  double objective_constant = 0.0;
  std::vector<LmiBlock> blocks;
  std::vector<LinearExpr> equalities;  // expr == 0

  int add_var();
  void set_objective(const LinearExpr& e);
  void add_block(LmiBlock b) { blocks.push_back(std::move(b)); }
  /// expr >= 0 as a 1x1 block.
  void add_nonnegative(const LinearExpr& e);
  void add_equality(const LinearExpr& e) { equalities.push_back(e); }
};

enum class SdpStatus { kOptimal, kInfeasible, kMaxIters, kNumericalFailure };

const char* to_string(SdpStatus s);

struct KktResiduals {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;

  double max() const { return std::max(primal, std::max(dual, gap)); }
};

struct SdpOptions {
  double tol = 1e-8;
  int max_iters = 100;
};

struct SDPSolution {
  SdpStatus status = SdpStatus::kNumericalFailure;
  Eigen::VectorXd y;
  double objective_value = 0.0;  // c'y + c0
  double dual_value = 0.0;       // dual objective, a lower bound when dual feasible
  KktResiduals kkt;
  int iterations = 0;
  std::string message;
};

/// Nesterov-Todd scaled predictor-corrector from an infeasible start. When the
/// run ends without convergence, y and the reported values come from the
/// iterate with the smallest residuals. Throws std::invalid_argument for
/// malformed programs.
SDPSolution solve_cone_program(const ConeProgram& p, double tol = 1e-8, int max_iters = 100);
SDPSolution solve_cone_program(const ConeProgram& p, const SdpOptions& options);

/// t >= ||u||_2 as the arrow block [[t, u'], [u, t I]].
LmiBlock encode_soc(const LinearExpr& t, const std::vector<LinearExpr>& u);

}  // namespace opf
