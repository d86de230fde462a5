#pragma once

// Order-gamma moment relaxations of the OPF constraint set over the
// rectangular voltages, with the reference-bus V_q eliminated.

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <vector>

#include "opf/bounds.hpp"
#include "opf/polysys.hpp"
#include "opf/sdp.hpp"

namespace opf {

/// All monomials of degree <= order in graded-lex order; entry 0 is constant.
struct MonomialBasis {
  int order = 0;
  int num_vars = 0;
  std::vector<Monomial> entries;

  static MonomialBasis build(int num_vars, int order);
  int size() const { return static_cast<int>(entries.size()); }
};

/// Maps every monomial of degree <= 2*order to its moment y_alpha. The
/// constant moment is pinned to 1 and has no program variable; monomial k > 0
/// is program variable k - 1.
class MomentIndex {
 public:
  MomentIndex() = default;
  MomentIndex(int num_vars, int order);

  int num_vars() const { return basis_.num_vars; }
  int max_degree() const { return basis_.order; }
  int size() const { return basis_.size(); }
  const Monomial& monomial(int k) const { return basis_.entries[k]; }

  /// Position of alpha; throws std::out_of_range beyond the index degree.
  int find(const Monomial& alpha) const;

 private:
  MonomialBasis basis_;
  std::map<Monomial, int> pos_;
};

/// L_y{g} = sum_alpha g_alpha y_alpha.
LinearExpr linearize(const RealPolynomial& g, const MomentIndex& idx);

/// Entry (i,j) = y_{alpha_i + alpha_j}.
LmiBlock build_moment_matrix(const MonomialBasis& basis, const MomentIndex& idx);

/// Entry (i,j) = L_y{g x^(alpha_i + alpha_j)}; throws when deg g + 2*order(basis)
/// exceeds the index degree.
LmiBlock build_localizing(const RealPolynomial& g, const MonomialBasis& basis, const MomentIndex& idx);

/// Variables of the relaxation: V_d of every bus, then V_q of every bus except
/// the reference.
VoltageVariables relaxation_variables(const NetworkCase& c);

struct RelaxationObjective {
  enum class Kind { kCost, kPolynomial, kProjection };
  Kind kind = Kind::kCost;
  RealPolynomial poly;                           // kPolynomial: minimized
  std::vector<std::pair<int, double>> p_target;  // kProjection: (bus, P°)
  std::vector<std::pair<int, double>> v_target;  // kProjection: (bus, V°)
  double beta = 1.0;

  static RelaxationObjective cost() { return RelaxationObjective(); }
  static RelaxationObjective minimize(RealPolynomial p);
  static RelaxationObjective projection(std::vector<std::pair<int, double>> p_target,
                                        std::vector<std::pair<int, double>> v_target, double beta);
};

/// Optional extra polynomial constraints over the relaxation variables.
struct ExtraConstraint {
  RealPolynomial g;
  bool equality = false;  // g == 0, otherwise g >= 0
};

struct MomentProblem {
  int order = 1;
  int n_bus = 0;
  int ref_bus = 0;
  VoltageVariables vars;
  MonomialBasis basis;
  MomentIndex index;
  ConeProgram program;
  int moment_block = 0;  // position of M_gamma in program.blocks

  Eigen::MatrixXd moment_matrix(const Eigen::VectorXd& y) const;
  /// Moment vector entry for monomial alpha (1 for the constant).
  double moment(const Eigen::VectorXd& y, const Monomial& alpha) const;
};

/// `slack` widens every non-degenerate inequality bound; intervals with equal
/// ends become equalities. Throws std::invalid_argument for gamma outside {1,2}.
MomentProblem assemble_relaxation(const NetworkCase& c, const AdmittanceMatrix& y, const BoundSet& bounds,
                                  int gamma, const RelaxationObjective& objective, double slack = 0.0,
                                  const std::vector<ExtraConstraint>& extra = {});

struct RankInfo {
  Eigen::VectorXd eigenvalues;  // descending
  int numeric_rank = 0;
  std::optional<VoltagePoint> extracted;
};

inline constexpr double kDefaultRankRatio = 1e-5;

/// Solver tolerance for relaxations, one decade below the 1e-6 used when
/// comparing relaxation values. A few degenerate order-2 instances stall
/// between 1e-8 and 1e-7.
inline constexpr double kRelaxationTol = 1e-7;

/// Rank test and extraction on the block of second-order moments (rows and
/// columns of the degree-1 monomials) of a full moment matrix.
RankInfo check_rank_and_extract(const Eigen::MatrixXd& moment_matrix, const VoltageVariables& vars,
                                int ref_bus, double rank_ratio_tol = kDefaultRankRatio);

struct RelaxationResult {
  SDPSolution solution;
  RankInfo rank;

  bool optimal() const { return solution.status == SdpStatus::kOptimal; }
};

RelaxationResult solve_relaxation(const MomentProblem& p, const SdpOptions& options = {kRelaxationTol, 100},
                                  double rank_ratio_tol = kDefaultRankRatio);

}  // namespace opf
