#include "opf/refine.hpp"

#include <cmath>

#include "opf/polysys.hpp"

namespace opf {

namespace {
constexpr int kNewtonIters = 20;
constexpr double kNewtonTol = 1e-13;
}  // namespace

std::optional<VoltagePoint> refine_point(const NetworkCase& c, const AdmittanceMatrix& y, const VoltagePoint& approx,
                                         int slack, double tol) {
  const VoltagePoint v = rotate_to_reference(approx, slack);
  const ParameterizedSystem sys = build_pf_system(c, y, slack);
  const Injections inj = eval_injections(c, y, v);
  const Eigen::VectorXd vm = (v.vd.array().square() + v.vq.array().square()).sqrt();
  const PolynomialSystem pf = substitute_parameters(sys, sys.params_for(inj.p, vm));

  Eigen::VectorXcd x = sys.unknowns_for(v);
  bool converged = false;
  for (int it = 0; it < kNewtonIters && !converged; ++it) {
    const SystemEvaluation e = eval_and_jacobian(pf, x);
    if (!e.residual.allFinite()) return std::nullopt;
    if (e.residual.cwiseAbs().maxCoeff() < kNewtonTol) {
      converged = true;
      break;
    }
    x -= e.jacobian.partialPivLu().solve(e.residual);
  }
  if (!converged && eval_and_jacobian(pf, x).residual.cwiseAbs().maxCoeff() > std::sqrt(kNewtonTol)) return std::nullopt;

  const VoltagePoint out = rotate_to_reference(sys.voltage_point(x.real(), vm(slack)), c.ref_bus);
  if (!check_feasibility(c, y, out, tol).feasible) return std::nullopt;
  return out;
}

}  // namespace opf
