#pragma once

#include <optional>

#include "opf/netmodel.hpp"

namespace opf {

/// Newton-polishes an approximate operating point (e.g. one extracted from a
/// rank-1 relaxation) on the power flow equations with its own generator
/// setpoints held fixed, then keeps it only if it passes check_feasibility at
/// `tol`. The result is rotated to the case reference bus.
std::optional<VoltagePoint> refine_point(const NetworkCase& c, const AdmittanceMatrix& y, const VoltagePoint& approx,
                                         int slack, double tol = kDefaultFeasibilityTol);

}  // namespace opf
