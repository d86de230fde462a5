#pragma once

// Feasibility-based bound tightening with moment relaxations: every bound is
// replaced by the relaxation's extreme value of its constrained quantity
// until a sweep changes nothing.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "opf/bounds.hpp"
#include "opf/moment.hpp"

namespace opf {

/// One bound of the OPF: P, Q or V^2 at a bus (either side) or the squared
/// flow limit of a branch (upper side only, both orientations).
struct BoundRef {
  enum class Quantity { kActivePower, kReactivePower, kVoltageSq, kFlow };
  Quantity quantity = Quantity::kActivePower;
  int index = 0;  // bus, or branch for kFlow
  BoundSide side = BoundSide::kUpper;

  double get(const BoundSet& b) const;
  void set(BoundSet& b, double value) const;
  std::string describe(const NetworkCase& c) const;
  nlohmann::json to_json(const NetworkCase& c) const;
  friend bool operator==(const BoundRef&, const BoundRef&) = default;
};

struct TightenOptions {
  int gamma_max = 2;
  SdpOptions sdp{kRelaxationTol, 100};
  double min_improvement = 1e-6;  // per unit
  int max_sweeps = 20;
  /// Added outward to every relaxation value before it is used as a bound.
  double margin = 1e-5;
  /// Relaxation inequalities are widened by this, so points that pass the
  /// feasibility filter at this tolerance are never cut off.
  double feasibility_tol = kDefaultFeasibilityTol;
  int workers = 1;
};

struct BoundSolve {
  bool usable = false;    // every solve finished optimal
  double value = 0.0;     // conservative max (upper) or min (lower) of the quantity
  bool rank_one = false;  // every solve met the rank condition
  std::vector<VoltagePoint> extracted;  // raw rank-1 extractions
  std::vector<SdpStatus> statuses;
};

/// h_{c,gamma} of the quantity behind `ref` over the relaxation built from
/// `bounds`, returned on the quantity's own scale: the maximum for an upper
/// bound, the minimum for a lower one. Flow limits take the larger of the two
/// orientations; at gamma = 1 the squared flow is bounded by V_max^2 times the
/// squared current.
BoundSolve optimize_bound(const NetworkCase& c, const AdmittanceMatrix& y, const BoundSet& bounds,
                          const BoundRef& ref, int gamma, const TightenOptions& options = {});

/// Every tightenable bound: P, Q at generators, V^2 at every bus (both sides
/// unless the interval is a point), and finite flow limits.
std::vector<BoundRef> tightenable_bounds(const NetworkCase& c, const BoundSet& b);

struct BoundUpdate {
  int sweep = 0;
  BoundRef ref;
  int gamma = 1;
  double before = 0.0;
  double after = 0.0;
};

struct SolveFailure {
  int sweep = 0;
  BoundRef ref;
  int gamma = 1;
  SdpStatus status = SdpStatus::kNumericalFailure;
};

struct TighteningReport {
  int sweeps = 0;
  bool hit_sweep_limit = false;
  std::vector<BoundUpdate> updates;
  std::vector<SolveFailure> failures;
  std::vector<BoundRef> removed;  // rank-1: no further tightening possible
  std::vector<VoltagePoint> harvested_points;

  nlohmann::json to_json(const NetworkCase& c) const;
};

struct TighteningResult {
  BoundSet bounds;
  TighteningReport report;
};

/// Sweeps over all bounds with the bounds frozen at the start of each sweep.
/// Rank-1 extractions are polished and kept when they pass the feasibility
/// filter.
TighteningResult tighten_bounds(const NetworkCase& c, const AdmittanceMatrix& y, const BoundSet& initial,
                                const TightenOptions& options = {});

}  // namespace opf
