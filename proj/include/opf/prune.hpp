#pragma once

// Grid pruning: project coarse grid points onto a relaxation of the OPF
// constraints; a positive projection distance certifies an ellipse around the
// point that holds no feasible operating point.

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "json.hpp"
#include "opf/grid.hpp"
#include "opf/moment.hpp"

namespace opf {

struct PruneOptions {
  std::vector<double> betas{1.0};
  int gamma_max = 2;
  SdpOptions sdp{kRelaxationTol, 100};
  /// Subtracted from every projection value before it becomes a radius.
  double margin = 1e-5;
  double feasibility_tol = kDefaultFeasibilityTol;  // relaxation widening
  int workers = 1;
};

struct ProjectionResult {
  bool usable = false;
  double phi = 0.0;  // conservative; 0 when unusable
  double upper = 0.0;  // larger of the primal and dual values, on the phi scale
  SdpStatus status = SdpStatus::kNumericalFailure;
  std::optional<VoltagePoint> rank1_point;  // raw extraction
};

/// phi_gamma: min over the relaxation of sum (f_P - P°)^2 + beta sum (f_V - V°^2)^2.
/// Targets are (bus, value) pairs; V° is a magnitude. Throws
/// std::invalid_argument unless beta > 0.
ProjectionResult project_point(const NetworkCase& c, const AdmittanceMatrix& y, const BoundSet& bounds,
                               const std::vector<std::pair<int, double>>& p_target,
                               const std::vector<std::pair<int, double>>& v_target, double beta, int gamma,
                               const PruneOptions& options = {});

struct EllipseCertificate {
  std::vector<std::pair<int, double>> center_p;  // (bus, P°)
  std::vector<std::pair<int, double>> center_v;  // (bus, V°)
  double beta = 1.0;
  double radius_sq = 0.0;
  int gamma = 1;

  /// Strict membership: sum (P - P°)^2 + beta sum (V^2 - V°^2)^2 < radius_sq.
  bool contains(const Setpoints& s) const;
  nlohmann::json to_json(const NetworkCase& c) const;
};

struct PruneReport {
  std::vector<EllipseCertificate> ellipses;
  std::uint64_t eliminated = 0;
  std::vector<VoltagePoint> harvested_points;
  int sparse_points_removed = 0;
  int projections = 0;
  int failures = 0;

  nlohmann::json to_json(const NetworkCase& c) const;
};

struct PruneResult {
  std::vector<std::uint8_t> alive;  // one flag per flat dense index
  PruneReport report;
};

/// Clears, in `alive`, every point of `dense` strictly inside the ellipse.
/// Returns the number of flags cleared.
std::uint64_t clear_ellipse(const GridSpec& dense, const EllipseCertificate& e, std::vector<std::uint8_t>& alive);

/// Projects every sparse point for each beta and each order up to gamma_max,
/// clearing dense points inside the certified ellipses. Sparse points whose
/// projection is rank-1 are skipped at higher orders for that beta. Throws
/// std::invalid_argument unless the sparse spacings are strictly coarser.
PruneResult prune_grid(const NetworkCase& c, const AdmittanceMatrix& y, const BoundSet& bounds, const GridSpec& dense,
                       const GridSpec& sparse, const PruneOptions& options = {});

}  // namespace opf
