#pragma once

// End-to-end feasible space computation: tighten the bounds, prune the dense
// grid, solve the power flow equations at every surviving grid point with a
// parameter homotopy, and keep the solutions that satisfy every OPF limit.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "opf/grid.hpp"
#include "opf/nphc.hpp"
#include "opf/prune.hpp"
#include "opf/tighten.hpp"

namespace opf {

/// A run could not continue because a solver lost the accuracy it needs.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string case_id = "wb5";  // preset id or path to a case document
  double dp = 0.25;             // dense spacings, per unit
  double dv = 0.01;
  double sparse_dp = 1.0;
  double sparse_dv = 0.05;
  std::vector<double> betas{1.0};
  int gamma_max = 2;
  HomotopyConfig homotopy;  // seed and workers are taken from below
  double tol = kDefaultFeasibilityTol;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string box;  // sub-box spec, see parse_box
  bool tighten = true;
  bool prune = true;
  std::filesystem::path out_dir;    // shards go to out_dir/shards when set
  std::filesystem::path cache_dir;  // generic solutions; empty disables the cache
  std::size_t shard_size = 256;

  /// Throws std::invalid_argument when the invariants are violated.
  void validate() const;
  nlohmann::json to_json() const;
};

enum class Provenance { kNphc, kTightenHarvest, kPruneHarvest };

const char* to_string(Provenance p);

struct PointRecord {
  std::vector<int> indices;  // eta per P axis then mu per V axis; empty for harvested points
  VoltagePoint voltage;      // angle reference at the case reference bus
  EvaluatedState state;
  Provenance provenance = Provenance::kNphc;
  int path_failures = 0;  // failed paths in the solve that produced the point
  int component = -1;
};

struct RunStats {
  std::uint64_t raw = 0;
  std::uint64_t after_tightening = 0;
  std::uint64_t after_pruning = 0;
  std::uint64_t nphc_solves = 0;
  std::uint64_t paths_tracked = 0;
  std::uint64_t path_failures = 0;
  std::uint64_t points_with_failures = 0;  // solves with at least one failed path
  std::uint64_t nphc_points = 0;
  std::uint64_t harvested_points = 0;
  int generic_paths = 0;
  int generic_solutions = 0;
  int components = 0;

  std::uint64_t removed_by_tightening() const { return raw - after_tightening; }
  std::uint64_t removed_by_pruning() const { return after_tightening - after_pruning; }
  double feasible_fraction() const { return nphc_solves ? double(nphc_points) / double(nphc_solves) : 0.0; }
  nlohmann::json to_json() const;
};

struct FeasibleSpaceResult {
  NetworkCase net;  // after the sub-box restriction
  RunConfig config;
  GridSpec raw;
  GridSpec dense;
  GridSpec sparse;
  std::vector<std::uint8_t> alive;  // per dense flat index, after pruning
  BoundSet tightened;
  TighteningReport tightening;
  PruneReport pruning;
  std::vector<PointRecord> points;  // nphc points in grid order, then harvested points
  std::vector<std::uint64_t> failed_points;  // dense flat indices whose solve lost a path
  RunStats stats;
};

/// Runs every stage. Per-point tracking failures are counted, never fatal.
/// Throws std::invalid_argument on a bad config or case, NumericalFailure when
/// the generic solve loses paths.
FeasibleSpaceResult compute_feasible_space(const RunConfig& cfg);

/// Generic-parameter start solutions, read from the cache when present.
struct GenericSolve {
  Eigen::VectorXcd params;
  SolutionSet solutions;
  bool from_cache = false;
};

GenericSolve generic_solve(const NetworkCase& c, const ParameterizedSystem& sys, const HomotopyConfig& config,
                           const std::filesystem::path& cache_dir);

/// Real solutions at one grid point that pass the filter at `tol`, rotated to
/// the case reference bus and ordered by voltage.
struct PointSolve {
  std::vector<VoltagePoint> feasible;
  PathStats paths;
};

PointSolve solve_grid_point(const NetworkCase& c, const AdmittanceMatrix& y, const ParameterizedSystem& sys,
                            const GenericSolve& generic, const Setpoints& s, const HomotopyConfig& config, double tol);

/// Connected components of the cloud. Two points are adjacent when their
/// setpoints (non-slack P, generator |V|) differ by at most one dense step on
/// every axis. Components are numbered by ascending best cost. Returns the count.
int label_components(std::vector<PointRecord>& points, const GridSpec& dense);

}  // namespace opf
