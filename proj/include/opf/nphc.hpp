#pragma once

// Homotopy continuation for square systems of quadratics: total-degree and
// parameter homotopies tracked in projective coordinates.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "opf/polysys.hpp"

namespace opf {

struct HomotopyConfig {
  double initial_step = 0.1;
  double min_step = 1e-7;
  double max_step = 0.2;
  double corrector_tol = 1e-10;
  int max_corrector_iters = 3;
  double divergence_norm = 1e8;
  double endgame_t = 1e-2;
  double real_imag_tol = 1e-8;
  double dedup_tol = 1e-6;
  std::uint64_t seed = 1;
  int workers = 1;

  /// Throws std::invalid_argument when the invariants are violated.
  void validate() const;
};

struct StartSystem {
  PolynomialSystem system;
  std::vector<Complex> a, b;  // a_i x_i^2 - b_i
  std::vector<Eigen::VectorXcd> roots;
};

StartSystem total_degree_start(int m, std::uint64_t seed);

enum class PathStatus { kConverged, kDiverged, kTrackingFailure };

const char* to_string(PathStatus s);

struct PathResult {
  PathStatus status = PathStatus::kTrackingFailure;
  Eigen::VectorXcd endpoint;  // affine coordinates; set when converged
  int steps_taken = 0;
};

struct PathStats {
  int converged = 0;
  int diverged = 0;
  int failed = 0;

  int total() const { return converged + diverged + failed; }
  void add(PathStatus s);
};

struct SolutionSet {
  std::vector<Eigen::VectorXcd> solutions;
  PathStats path_stats;
};

/// Unit-modulus complex number drawn from the seed; shared by all paths of a run.
Complex gamma_constant(std::uint64_t seed);

/// Tracks (1-t) target + kappa t start from t=1 to t=0 starting at x0.
PathResult track_path(const PolynomialSystem& start, const PolynomialSystem& target,
                      const Eigen::VectorXcd& x0, Complex kappa, const HomotopyConfig& config);

SolutionSet solve_bezout(const PolynomialSystem& target, const HomotopyConfig& config);

/// Random complex parameter vector for a generic solve.
Eigen::VectorXcd generic_parameters(int num_params, std::uint64_t seed);

SolutionSet solve_parameterized(const ParameterizedSystem& sys, const SolutionSet& generic_solutions,
                                const Eigen::VectorXcd& generic_params,
                                const Eigen::VectorXcd& target_params, const HomotopyConfig& config);

/// Real parts of the solutions with every |imag| < real_imag_tol.
std::vector<Eigen::VectorXd> real_solutions(const SolutionSet& s, double real_imag_tol);

/// As real_solutions, mapped to bus voltages with the slack phasor re-inserted.
std::vector<VoltagePoint> extract_real_solutions(const SolutionSet& s, const ParameterizedSystem& sys,
                                                 double slack_v, double real_imag_tol);

/// Greedy max-norm clustering; keeps the first member of each cluster.
std::vector<Eigen::VectorXcd> deduplicate(const std::vector<Eigen::VectorXcd>& points, double tol);

}  // namespace opf
