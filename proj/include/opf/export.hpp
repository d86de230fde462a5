#pragma once

// Output files of a feasible space run.

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "opf/atlas.hpp"

namespace opf {

/// x rounded to `digits` significant figures.
double round_significant(double x, int digits);

/// One row per point: grid indices, per-bus Vd, Vq, |V|, per-generator P and
/// Q, per-branch S^2 in both orientations, cost, provenance, component and
/// failed-path count. Header only when there are no points.
void write_points_csv(std::ostream& out, const FeasibleSpaceResult& r);

/// Column labels of the projection file: P of every generator, Q of the last
/// generator when there are fewer than three, then cost.
std::vector<std::string> projection_columns(const NetworkCase& c);
void write_projection_csv(std::ostream& out, const FeasibleSpaceResult& r);

/// Config, stage counts, stage percentages (4 significant figures), the
/// tightened bounds and the best point per component.
nlohmann::json summary_json(const FeasibleSpaceResult& r);

/// Tightening updates and every pruning ellipse.
nlohmann::json certificates_json(const FeasibleSpaceResult& r);

/// Writes points.csv, projection.csv, summary.json and certificates.json into
/// `dir`, creating it. Throws std::runtime_error naming the failing path.
void export_results(const FeasibleSpaceResult& r, const std::filesystem::path& dir);

}  // namespace opf
