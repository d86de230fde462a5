#pragma once

#include <limits>
#include <vector>

#include "json.hpp"
#include "opf/netmodel.hpp"

namespace opf {

struct BusBounds {
  double p_min = 0.0, p_max = 0.0;
  double q_min = 0.0, q_max = 0.0;
  double v_sq_min = 0.0, v_sq_max = 0.0;
};

/// Working copy of the OPF limits. Flow limits are squared; +inf means none.
struct BoundSet {
  std::vector<BusBounds> bus;
  std::vector<double> s_sq_max;

  static BoundSet from_case(const NetworkCase& c);

  /// lower <= upper everywhere.
  bool valid() const;
  /// Every interval lies inside the matching interval of `outer` (within tol).
  bool within(const BoundSet& outer, double tol = 0.0) const;

  nlohmann::json to_json() const;
  /// Inverse of to_json. Throws nlohmann::json::exception on a malformed document.
  static BoundSet from_json(const nlohmann::json& j);
};

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

}  // namespace opf
