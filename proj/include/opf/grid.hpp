#pragma once

// Discretized generator setpoints: active power of the non-slack generators
// and voltage magnitude of every generator, each on an evenly spaced lattice.

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "opf/bounds.hpp"
#include "opf/netmodel.hpp"

namespace opf {

/// Generator bus with the widest active power range; ties go to the lowest bus.
/// Throws std::invalid_argument when the case has no generator.
int select_slack(const NetworkCase& c);

struct GridAxis {
  enum class Kind { kActivePower, kVoltage };
  Kind kind = Kind::kActivePower;
  int bus = 0;
  double origin = 0.0;  // value at lattice index 0
  double step = 0.0;
  int first = 0;  // admissible lattice indices [first, last]
  int last = -1;

  int count() const { return last >= first ? last - first + 1 : 0; }
  double value(int k) const { return origin + k * step; }
};

struct Setpoints {
  Eigen::VectorXd p;  // by bus; only non-slack generators are meaningful
  Eigen::VectorXd v;  // |V| by bus; only generators are meaningful
};

/// Product lattice over P axes (non-slack generators, ascending bus) followed
/// by V axes (all generators, ascending bus). Flat indices run with the last
/// axis fastest.
struct GridSpec {
  double dp = 0.0;
  double dv = 0.0;
  int slack = 0;
  std::vector<GridAxis> axes;

  std::uint64_t size() const;
  bool empty() const { return size() == 0; }
  /// Absolute lattice indices of a flat position in [0, size()).
  std::vector<int> indices(std::uint64_t flat) const;
  std::uint64_t flat(const std::vector<int>& idx) const;
  bool contains(const std::vector<int>& idx) const;
  Setpoints setpoints(const std::vector<int>& idx, int n_bus) const;
  /// eta_i / mu_i maxima in the sense of the floor formulas (last index).
  std::vector<int> max_indices() const;
};

/// Lattice with origin at the lower bounds: index k in [0, floor(range/step)].
/// Throws std::invalid_argument unless dp, dv > 0.
GridSpec enumerate_grid(const NetworkCase& c, const BoundSet& b, double dp, double dv, int slack);

/// Same lattice, keeping only indices whose values lie inside `b`.
GridSpec restrict_grid(const GridSpec& base, const BoundSet& b);

/// Per-generator P and |V| intervals keyed by internal bus index.
struct SubBox {
  std::map<int, std::pair<double, double>> p;
  std::map<int, std::pair<double, double>> v;

  bool empty() const { return p.empty() && v.empty(); }
};

/// Parses "P5=2.0:2.4,V1=1.0:1.05" with bus ids from the case document; "V=lo:hi"
/// applies to every generator. Throws std::invalid_argument on bad syntax.
SubBox parse_box(const std::string& spec, const NetworkCase& c);

/// Case with generator limits narrowed to the box. Throws std::invalid_argument
/// when an interval is not inside the case limits or names a non-generator.
NetworkCase apply_box(const NetworkCase& c, const SubBox& box);

}  // namespace opf
