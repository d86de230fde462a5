#include "opf/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace opf {

namespace {

// Slack for floor/ceil on ratios such as 0.1 / 0.001 that land a hair
// below an integer in binary.
constexpr double kLatticeEps = 1e-9;

int floor_ratio(double x) { return static_cast<int>(std::floor(x + kLatticeEps)); }
int ceil_ratio(double x) { return static_cast<int>(std::ceil(x - kLatticeEps)); }

std::pair<double, double> axis_bounds(const GridAxis& a, const BoundSet& b) {
  const auto& x = b.bus.at(a.bus);
  if (a.kind == GridAxis::Kind::kActivePower) return {x.p_min, x.p_max};
  return {std::sqrt(std::max(0.0, x.v_sq_min)), std::sqrt(std::max(0.0, x.v_sq_max))};
}

}  // namespace

int select_slack(const NetworkCase& c) {
  if (c.generators.empty()) throw std::invalid_argument("case has no generator");
  int best = -1;
  double width = -1.0;
  for (int bus : c.generator_buses()) {
    const double w = c.p_max(bus) - c.p_min(bus);
    if (w > width) {
      width = w;
      best = bus;
    }
  }
  return best;
}

std::uint64_t GridSpec::size() const {
  std::uint64_t n = 1;
  for (const auto& a : axes) n *= static_cast<std::uint64_t>(a.count());
  return n;
}

std::vector<int> GridSpec::indices(std::uint64_t flat) const {
  std::vector<int> idx(axes.size());
  for (int d = static_cast<int>(axes.size()) - 1; d >= 0; --d) {
    const auto n = static_cast<std::uint64_t>(axes[d].count());
    idx[d] = axes[d].first + static_cast<int>(flat % n);
    flat /= n;
  }
  return idx;
}

std::uint64_t GridSpec::flat(const std::vector<int>& idx) const {
  if (!contains(idx)) throw std::out_of_range("grid index outside the lattice");
  std::uint64_t f = 0;
  for (std::size_t d = 0; d < axes.size(); ++d)
    f = f * static_cast<std::uint64_t>(axes[d].count()) + static_cast<std::uint64_t>(idx[d] - axes[d].first);
  return f;
}

bool GridSpec::contains(const std::vector<int>& idx) const {
  if (idx.size() != axes.size()) return false;
  for (std::size_t d = 0; d < axes.size(); ++d)
    if (idx[d] < axes[d].first || idx[d] > axes[d].last) return false;
  return true;
}

Setpoints GridSpec::setpoints(const std::vector<int>& idx, int n_bus) const {
  Setpoints s{Eigen::VectorXd::Zero(n_bus), Eigen::VectorXd::Zero(n_bus)};
  for (std::size_t d = 0; d < axes.size(); ++d) {
    const auto& a = axes[d];
    (a.kind == GridAxis::Kind::kActivePower ? s.p : s.v)(a.bus) = a.value(idx[d]);
  }
  return s;
}

std::vector<int> GridSpec::max_indices() const {
  std::vector<int> m;
  for (const auto& a : axes) m.push_back(a.last);
  return m;
}

GridSpec enumerate_grid(const NetworkCase& c, const BoundSet& b, double dp, double dv, int slack) {
  if (!(dp > 0.0) || !(dv > 0.0)) throw std::invalid_argument("grid spacings must be positive");
  if (!c.is_generator(slack)) throw std::invalid_argument("slack must be a generator bus");
  GridSpec g;
  g.dp = dp;
  g.dv = dv;
  g.slack = slack;
  const auto gens = c.generator_buses();
  for (int bus : gens) {
    if (bus == slack) continue;
    GridAxis a{GridAxis::Kind::kActivePower, bus, b.bus[bus].p_min, dp, 0, 0};
    a.last = floor_ratio((b.bus[bus].p_max - a.origin) / dp);
    g.axes.push_back(a);
  }
  for (int bus : gens) {
    GridAxis a{GridAxis::Kind::kVoltage, bus, 0.0, dv, 0, 0};
    const auto [lo, hi] = axis_bounds(a, b);
    a.origin = lo;
    a.last = floor_ratio((hi - lo) / dv);
    g.axes.push_back(a);
  }
  return g;
}

GridSpec restrict_grid(const GridSpec& base, const BoundSet& b) {
  GridSpec g = base;
  for (auto& a : g.axes) {
    const auto [lo, hi] = axis_bounds(a, b);
    a.first = std::max(a.first, ceil_ratio((lo - a.origin) / a.step));
    a.last = std::min(a.last, floor_ratio((hi - a.origin) / a.step));
  }
  return g;
}

SubBox parse_box(const std::string& spec, const NetworkCase& c) {
  SubBox box;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('='), colon = item.find(':');
    if (eq == std::string::npos || colon == std::string::npos || colon < eq || eq < 1)
      throw std::invalid_argument("box entry '" + item + "' is not of the form P<bus>=lo:hi");
    const char kind = item[0];
    if (kind != 'P' && kind != 'V') throw std::invalid_argument("box entry '" + item + "' must start with P or V");
    double lo = 0.0, hi = 0.0;
    try {
      lo = std::stod(item.substr(eq + 1, colon - eq - 1));
      hi = std::stod(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("box entry '" + item + "' has a bad number");
    }
    std::vector<int> buses;
    const std::string id = item.substr(1, eq - 1);
    if (id.empty()) {
      buses = c.generator_buses();
    } else {
      int bus = -1;
      try {
        bus = c.bus_index(std::stoi(id));
      } catch (const std::exception&) {
      }
      if (bus < 0) throw std::invalid_argument("box entry '" + item + "' names an unknown bus");
      buses.push_back(bus);
    }
    for (int bus : buses) (kind == 'P' ? box.p : box.v)[bus] = {lo, hi};
  }
  return box;
}

NetworkCase apply_box(const NetworkCase& c, const SubBox& box) {
  NetworkCase out = c;
  constexpr double tol = 1e-12;
  for (const auto& [bus, iv] : box.p) {
    auto it = std::find_if(out.generators.begin(), out.generators.end(), [&](const Generator& g) { return g.bus == bus; });
    if (it == out.generators.end()) throw std::invalid_argument("box restricts P at a bus without a generator");
    if (!(iv.first <= iv.second) || iv.first < it->p_min - tol || iv.second > it->p_max + tol)
      throw std::invalid_argument("box P interval is not inside the generator limits");
    it->p_min = iv.first;
    it->p_max = iv.second;
  }
  for (const auto& [bus, iv] : box.v) {
    if (!c.is_generator(bus)) throw std::invalid_argument("box restricts V at a bus without a generator");
    auto& b = out.buses.at(bus);
    if (!(iv.first <= iv.second) || iv.first < b.v_min - tol || iv.second > b.v_max + tol)
      throw std::invalid_argument("box V interval is not inside the bus limits");
    b.v_min = iv.first;
    b.v_max = iv.second;
  }
  return out;
}

}  // namespace opf
