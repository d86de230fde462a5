#include "opf/bounds.hpp"

#include <cmath>

namespace opf {

BoundSet BoundSet::from_case(const NetworkCase& c) {
  BoundSet b;
  b.bus.resize(c.buses.size());
  for (int i = 0; i < c.n_bus(); ++i) {
    auto& x = b.bus[i];
    x.p_min = c.p_min(i);
    x.p_max = c.p_max(i);
    x.q_min = c.q_min(i);
    x.q_max = c.q_max(i);
    x.v_sq_min = c.buses[i].v_min * c.buses[i].v_min;
    x.v_sq_max = c.buses[i].v_max * c.buses[i].v_max;
  }
  for (const auto& br : c.branches) b.s_sq_max.push_back(br.s_max ? *br.s_max * *br.s_max : kUnbounded);
  return b;
}

bool BoundSet::valid() const {
  for (const auto& x : bus)
    if (!(x.p_min <= x.p_max) || !(x.q_min <= x.q_max) || !(x.v_sq_min <= x.v_sq_max)) return false;
  for (double s : s_sq_max)
    if (!(s >= 0.0)) return false;
  return true;
}

bool BoundSet::within(const BoundSet& outer, double tol) const {
  if (bus.size() != outer.bus.size() || s_sq_max.size() != outer.s_sq_max.size()) return false;
  auto inside = [tol](double lo, double hi, double olo, double ohi) {
    return lo >= olo - tol && hi <= ohi + tol;
  };
  for (std::size_t i = 0; i < bus.size(); ++i) {
    const auto& a = bus[i];
    const auto& o = outer.bus[i];
    if (!inside(a.p_min, a.p_max, o.p_min, o.p_max) || !inside(a.q_min, a.q_max, o.q_min, o.q_max) ||
        !inside(a.v_sq_min, a.v_sq_max, o.v_sq_min, o.v_sq_max))
      return false;
  }
  for (std::size_t k = 0; k < s_sq_max.size(); ++k)
    if (s_sq_max[k] > outer.s_sq_max[k] + tol) return false;
  return true;
}

nlohmann::json BoundSet::to_json() const {
  nlohmann::json buses = nlohmann::json::array();
  for (const auto& x : bus)
    buses.push_back({{"p", {x.p_min, x.p_max}},
                     {"q", {x.q_min, x.q_max}},
                     {"v_sq", {x.v_sq_min, x.v_sq_max}}});
  nlohmann::json flows = nlohmann::json::array();
  for (double s : s_sq_max) flows.push_back(std::isfinite(s) ? nlohmann::json(s) : nlohmann::json(nullptr));
  return {{"buses", buses}, {"s_sq_max", flows}};
}

BoundSet BoundSet::from_json(const nlohmann::json& j) {
  BoundSet b;
  for (const auto& x : j.at("buses")) {
    BusBounds u;
    u.p_min = x.at("p").at(0);
    u.p_max = x.at("p").at(1);
    u.q_min = x.at("q").at(0);
    u.q_max = x.at("q").at(1);
    u.v_sq_min = x.at("v_sq").at(0);
    u.v_sq_max = x.at("v_sq").at(1);
    b.bus.push_back(u);
  }
  for (const auto& s : j.at("s_sq_max")) b.s_sq_max.push_back(s.is_null() ? kUnbounded : s.get<double>());
  return b;
}

}  // namespace opf
