#include "opf/prune.hpp"

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>

#include "opf/kernels.hpp"
#include "opf/parallel.hpp"
#include "opf/refine.hpp"

namespace opf {

namespace {

double lookup(const std::vector<std::pair<int, double>>& v, int bus) {
  for (const auto& [b, x] : v)
    if (b == bus) return x;
  throw std::invalid_argument("ellipse has no center coordinate for bus " + std::to_string(bus));
}

bool same_point(const VoltagePoint& a, const VoltagePoint& b) {
  return (a.vd - b.vd).cwiseAbs().maxCoeff() < 1e-8 && (a.vq - b.vq).cwiseAbs().maxCoeff() < 1e-8;
}

nlohmann::json pairs_json(const NetworkCase& c, const std::vector<std::pair<int, double>>& v) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [bus, x] : v) j[std::to_string(c.buses.at(bus).id)] = x;
  return j;
}

}  // namespace

ProjectionResult project_point(const NetworkCase& c, const AdmittanceMatrix& y, const BoundSet& bounds,
                               const std::vector<std::pair<int, double>>& p_target,
                               const std::vector<std::pair<int, double>>& v_target, double beta, int gamma,
                               const PruneOptions& options) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  const MomentProblem mp = assemble_relaxation(c, y, bounds, gamma, RelaxationObjective::projection(p_target, v_target, beta),
                                               options.feasibility_tol);
  const RelaxationResult r = solve_relaxation(mp, options.sdp);
  ProjectionResult out;
  out.status = r.solution.status;
  if (!r.optimal()) return out;
  out.usable = true;
  const double lo = std::min(r.solution.objective_value, r.solution.dual_value);
  const double hi = std::max(r.solution.objective_value, r.solution.dual_value);
  const double safe = lo - options.margin * (1.0 + std::abs(lo));
  // Order one minimizes the norm itself.
  out.phi = safe <= 0.0 ? 0.0 : gamma == 1 ? safe * safe : safe;
  out.upper = gamma == 1 ? hi * std::abs(hi) : hi;
  out.rank1_point = r.rank.extracted;
  return out;
}

bool EllipseCertificate::contains(const Setpoints& s) const {
  double sum = 0.0;
  for (const auto& [bus, p0] : center_p) sum += (s.p(bus) - p0) * (s.p(bus) - p0);
  for (const auto& [bus, v0] : center_v) {
    const double d = s.v(bus) * s.v(bus) - v0 * v0;
    sum += beta * d * d;
  }
  return sum < radius_sq;
}

nlohmann::json EllipseCertificate::to_json(const NetworkCase& c) const {
  return {{"center_p", pairs_json(c, center_p)},
          {"center_v", pairs_json(c, center_v)},
          {"beta", beta},
          {"radius_sq", radius_sq},
          {"gamma", gamma}};
}

nlohmann::json PruneReport::to_json(const NetworkCase& c) const {
  nlohmann::json e = nlohmann::json::array();
  for (const auto& x : ellipses) e.push_back(x.to_json(c));
  return {{"ellipses", e},
          {"eliminated", eliminated},
          {"harvested_points", harvested_points.size()},
          {"sparse_points_removed", sparse_points_removed},
          {"projections", projections},
          {"failures", failures}};
}

std::uint64_t clear_ellipse(const GridSpec& dense, const EllipseCertificate& e, std::vector<std::uint8_t>& alive) {
  if (alive.size() != dense.size()) throw std::invalid_argument("survivor bitmap does not match the grid");
  if (dense.empty() || !(e.radius_sq > 0.0)) return 0;
  const int nd = static_cast<int>(dense.axes.size());
  std::vector<std::vector<double>> coord(nd);
  std::vector<double> center(nd), weight(nd);
  for (int d = 0; d < nd; ++d) {
    const GridAxis& a = dense.axes[d];
    const bool p = a.kind == GridAxis::Kind::kActivePower;
    for (int k = a.first; k <= a.last; ++k) coord[d].push_back(p ? a.value(k) : a.value(k) * a.value(k));
    const double c0 = p ? lookup(e.center_p, a.bus) : lookup(e.center_v, a.bus);
    center[d] = p ? c0 : c0 * c0;
    weight[d] = p ? 1.0 : e.beta;
  }
  // Walk the leading axes, dropping any prefix already outside, and scan the
  // contiguous last axis with the remaining budget.
  std::uint64_t cleared = 0;
  std::function<void(int, std::uint64_t, double)> rec = [&](int d, std::uint64_t prefix, double partial) {
    const auto n = coord[d].size();
    if (d == nd - 1) {
      cleared += simd::clear_inside(coord[d], center[d], weight[d], e.radius_sq - partial,
                                    std::span(alive.data() + prefix * n, n));
      return;
    }
    for (std::size_t k = 0; k < n; ++k) {
      const double dx = coord[d][k] - center[d];
      const double t = partial + weight[d] * dx * dx;
      if (t >= e.radius_sq) continue;
      rec(d + 1, prefix * n + k, t);
    }
  };
  if (nd == 0) return 0;
  rec(0, 0, 0.0);
  return cleared;
}

PruneResult prune_grid(const NetworkCase& c, const AdmittanceMatrix& y, const BoundSet& bounds, const GridSpec& dense,
                       const GridSpec& sparse, const PruneOptions& options) {
  if (!(sparse.dp > dense.dp) || !(sparse.dv > dense.dv))
    throw std::invalid_argument("sparse spacings must be strictly coarser than dense spacings");
  if (options.gamma_max != 1 && options.gamma_max != 2) throw std::invalid_argument("gamma_max must be 1 or 2");
  PruneResult res;
  res.alive.assign(dense.size(), 1);
  auto& rep = res.report;

  for (double beta : options.betas) {
    std::vector<std::uint64_t> active(sparse.size());
    for (std::uint64_t i = 0; i < active.size(); ++i) active[i] = i;
    for (int g = 1; g <= options.gamma_max && !active.empty(); ++g) {
      std::vector<ProjectionResult> out(active.size());
      std::vector<EllipseCertificate> certs(active.size());
      parallel_for(active.size(), options.workers, [&](std::size_t i) {
        const Setpoints s = sparse.setpoints(sparse.indices(active[i]), c.n_bus());
        EllipseCertificate& e = certs[i];
        for (const auto& a : sparse.axes) {
          if (a.kind == GridAxis::Kind::kActivePower)
            e.center_p.emplace_back(a.bus, s.p(a.bus));
          else
            e.center_v.emplace_back(a.bus, s.v(a.bus));
        }
        e.beta = beta;
        e.gamma = g;
        out[i] = project_point(c, y, bounds, e.center_p, e.center_v, beta, g, options);
        e.radius_sq = out[i].phi;
      });
      std::vector<std::uint64_t> next;
      for (std::size_t i = 0; i < active.size(); ++i) {
        ++rep.projections;
        if (!out[i].usable) {
          ++rep.failures;
          next.push_back(active[i]);
          continue;
        }
        if (out[i].phi > 0.0) {
          rep.eliminated += clear_ellipse(dense, certs[i], res.alive);
          rep.ellipses.push_back(certs[i]);
        }
        if (out[i].rank1_point) {
          ++rep.sparse_points_removed;
          if (auto p = refine_point(c, y, *out[i].rank1_point, dense.slack, options.feasibility_tol)) {
            bool dup = false;
            for (const auto& h : rep.harvested_points) dup = dup || same_point(h, *p);
            if (!dup) rep.harvested_points.push_back(*p);
          }
        } else {
          next.push_back(active[i]);
        }
      }
      active = std::move(next);
    }
  }
  return res;
}

}  // namespace opf
