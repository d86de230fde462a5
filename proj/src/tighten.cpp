#include "opf/tighten.hpp"

#include <cmath>
#include <mutex>
#include <stdexcept>

#include "opf/grid.hpp"
#include "opf/parallel.hpp"
#include "opf/refine.hpp"

namespace opf {

namespace {

template <typename Set>
auto& slot(Set& b, const BoundRef& r) {
  if (r.quantity == BoundRef::Quantity::kFlow) {
    if (r.side != BoundSide::kUpper) throw std::invalid_argument("flow limits have no lower side");
    return b.s_sq_max.at(r.index);
  }
  auto& x = b.bus.at(r.index);
  const bool up = r.side == BoundSide::kUpper;
  switch (r.quantity) {
    case BoundRef::Quantity::kActivePower:
      return up ? x.p_max : x.p_min;
    case BoundRef::Quantity::kReactivePower:
      return up ? x.q_max : x.q_min;
    default:
      return up ? x.v_sq_max : x.v_sq_min;
  }
}

const char* quantity_name(BoundRef::Quantity q) {
  switch (q) {
    case BoundRef::Quantity::kActivePower:
      return "P";
    case BoundRef::Quantity::kReactivePower:
      return "Q";
    case BoundRef::Quantity::kVoltageSq:
      return "V2";
    case BoundRef::Quantity::kFlow:
      return "S2";
  }
  return "?";
}

bool same_point(const VoltagePoint& a, const VoltagePoint& b) {
  return (a.vd - b.vd).cwiseAbs().maxCoeff() < 1e-8 && (a.vq - b.vq).cwiseAbs().maxCoeff() < 1e-8;
}

}  // namespace

double BoundRef::get(const BoundSet& b) const { return slot(b, *this); }

void BoundRef::set(BoundSet& b, double value) const { slot(b, *this) = value; }

std::string BoundRef::describe(const NetworkCase& c) const {
  const std::string side_name = side == BoundSide::kUpper ? "max" : "min";
  if (quantity == Quantity::kFlow) {
    const auto& br = c.branches.at(index);
    return "S2max(" + std::to_string(c.buses[br.from].id) + "," + std::to_string(c.buses[br.to].id) + ")";
  }
  return std::string(quantity_name(quantity)) + side_name + "@" + std::to_string(c.buses.at(index).id);
}

nlohmann::json BoundRef::to_json(const NetworkCase& c) const {
  nlohmann::json j{{"quantity", quantity_name(quantity)},
                   {"side", side == BoundSide::kUpper ? "upper" : "lower"},
                   {"label", describe(c)}};
  if (quantity == Quantity::kFlow)
    j["branch"] = index;
  else
    j["bus"] = c.buses.at(index).id;
  return j;
}

BoundSolve optimize_bound(const NetworkCase& c, const AdmittanceMatrix& y, const BoundSet& bounds,
                          const BoundRef& ref, int gamma, const TightenOptions& options) {
  if (gamma != 1 && gamma != 2) throw std::invalid_argument("relaxation order must be 1 or 2");
  const VoltageVariables vars = relaxation_variables(c);
  const VoltagePolynomials vp = voltage_polynomials(c, y, vars);
  std::vector<RealPolynomial> quantities;
  switch (ref.quantity) {
    case BoundRef::Quantity::kActivePower:
      quantities.push_back(vp.p.at(ref.index));
      break;
    case BoundRef::Quantity::kReactivePower:
      quantities.push_back(vp.q.at(ref.index));
      break;
    case BoundRef::Quantity::kVoltageSq:
      quantities.push_back(vp.v.at(ref.index));
      break;
    case BoundRef::Quantity::kFlow: {
      const auto& br = c.branches.at(ref.index);
      for (int d = 0; d < 2; ++d) {
        if (gamma == 2) {
          quantities.push_back(vp.flow_s[ref.index][d]);
        } else {
          // |S|^2 = |V_sending|^2 |I|^2 <= V_max^2 |I|^2.
          const int sending = d == 0 ? br.from : br.to;
          quantities.push_back(vp.current[ref.index][d] * bounds.bus[sending].v_sq_max);
        }
      }
      break;
    }
  }

  const bool upper = ref.side == BoundSide::kUpper;
  BoundSolve out;
  out.usable = true;
  out.rank_one = true;
  out.value = upper ? -INFINITY : INFINITY;
  for (const auto& f : quantities) {
    const RealPolynomial objective = upper ? f * -1.0 : f;
    const MomentProblem mp = assemble_relaxation(c, y, bounds, gamma, RelaxationObjective::minimize(objective),
                                                 options.feasibility_tol);
    const RelaxationResult r = solve_relaxation(mp, options.sdp);
    out.statuses.push_back(r.solution.status);
    if (!r.optimal()) {
      out.usable = false;
      out.rank_one = false;
      continue;
    }
    // The dual value is a certified lower bound on the minimum; use whichever
    // of the two is weaker, then step outward by the margin.
    const double lo = std::min(r.solution.objective_value, r.solution.dual_value);
    const double safe = lo - options.margin * (1.0 + std::abs(lo));
    if (upper)
      out.value = std::max(out.value, -safe);
    else
      out.value = std::min(out.value, safe);
    if (r.rank.extracted)
      out.extracted.push_back(*r.rank.extracted);
    else
      out.rank_one = false;
  }
  return out;
}

std::vector<BoundRef> tightenable_bounds(const NetworkCase& c, const BoundSet& b) {
  std::vector<BoundRef> refs;
  using Q = BoundRef::Quantity;
  auto both = [&](Q q, int i, double lo, double hi) {
    if (lo == hi) return;
    if (std::isfinite(hi)) refs.push_back({q, i, BoundSide::kUpper});
    if (std::isfinite(lo)) refs.push_back({q, i, BoundSide::kLower});
  };
  for (int i = 0; i < c.n_bus(); ++i) {
    const auto& x = b.bus[i];
    if (c.is_generator(i)) {
      both(Q::kActivePower, i, x.p_min, x.p_max);
      both(Q::kReactivePower, i, x.q_min, x.q_max);
    }
    both(Q::kVoltageSq, i, x.v_sq_min, x.v_sq_max);
  }
  for (std::size_t k = 0; k < b.s_sq_max.size(); ++k)
    if (std::isfinite(b.s_sq_max[k])) refs.push_back({Q::kFlow, static_cast<int>(k), BoundSide::kUpper});
  return refs;
}

nlohmann::json TighteningReport::to_json(const NetworkCase& c) const {
  nlohmann::json u = nlohmann::json::array(), f = nlohmann::json::array(), r = nlohmann::json::array();
  for (const auto& x : updates)
    u.push_back({{"sweep", x.sweep}, {"bound", x.ref.to_json(c)}, {"gamma", x.gamma}, {"before", x.before}, {"after", x.after}});
  for (const auto& x : failures)
    f.push_back({{"sweep", x.sweep}, {"bound", x.ref.to_json(c)}, {"gamma", x.gamma}, {"status", to_string(x.status)}});
  for (const auto& x : removed) r.push_back(x.to_json(c));
  return {{"sweeps", sweeps},
          {"hit_sweep_limit", hit_sweep_limit},
          {"updates", u},
          {"failures", f},
          {"removed", r},
          {"harvested_points", harvested_points.size()}};
}

TighteningResult tighten_bounds(const NetworkCase& c, const AdmittanceMatrix& y, const BoundSet& initial,
                                const TightenOptions& options) {
  if (options.gamma_max != 1 && options.gamma_max != 2) throw std::invalid_argument("gamma_max must be 1 or 2");
  if (!initial.valid()) throw std::invalid_argument("initial bounds are inconsistent");
  TighteningResult res;
  res.bounds = initial;
  auto& rep = res.report;
  const std::vector<BoundRef> refs = tightenable_bounds(c, initial);
  std::vector<char> active(refs.size(), 1);
  const int slack = select_slack(c);

  struct Outcome {
    bool have = false;
    double value = 0.0;
    int gamma = 1;
    bool rank_one = false;
    std::vector<VoltagePoint> points;
    std::vector<std::pair<int, SdpStatus>> failures;
  };

  for (int sweep = 1;; ++sweep) {
    if (sweep > options.max_sweeps) {
      rep.hit_sweep_limit = true;
      break;
    }
    rep.sweeps = sweep;
    const BoundSet frozen = res.bounds;
    std::vector<Outcome> out(refs.size());
    parallel_for(refs.size(), options.workers, [&](std::size_t i) {
      if (!active[i]) return;
      Outcome& o = out[i];
      const bool upper = refs[i].side == BoundSide::kUpper;
      for (int g = 1; g <= options.gamma_max; ++g) {
        const BoundSolve s = optimize_bound(c, y, frozen, refs[i], g, options);
        for (const auto& p : s.extracted) o.points.push_back(p);
        if (!s.usable) {
          for (SdpStatus st : s.statuses)
            if (st != SdpStatus::kOptimal) o.failures.emplace_back(g, st);
          continue;
        }
        if (!o.have || (upper ? s.value < o.value : s.value > o.value)) {
          o.have = true;
          o.value = s.value;
          o.gamma = g;
        }
        if (s.rank_one) {
          o.rank_one = true;
          break;
        }
      }
    });

    bool updated = false;
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const Outcome& o = out[i];
      for (const auto& [g, st] : o.failures) rep.failures.push_back({sweep, refs[i], g, st});
      for (const auto& p : o.points) {
        auto polished = refine_point(c, y, p, slack, options.feasibility_tol);
        if (!polished) continue;
        bool dup = false;
        for (const auto& h : rep.harvested_points) dup = dup || same_point(h, *polished);
        if (!dup) rep.harvested_points.push_back(*polished);
      }
      if (o.rank_one) {
        active[i] = 0;
        rep.removed.push_back(refs[i]);
      }
      if (!o.have) continue;
      const double before = refs[i].get(frozen);
      const bool upper = refs[i].side == BoundSide::kUpper;
      const double gain = upper ? before - o.value : o.value - before;
      if (gain > options.min_improvement) {
        refs[i].set(res.bounds, o.value);
        rep.updates.push_back({sweep, refs[i], o.gamma, before, o.value});
        updated = true;
      }
    }
    if (!updated) break;
  }
  return res;
}

}  // namespace opf
