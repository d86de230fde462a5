#include "opf/atlas.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "opf/cases.hpp"
#include "opf/parallel.hpp"

namespace opf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// FNV-1a; only used to name cache files and to detect stale shards.
std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string case_fingerprint(const NetworkCase& c) {
  std::ostringstream os;
  os << std::hexfloat << c.base_mva << ' ' << c.ref_bus << ';';
  for (const auto& b : c.buses) os << b.id << ' ' << b.p_load << ' ' << b.q_load << ' ' << b.v_min << ' ' << b.v_max << ';';
  for (const auto& g : c.generators)
    os << g.bus << ' ' << g.p_min << ' ' << g.p_max << ' ' << g.q_min << ' ' << g.q_max << ' ' << g.c2 << ' ' << g.c1 << ' '
       << g.c0 << ';';
  for (const auto& br : c.branches)
    os << br.from << ' ' << br.to << ' ' << br.r << ' ' << br.x << ' ' << br.b_sh << ' ' << br.s_max.value_or(-1.0) << ';';
  return hex(fnv1a(os.str()));
}

json complex_vector(const Eigen::VectorXcd& v) {
  json re = json::array(), im = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    re.push_back(v(i).real());
    im.push_back(v(i).imag());
  }
  return {{"re", re}, {"im", im}};
}

Eigen::VectorXcd complex_vector(const json& j) {
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  if (re.size() != im.size()) throw std::invalid_argument("complex vector parts differ in length");
  Eigen::VectorXcd v(re.size());
  for (std::size_t i = 0; i < re.size(); ++i) v(i) = {re[i].get<double>(), im[i].get<double>()};
  return v;
}

bool close_points(const VoltagePoint& a, const VoltagePoint& b, double tol) {
  return (a.vd - b.vd).cwiseAbs().maxCoeff() <= tol && (a.vq - b.vq).cwiseAbs().maxCoeff() <= tol;
}

bool voltage_less(const VoltagePoint& a, const VoltagePoint& b) {
  for (Eigen::Index i = 0; i < a.vd.size(); ++i)
    if (a.vd(i) != b.vd(i)) return a.vd(i) < b.vd(i);
  for (Eigen::Index i = 0; i < a.vq.size(); ++i)
    if (a.vq(i) != b.vq(i)) return a.vq(i) < b.vq(i);
  return false;
}

struct ShardEntry {
  std::uint64_t flat = 0;
  PathStats paths;
  std::vector<VoltagePoint> feasible;
};

json shard_json(const std::string& key, const std::vector<ShardEntry>& entries) {
  json e = json::array();
  for (const auto& x : entries) {
    json pts = json::array();
    for (const auto& v : x.feasible) {
      json vd = json::array(), vq = json::array();
      for (Eigen::Index i = 0; i < v.vd.size(); ++i) {
        vd.push_back(v.vd(i));
        vq.push_back(v.vq(i));
      }
      pts.push_back({{"vd", vd}, {"vq", vq}});
    }
    e.push_back({{"flat", x.flat}, {"paths", {x.paths.converged, x.paths.diverged, x.paths.failed}}, {"points", pts}});
  }
  return {{"key", key}, {"entries", e}};
}

std::optional<std::vector<ShardEntry>> read_shard(const fs::path& path, const std::string& key, std::size_t expected) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    const json j = json::parse(in);
    if (j.at("key") != key || j.at("entries").size() != expected) return std::nullopt;
    std::vector<ShardEntry> out;
    for (const auto& e : j.at("entries")) {
      ShardEntry x;
      x.flat = e.at("flat");
      x.paths.converged = e.at("paths").at(0);
      x.paths.diverged = e.at("paths").at(1);
      x.paths.failed = e.at("paths").at(2);
      for (const auto& p : e.at("points")) {
        VoltagePoint v;
        v.vd = Eigen::Map<const Eigen::VectorXd>(p.at("vd").get<std::vector<double>>().data(), p.at("vd").size());
        v.vq = Eigen::Map<const Eigen::VectorXd>(p.at("vq").get<std::vector<double>>().data(), p.at("vq").size());
        x.feasible.push_back(std::move(v));
      }
      out.push_back(std::move(x));
    }
    return out;
  } catch (const json::exception&) {
    return std::nullopt;  // torn write from an interrupted run
  }
}

void write_atomically(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

// Setpoint coordinates of a point in units of the dense steps.
std::vector<double> step_coordinates(const PointRecord& p, const GridSpec& g) {
  std::vector<double> u;
  for (const auto& a : g.axes) {
    const double x = a.kind == GridAxis::Kind::kActivePower ? p.state.p_inj(a.bus) : std::sqrt(p.state.v_sq(a.bus));
    u.push_back((x - a.origin) / a.step);
  }
  return u;
}

}  // namespace

void RunConfig::validate() const {
  auto positive = [](double x, const char* what) {
    if (!(x > 0.0) || !std::isfinite(x)) throw std::invalid_argument(std::string(what) + " must be positive");
  };
  positive(dp, "dp");
  positive(dv, "dv");
  positive(sparse_dp, "sparse dp");
  positive(sparse_dv, "sparse dv");
  positive(tol, "tol");
  if (!(sparse_dp > dp) || !(sparse_dv > dv))
    throw std::invalid_argument("sparse spacings must be strictly coarser than dense spacings");
  if (betas.empty()) throw std::invalid_argument("at least one beta is required");
  for (double b : betas) positive(b, "beta");
  if (gamma_max != 1 && gamma_max != 2) throw std::invalid_argument("gamma_max must be 1 or 2");
  if (workers < 1) throw std::invalid_argument("workers must be at least 1");
  if (shard_size < 1) throw std::invalid_argument("shard size must be at least 1");
  homotopy.validate();
}

json RunConfig::to_json() const {
  return {{"case", case_id},        {"dp", dp},
          {"dv", dv},               {"sparse_dp", sparse_dp},
          {"sparse_dv", sparse_dv}, {"betas", betas},
          {"gamma_max", gamma_max}, {"tol", tol},
          {"seed", seed},           {"workers", workers},
          {"box", box},             {"tighten", tighten},
          {"prune", prune}};
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::kNphc:
      return "nphc";
    case Provenance::kTightenHarvest:
      return "tighten-harvest";
    case Provenance::kPruneHarvest:
      return "prune-harvest";
  }
  return "?";
}

json RunStats::to_json() const {
  return {{"raw", raw},
          {"after_tightening", after_tightening},
          {"after_pruning", after_pruning},
          {"removed_by_tightening", removed_by_tightening()},
          {"removed_by_pruning", removed_by_pruning()},
          {"nphc_solves", nphc_solves},
          {"paths_tracked", paths_tracked},
          {"path_failures", path_failures},
          {"points_with_failures", points_with_failures},
          {"nphc_points", nphc_points},
          {"harvested_points", harvested_points},
          {"feasible_fraction", feasible_fraction()},
          {"generic_paths", generic_paths},
          {"generic_solutions", generic_solutions},
          {"components", components}};
}

GenericSolve generic_solve(const NetworkCase& c, const ParameterizedSystem& sys, const HomotopyConfig& config,
                           const fs::path& cache_dir) {
  GenericSolve g;
  fs::path file;
  if (!cache_dir.empty()) {
    file = cache_dir / ("generic_" + case_fingerprint(c) + "_slack" + std::to_string(sys.slack) + "_seed" +
                        std::to_string(config.seed) + ".json");
    if (std::ifstream in(file); in) {
      try {
        const json j = json::parse(in);
        g.params = complex_vector(j.at("params"));
        for (const auto& s : j.at("solutions")) g.solutions.solutions.push_back(complex_vector(s));
        g.solutions.path_stats.converged = j.at("paths").at(0);
        g.solutions.path_stats.diverged = j.at("paths").at(1);
        g.solutions.path_stats.failed = j.at("paths").at(2);
        bool ok = g.params.size() == sys.num_params;
        for (const auto& s : g.solutions.solutions) ok = ok && s.size() == sys.num_unknowns;
        if (ok) {
          g.from_cache = true;
          return g;
        }
      } catch (const json::exception&) {
      }
      g = GenericSolve{};
    }
  }
  g.params = generic_parameters(sys.num_params, config.seed);
  g.solutions = solve_bezout(substitute_parameters(sys, g.params), config);
  if (!file.empty()) {
    fs::create_directories(cache_dir);
    json sols = json::array();
    for (const auto& s : g.solutions.solutions) sols.push_back(complex_vector(s));
    const auto& ps = g.solutions.path_stats;
    write_atomically(file, json{{"params", complex_vector(g.params)},
                                {"solutions", sols},
                                {"paths", {ps.converged, ps.diverged, ps.failed}}}
                               .dump());
  }
  return g;
}

PointSolve solve_grid_point(const NetworkCase& c, const AdmittanceMatrix& y, const ParameterizedSystem& sys,
                            const GenericSolve& generic, const Setpoints& s, const HomotopyConfig& config, double tol) {
  const SolutionSet sol = solve_parameterized(sys, generic.solutions, generic.params, sys.params_for(s.p, s.v), config);
  PointSolve out;
  out.paths = sol.path_stats;
  for (const auto& v : extract_real_solutions(sol, sys, s.v(sys.slack), config.real_imag_tol)) {
    VoltagePoint w = rotate_to_reference(v, c.ref_bus);
    if (check_feasibility(c, y, w, tol).feasible) out.feasible.push_back(std::move(w));
  }
  std::sort(out.feasible.begin(), out.feasible.end(), voltage_less);
  return out;
}

int label_components(std::vector<PointRecord>& points, const GridSpec& dense) {
  const std::size_t n = points.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  auto unite = [&](std::size_t a, std::size_t b) { parent[find(a)] = find(b); };

  std::vector<std::vector<double>> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = step_coordinates(points[i], dense);
  constexpr double kReach = 1.0 + 1e-9;
  auto adjacent = [&](std::size_t a, std::size_t b) {
    for (std::size_t d = 0; d < u[a].size(); ++d)
      if (std::abs(u[a][d] - u[b][d]) > kReach) return false;
    return true;
  };

  // Grid points: look up the 3^d index neighbourhood. Off-grid points are
  // compared against everything.
  std::map<std::vector<int>, std::vector<std::size_t>> at;
  std::vector<std::size_t> off_grid;
  for (std::size_t i = 0; i < n; ++i) {
    if (points[i].indices.size() == dense.axes.size())
      at[points[i].indices].push_back(i);
    else
      off_grid.push_back(i);
  }
  const std::size_t nd = dense.axes.size();
  std::size_t offsets = 1;
  for (std::size_t d = 0; d < nd; ++d) offsets *= 3;
  for (const auto& [idx, members] : at) {
    for (std::size_t k = 1; k < members.size(); ++k) unite(members[0], members[k]);
    for (std::size_t o = 0; o < offsets; ++o) {
      std::vector<int> nb = idx;
      std::size_t r = o;
      for (std::size_t d = 0; d < nd; ++d, r /= 3) nb[d] += static_cast<int>(r % 3) - 1;
      if (auto it = at.find(nb); it != at.end()) unite(members[0], it->second[0]);
    }
  }
  for (std::size_t i : off_grid)
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && adjacent(i, j)) unite(i, j);

  // Number by best cost so component 0 holds the cheapest point.
  std::map<std::size_t, std::size_t> best;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, fresh] = best.try_emplace(find(i), i);
    if (!fresh && points[i].state.cost < points[it->second].state.cost) it->second = i;
  }
  std::vector<std::pair<double, std::size_t>> order;
  for (const auto& [root, i] : best) order.emplace_back(points[i].state.cost, root);
  std::sort(order.begin(), order.end());
  std::map<std::size_t, int> label;
  for (std::size_t k = 0; k < order.size(); ++k) label[order[k].second] = static_cast<int>(k);
  for (std::size_t i = 0; i < n; ++i) points[i].component = label[find(i)];
  return static_cast<int>(order.size());
}

FeasibleSpaceResult compute_feasible_space(const RunConfig& cfg) {
  cfg.validate();
  FeasibleSpaceResult res;
  res.config = cfg;
  const NetworkCase base = resolve_case(cfg.case_id);
  res.net = cfg.box.empty() ? base : apply_box(base, parse_box(cfg.box, base));
  const NetworkCase& c = res.net;
  const AdmittanceMatrix y = build_admittance(c);
  const int slack = select_slack(c);
  const BoundSet original = BoundSet::from_case(c);

  HomotopyConfig hc = cfg.homotopy;
  hc.seed = cfg.seed;
  hc.workers = 1;  // parallelism is across grid points

  // Tightening.
  res.tightened = original;
  if (cfg.tighten) {
    TightenOptions to;
    to.gamma_max = cfg.gamma_max;
    to.feasibility_tol = cfg.tol;
    to.workers = cfg.workers;
    TighteningResult tr = tighten_bounds(c, y, original, to);
    res.tightened = std::move(tr.bounds);
    res.tightening = std::move(tr.report);
  }

  // Grids on the raw and tightened bounds share one lattice.
  res.raw = enumerate_grid(c, original, cfg.dp, cfg.dv, slack);
  res.dense = restrict_grid(res.raw, res.tightened);
  res.sparse = enumerate_grid(c, res.tightened, cfg.sparse_dp, cfg.sparse_dv, slack);

  // Pruning.
  res.alive.assign(res.dense.size(), 1);
  if (cfg.prune && !res.dense.empty()) {
    PruneOptions po;
    po.betas = cfg.betas;
    po.gamma_max = cfg.gamma_max;
    po.feasibility_tol = cfg.tol;
    po.workers = cfg.workers;
    PruneResult pr = prune_grid(c, y, res.tightened, res.dense, res.sparse, po);
    res.alive = std::move(pr.alive);
    res.pruning = std::move(pr.report);
  }
  std::vector<std::uint64_t> todo;
  for (std::uint64_t i = 0; i < res.alive.size(); ++i)
    if (res.alive[i]) todo.push_back(i);

  auto& st = res.stats;
  st.raw = res.raw.size();
  st.after_tightening = res.dense.size();
  st.after_pruning = todo.size();

  // Power flow solves at the surviving points.
  std::vector<ShardEntry> entries(todo.size());
  if (!todo.empty()) {
    const ParameterizedSystem sys = build_pf_system(c, y, slack);
    const GenericSolve generic = generic_solve(c, sys, hc, cfg.cache_dir);
    st.generic_paths = generic.solutions.path_stats.total();
    st.generic_solutions = static_cast<int>(generic.solutions.solutions.size());
    if (generic.solutions.path_stats.failed > 0)
      throw NumericalFailure("generic-parameter solve lost " + std::to_string(generic.solutions.path_stats.failed) +
                             " paths; retry with another seed");

    fs::path shard_dir;
    std::string key;
    if (!cfg.out_dir.empty()) {
      shard_dir = cfg.out_dir / "shards";
      fs::create_directories(shard_dir);
      json k = cfg.to_json();
      k.erase("workers");
      std::string alive_text(res.alive.begin(), res.alive.end());
      key = case_fingerprint(c) + hex(fnv1a(k.dump())) + hex(fnv1a(alive_text));
    }
    for (std::size_t first = 0; first < todo.size(); first += cfg.shard_size) {
      const std::size_t count = std::min(cfg.shard_size, todo.size() - first);
      fs::path file;
      if (!shard_dir.empty()) {
        char name[32];
        std::snprintf(name, sizeof name, "shard_%06zu.json", first / cfg.shard_size);
        file = shard_dir / name;
        if (auto done = read_shard(file, key, count)) {
          std::move(done->begin(), done->end(), entries.begin() + static_cast<std::ptrdiff_t>(first));
          continue;
        }
      }
      parallel_for(count, cfg.workers, [&](std::size_t k) {
        ShardEntry& e = entries[first + k];
        e.flat = todo[first + k];
        const Setpoints s = res.dense.setpoints(res.dense.indices(e.flat), c.n_bus());
        PointSolve ps = solve_grid_point(c, y, sys, generic, s, hc, cfg.tol);
        e.paths = ps.paths;
        e.feasible = std::move(ps.feasible);
      });
      if (!file.empty())
        write_atomically(file, shard_json(key, std::vector<ShardEntry>(entries.begin() + static_cast<std::ptrdiff_t>(first),
                                                                     entries.begin() + static_cast<std::ptrdiff_t>(first + count)))
                                   .dump());
    }
  }

  st.nphc_solves = entries.size();
  for (const auto& e : entries) {
    st.paths_tracked += static_cast<std::uint64_t>(e.paths.total());
    st.path_failures += static_cast<std::uint64_t>(e.paths.failed);
    if (e.paths.failed > 0) {
      ++st.points_with_failures;
      res.failed_points.push_back(e.flat);
    }
    const std::vector<int> idx = res.dense.indices(e.flat);
    for (const auto& v : e.feasible) {
      PointRecord r;
      r.indices = idx;
      r.voltage = v;
      r.state = evaluate(c, y, v);
      r.path_failures = e.paths.failed;
      res.points.push_back(std::move(r));
    }
  }
  st.nphc_points = res.points.size();

  // Rank-1 harvests, each kept once.
  std::vector<VoltagePoint> kept;
  auto harvest = [&](const std::vector<VoltagePoint>& pts, Provenance prov) {
    for (const auto& v : pts) {
      bool dup = false;
      for (const auto& k : kept) dup = dup || close_points(k, v, 1e-6);
      if (dup) continue;
      kept.push_back(v);
      PointRecord r;
      r.voltage = v;
      r.state = evaluate(c, y, v);
      r.provenance = prov;
      res.points.push_back(std::move(r));
    }
  };
  harvest(res.tightening.harvested_points, Provenance::kTightenHarvest);
  harvest(res.pruning.harvested_points, Provenance::kPruneHarvest);
  st.harvested_points = kept.size();
  st.components = label_components(res.points, res.dense);
  return res;
}

}  // namespace opf
