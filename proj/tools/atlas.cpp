// atlas: command line front end for the feasible space pipeline.

#include <CLI11.hpp>
#include <chrono>
#include <iostream>

#include "opf/atlas.hpp"
#include "opf/cases.hpp"
#include "opf/export.hpp"

using namespace opf;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

struct CommonArgs {
  std::string case_id = "wb5";
  std::string box;
  double tol = kDefaultFeasibilityTol;
  int gamma_max = 2;
  int workers = 1;
};

void add_common(CLI::App* app, CommonArgs& a) {
  app->add_option("--case", a.case_id, "Preset id or path to a case document")->capture_default_str();
  app->add_option("--box", a.box, "Sub-box, e.g. P5=2.0:2.4,V=1.0:1.05");
  app->add_option("--tol", a.tol, "Feasibility tolerance")->capture_default_str();
  app->add_option("--gamma-max", a.gamma_max, "Highest relaxation order (1 or 2)")->capture_default_str();
  app->add_option("--workers", a.workers, "Worker threads")->capture_default_str();
}

NetworkCase load(const CommonArgs& a) {
  const NetworkCase c = resolve_case(a.case_id);
  return a.box.empty() ? c : apply_box(c, parse_box(a.box, c));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feasible space atlas for small optimal power flow problems"};
  app.require_subcommand(1);

  CommonArgs common;
  RunConfig cfg;
  std::string out_dir = "atlas_out";
  std::string cache_dir;
  bool no_tighten = false, no_prune = false;

  auto* compute = app.add_subcommand("compute", "Run every stage and write the output files");
  add_common(compute, common);
  compute->add_option("--dp", cfg.dp, "Dense P spacing (per unit)")->capture_default_str();
  compute->add_option("--dv", cfg.dv, "Dense V spacing (per unit)")->capture_default_str();
  compute->add_option("--sparse-dp", cfg.sparse_dp, "Sparse P spacing (per unit)")->capture_default_str();
  compute->add_option("--sparse-dv", cfg.sparse_dv, "Sparse V spacing (per unit)")->capture_default_str();
  compute->add_option("--beta", cfg.betas, "Ellipse weights, comma separated")->delimiter(',')->capture_default_str();
  compute->add_option("--seed", cfg.seed, "Homotopy seed")->capture_default_str();
  compute->add_option("--out", out_dir, "Output directory")->capture_default_str();
  compute->add_option("--cache", cache_dir, "Generic solve cache directory (default <out>/cache)");
  compute->add_option("--shard-size", cfg.shard_size, "Grid points per resumable shard")->capture_default_str();
  compute->add_flag("--no-tighten", no_tighten, "Skip bound tightening");
  compute->add_flag("--no-prune", no_prune, "Skip grid pruning");

  auto* tighten = app.add_subcommand("tighten", "Tighten the bounds and print them with the report");
  add_common(tighten, common);

  auto* prune = app.add_subcommand("prune", "Tighten, then prune the dense grid and print the certificates");
  add_common(prune, common);
  prune->add_option("--dp", cfg.dp)->capture_default_str();
  prune->add_option("--dv", cfg.dv)->capture_default_str();
  prune->add_option("--sparse-dp", cfg.sparse_dp)->capture_default_str();
  prune->add_option("--sparse-dv", cfg.sparse_dv)->capture_default_str();
  prune->add_option("--beta", cfg.betas)->delimiter(',')->capture_default_str();
  prune->add_flag("--no-tighten", no_tighten, "Prune against the case bounds");

  std::vector<int> eta, mu;
  auto* solve_pf = app.add_subcommand("solve-pf", "Solve the power flow equations at one grid point");
  add_common(solve_pf, common);
  solve_pf->add_option("--dp", cfg.dp)->capture_default_str();
  solve_pf->add_option("--dv", cfg.dv)->capture_default_str();
  solve_pf->add_option("--eta", eta, "P indices of the non-slack generators, ascending bus")->delimiter(',');
  solve_pf->add_option("--mu", mu, "V indices of the generators, ascending bus")->delimiter(',');
  solve_pf->add_option("--seed", cfg.seed)->capture_default_str();

  auto* cases = app.add_subcommand("cases", "List the built-in cases");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const auto t0 = std::chrono::steady_clock::now();
    if (*cases) {
      for (const auto& p : builtin_cases()) std::cout << p.id << "\t" << p.description << "\n";
      return 0;
    }
    cfg.case_id = common.case_id;
    cfg.box = common.box;
    cfg.tol = common.tol;
    cfg.gamma_max = common.gamma_max;
    cfg.workers = common.workers;

    if (*compute) {
      cfg.tighten = !no_tighten;
      cfg.prune = !no_prune;
      cfg.out_dir = out_dir;
      cfg.cache_dir = cache_dir.empty() ? std::filesystem::path(out_dir) / "cache" : std::filesystem::path(cache_dir);
      const FeasibleSpaceResult r = compute_feasible_space(cfg);
      export_results(r, out_dir);
      const RunStats& s = r.stats;
      std::cerr << "raw " << s.raw << ", after tightening " << s.after_tightening << ", after pruning " << s.after_pruning
                << ", feasible points " << s.nphc_points << " + " << s.harvested_points << " harvested, components "
                << s.components << ", " << seconds_since(t0) << " s\n";
      if (s.points_with_failures) std::cerr << s.points_with_failures << " grid points had failed paths\n";
      return 0;
    }

    const NetworkCase c = load(common);
    const AdmittanceMatrix y = build_admittance(c);

    if (*tighten) {
      TightenOptions o;
      o.gamma_max = cfg.gamma_max;
      o.feasibility_tol = cfg.tol;
      o.workers = cfg.workers;
      const TighteningResult r = tighten_bounds(c, y, BoundSet::from_case(c), o);
      std::cout << nlohmann::json{{"bounds", r.bounds.to_json()}, {"report", r.report.to_json(c)}}.dump(2) << "\n";
      return 0;
    }

    if (*prune) {
      cfg.validate();
      const int slack = select_slack(c);
      BoundSet b = BoundSet::from_case(c);
      if (!no_tighten) {
        TightenOptions o;
        o.gamma_max = cfg.gamma_max;
        o.feasibility_tol = cfg.tol;
        o.workers = cfg.workers;
        b = tighten_bounds(c, y, b, o).bounds;
      }
      const GridSpec dense = restrict_grid(enumerate_grid(c, BoundSet::from_case(c), cfg.dp, cfg.dv, slack), b);
      const GridSpec sparse = enumerate_grid(c, b, cfg.sparse_dp, cfg.sparse_dv, slack);
      PruneOptions po;
      po.betas = cfg.betas;
      po.gamma_max = cfg.gamma_max;
      po.feasibility_tol = cfg.tol;
      po.workers = cfg.workers;
      const PruneResult r = prune_grid(c, y, b, dense, sparse, po);
      std::cout << nlohmann::json{{"dense_points", dense.size()},
                                  {"sparse_points", sparse.size()},
                                  {"bounds", b.to_json()},
                                  {"pruning", r.report.to_json(c)}}
                       .dump(2)
                << "\n";
      return 0;
    }

    if (*solve_pf) {
      const int slack = select_slack(c);
      const GridSpec g = enumerate_grid(c, BoundSet::from_case(c), cfg.dp, cfg.dv, slack);
      std::vector<int> idx = eta;
      idx.insert(idx.end(), mu.begin(), mu.end());
      if (!g.contains(idx))
        throw std::invalid_argument("grid indices are outside the lattice; expected " + std::to_string(g.axes.size()) +
                                    " indices within the limits");
      const Setpoints s = g.setpoints(idx, c.n_bus());
      const ParameterizedSystem sys = build_pf_system(c, y, slack);
      HomotopyConfig hc;
      hc.seed = cfg.seed;
      const GenericSolve generic = generic_solve(c, sys, hc, {});
      const SolutionSet sol = solve_parameterized(sys, generic.solutions, generic.params, sys.params_for(s.p, s.v), hc);
      nlohmann::json pts = nlohmann::json::array();
      for (const auto& v : extract_real_solutions(sol, sys, s.v(slack), hc.real_imag_tol)) {
        const VoltagePoint w = rotate_to_reference(v, c.ref_bus);
        const EvaluatedState e = evaluate(c, y, w);
        nlohmann::json pg = nlohmann::json::object(), qg = nlohmann::json::object();
        for (int b : c.generator_buses()) {
          pg[std::to_string(c.buses[b].id)] = e.p_inj(b);
          qg[std::to_string(c.buses[b].id)] = e.q_inj(b);
        }
        pts.push_back({{"vd", std::vector<double>(w.vd.data(), w.vd.data() + w.vd.size())},
                       {"vq", std::vector<double>(w.vq.data(), w.vq.data() + w.vq.size())},
                       {"p_g", pg},
                       {"q_g", qg},
                       {"cost", e.cost},
                       {"feasible", check_feasibility(c, y, w, cfg.tol).feasible}});
      }
      const PathStats& ps = sol.path_stats;
      std::cout << nlohmann::json{{"paths", {{"converged", ps.converged}, {"diverged", ps.diverged}, {"failed", ps.failed}}},
                                  {"real_solutions", pts}}
                       .dump(2)
                << "\n";
      return 0;
    }
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}
