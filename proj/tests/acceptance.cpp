// Acceptance runner: one PASS/FAIL/SKIP line per criterion, exit status 1 if
// anything failed. Criterion 7 runs only with OPF_EXTENDED=1.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "opf/atlas.hpp"
#include "opf/cases.hpp"
#include "opf/export.hpp"
#include "opf/moment.hpp"
#include "oracles.hpp"

using namespace opf;
namespace fs = std::filesystem;

namespace {

enum class Verdict { kPass, kFail, kSkip };

struct Outcome {
  Verdict verdict = Verdict::kFail;
  std::string detail;
};

Outcome pass_if(bool ok, const std::string& detail) { return {ok ? Verdict::kPass : Verdict::kFail, detail}; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Two-bus closed form and multistart Newton against the Bezout solve.
Outcome two_bus_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mismatched = 0, missed = 0, real_total = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const oracle::TwoBus tb{0.95 + 0.1 * u(rng), 1.2 * u(rng),     -0.2 + 0.7 * u(rng),
                            0.005 + 0.045 * u(rng), 0.05 + 0.25 * u(rng), 0.1 * u(rng)};
    const NetworkCase c = load_case(oracle::two_bus_document(tb));
    const ParameterizedSystem sys = build_pf_system(c, build_admittance(c), 0);
    Eigen::VectorXcd p(1);
    p << tb.e;
    const PolynomialSystem target = substitute_parameters(sys, p);
    HomotopyConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(trial + 1);
    const SolutionSet s = solve_bezout(target, cfg);

    const auto pts = extract_real_solutions(s, sys, tb.e, cfg.real_imag_tol);
    const auto ref = oracle::two_bus_solutions(tb);
    real_total += static_cast<int>(ref.size());
    bool same = pts.size() == ref.size();
    for (const auto& v : ref) {
      bool hit = false;
      for (const auto& q : pts) hit = hit || std::abs(oracle::cplx(q.vd(1), q.vq(1)) - v) <= 1e-6;
      same = same && hit;
    }
    mismatched += !same;

    const auto found = real_solutions(s, cfg.real_imag_tol);
    for (const auto& r : oracle::multistart_newton(target, 10000, 3.0, 5000 + trial)) {
      bool hit = false;
      for (const auto& f : found) hit = hit || (f - r).cwiseAbs().maxCoeff() <= 1e-6;
      missed += !hit;
    }
  }
  return pass_if(mismatched == 0 && missed == 0,
                 fmt("50 cases, %d real solutions; %d set mismatches, %d Newton roots missed", real_total, mismatched,
                     missed));
}

// 2. Generic WB5 solve tracks the full Bezout count without losing paths.
Outcome bezout_count() {
  const NetworkCase c = resolve_case("wb5");
  const AdmittanceMatrix y = build_admittance(c);
  const ParameterizedSystem sys = build_pf_system(c, y, select_slack(c));
  const GenericSolve g = generic_solve(c, sys, HomotopyConfig{}, {});
  const PathStats& p = g.solutions.path_stats;
  const int expect = 1 << (2 * c.n_bus() - 2);
  return pass_if(p.total() == expect && p.total() == 256 && p.failed == 0,
                 fmt("tracked %d (converged %d, diverged %d, failed %d), %zu generic solutions", p.total(), p.converged,
                     p.diverged, p.failed, g.solutions.solutions.size()));
}

// 3. Order one is a strict bound without rank one; order two extracts.
Outcome wb5_relaxations() {
  const NetworkCase c = resolve_case("wb5");
  const AdmittanceMatrix y = build_admittance(c);
  const BoundSet b = BoundSet::from_case(c);
  const RelaxationResult r1 = solve_relaxation(assemble_relaxation(c, y, b, 1, RelaxationObjective::cost()));
  const RelaxationResult r2 = solve_relaxation(assemble_relaxation(c, y, b, 2, RelaxationObjective::cost()));
  if (!r1.optimal() || !r2.optimal()) return {Verdict::kFail, "relaxation not solved to optimality"};
  if (!r2.rank.extracted) return {Verdict::kFail, fmt("order 2 rank %d, nothing extracted", r2.rank.numeric_rank)};
  const EvaluatedState s = evaluate(c, y, *r2.rank.extracted);
  const int g1 = c.bus_index(1), g5 = c.bus_index(5);
  const double dp1 = std::abs(s.p_inj(g1) - 1.81), dp5 = std::abs(s.p_inj(g5) - 2.21),
               dq5 = std::abs(s.q_inj(g5) + 0.30);
  // Strict means a gap well above solver accuracy, which is ~1e-5 in cost units.
  const bool strict = r1.solution.objective_value < s.cost - 1e-3;
  const bool ok = !r1.rank.extracted && strict && dp1 <= 0.01 && dp5 <= 0.01 && dq5 <= 0.01 &&
                  check_feasibility(c, y, *r2.rank.extracted, 1e-4).feasible;
  return pass_if(ok, fmt("order 1 bound %.3f (rank %d), order 2 point P1 %.4f P5 %.4f Q5 %.4f cost %.3f",
                         r1.solution.objective_value, r1.rank.numeric_rank, s.p_inj(g1), s.p_inj(g5), s.q_inj(g5),
                         s.cost));
}

RunConfig wb5_desk_config() {
  RunConfig cfg;
  cfg.case_id = "wb5";
  cfg.dp = 0.25;
  cfg.dv = 0.01;
  cfg.sparse_dp = 1.0;
  cfg.sparse_dv = 0.05;
  cfg.betas = {1.0};
  cfg.gamma_max = 2;
  return cfg;
}

double best_cost(const FeasibleSpaceResult& r, int component) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : r.points)
    if (p.component == component) best = std::min(best, p.state.cost);
  return best;
}

// 4. Desk-scale WB5 feasible space.
Outcome wb5_desk(const FeasibleSpaceResult& r) {
  if (r.points.empty()) return {Verdict::kFail, "no feasible points"};
  const double global = best_cost(r, 0);
  const double rel = std::abs(global - 945.1) / 945.1;
  const double second = r.stats.components > 1 ? best_cost(r, 1) : 0.0;
  const double excess = r.stats.components > 1 ? 100.0 * (second - global) / global : 0.0;
  return pass_if(r.stats.components == 2 && rel <= 0.02 && std::abs(excess - 14.34) <= 2.0,
                 fmt("%d components, %zu points; global %.2f (%.2f%% from 945.1), second component %.2f (+%.2f%%)",
                     r.stats.components, r.points.size(), global, 100.0 * rel, second, excess));
}

// 5. Eliminated grid points hold no feasible solution. Half the sample is
// drawn from points removed by tightening, half from points removed by
// pruning, so both stages are exercised.
Outcome wb5_soundness(const FeasibleSpaceResult& r) {
  std::vector<std::vector<int>> by_tightening, by_pruning;
  for (std::uint64_t f = 0; f < r.raw.size(); ++f) {
    const auto idx = r.raw.indices(f);
    if (!r.dense.contains(idx))
      by_tightening.push_back(idx);
    else if (!r.alive[r.dense.flat(idx)])
      by_pruning.push_back(idx);
  }
  std::mt19937_64 rng(5);
  std::vector<std::vector<int>> sample;
  auto draw = [&](std::vector<std::vector<int>>& from, std::size_t n) {
    std::shuffle(from.begin(), from.end(), rng);
    for (std::size_t k = 0; k < std::min(n, from.size()); ++k) sample.push_back(from[k]);
  };
  draw(by_pruning, 50);
  draw(by_tightening, 100 - sample.size());
  const AdmittanceMatrix y = build_admittance(r.net);
  const ParameterizedSystem sys = build_pf_system(r.net, y, r.raw.slack);
  HomotopyConfig hc = r.config.homotopy;
  hc.seed = r.config.seed;
  const GenericSolve g = generic_solve(r.net, sys, hc, {});
  int feasible = 0, failures = 0;
  for (const auto& idx : sample) {
    const PointSolve ps = solve_grid_point(r.net, y, sys, g, r.raw.setpoints(idx, r.net.n_bus()), hc, r.config.tol);
    feasible += static_cast<int>(ps.feasible.size());
    failures += ps.paths.failed;
  }
  return pass_if(sample.size() == 100 && feasible == 0,
                 fmt("%zu re-solved (%zu of %zu pruned, rest of %zu tightened); %d feasible, %d failed paths",
                     sample.size(), std::min<std::size_t>(50, by_pruning.size()), by_pruning.size(),
                     by_tightening.size(), feasible, failures));
}

// 6. Full pipeline against the exhaustive run on a sub-box.
Outcome completeness() {
  RunConfig cfg;
  cfg.case_id = "wb5";
  cfg.box = "P5=2.0:2.4,V=1.0:1.05";
  cfg.dp = 0.05;
  cfg.dv = 0.005;
  cfg.sparse_dp = 0.2;
  cfg.sparse_dv = 0.025;
  const FeasibleSpaceResult full = compute_feasible_space(cfg);
  cfg.tighten = cfg.prune = false;
  const FeasibleSpaceResult all = compute_feasible_space(cfg);
  auto grid_points = [](const FeasibleSpaceResult& r) {
    std::vector<const PointRecord*> out;
    for (const auto& p : r.points)
      if (p.provenance == Provenance::kNphc) out.push_back(&p);
    return out;
  };
  const auto a = grid_points(full), b = grid_points(all);
  bool same = a.size() == b.size();
  for (std::size_t k = 0; same && k < a.size(); ++k)
    same = a[k]->indices == b[k]->indices && (a[k]->voltage.vd - b[k]->voltage.vd).cwiseAbs().maxCoeff() <= 1e-9 &&
           (a[k]->voltage.vq - b[k]->voltage.vq).cwiseAbs().maxCoeff() <= 1e-9;
  return pass_if(same && !b.empty(),
                 fmt("pipeline solved %llu of %llu grid points; %zu vs %zu feasible points", (unsigned long long)full.stats.nphc_solves,
                     (unsigned long long)all.stats.nphc_solves, a.size(), b.size()));
}

// 7. case9mod structure, extended only.
Outcome case9mod_structure() {
  const char* flag = std::getenv("OPF_EXTENDED");
  if (!flag || std::string(flag) != "1") return {Verdict::kSkip, "set OPF_EXTENDED=1 to run"};
  const NetworkCase c = resolve_case("case9mod");
  const AdmittanceMatrix y = build_admittance(c);
  const RelaxationResult r2 =
      solve_relaxation(assemble_relaxation(c, y, BoundSet::from_case(c), 2, RelaxationObjective::cost()));
  std::string where = "order 2 extracted nothing";
  bool located = false;
  if (r2.rank.extracted) {
    const EvaluatedState s = evaluate(c, y, *r2.rank.extracted);
    const auto gens = c.generator_buses();
    const double target[3] = {0.10, 1.254, 0.570};
    located = gens.size() == 3;
    for (std::size_t k = 0; located && k < 3; ++k) located = std::abs(s.p_inj(gens[k]) - target[k]) <= 0.02;
    where = fmt("order 2 point (%.4f, %.4f, %.4f)", s.p_inj(gens[0]), s.p_inj(gens[1]), s.p_inj(gens[2]));
  }
  RunConfig cfg;
  cfg.case_id = "case9mod";
  cfg.dp = 0.10;
  cfg.dv = 0.01;
  cfg.sparse_dp = 0.5;
  cfg.sparse_dv = 0.05;
  cfg.betas = {100.0, 10.0, 1.0};
  cfg.gamma_max = 1;
  const FeasibleSpaceResult r = compute_feasible_space(cfg);
  return pass_if(located && r.stats.components >= 3,
                 fmt("%s; coarse run %d components over %zu points", where.c_str(), r.stats.components, r.points.size()));
}

// 8. Randomized property suites, run from the unit test binaries.
Outcome property_suites() {
  struct Suite {
    const char* name;
    const char* binary;
    const char* filter;
  };
  const Suite suites[] = {
      {"complex-power identity", OPF_TEST_NETMODEL, "Injections.ComplexPowerIdentityOnRandomNetworks"},
      {"current-magnitude identity", OPF_TEST_NETMODEL, "CurrentSq.MatchesMagnitudeOracle"},
      {"jacobian vs finite differences", OPF_TEST_POLYSYS, "EvalJacobian.MatchesCentralDifferences"},
      {"lower bound, monotone orders, extraction", OPF_TEST_MOMENT,
       "Relaxation.LowerBoundMonotonicityAndExtraction:RankExtraction.NoisyRankOneBlock"},
      {"conjugate symmetry", OPF_TEST_NPHC, "SolveBezout.ConjugateClosedForRealTargets"},
      {"stage accounting identity", OPF_TEST_ATLAS, "ComputeFeasibleSpace.StageAccountingIdentity"},
  };
  std::string failed;
  for (const auto& s : suites) {
    const std::string cmd = std::string("\"") + s.binary + "\" --gtest_filter=" + s.filter + " > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) failed += std::string(failed.empty() ? "" : ", ") + s.name;
  }
  return pass_if(failed.empty(), failed.empty() ? "6 suites passed" : "failed: " + failed);
}

}  // namespace

int main(int argc, char** argv) {
  // Optional list of criterion numbers to run, e.g. "acceptance 1 3".
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };

  std::optional<FeasibleSpaceResult> desk;
  auto desk_run = [&]() -> const FeasibleSpaceResult& {
    if (!desk) desk = compute_feasible_space(wb5_desk_config());
    return *desk;
  };

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, two_bus_oracle},
      {2, bezout_count},
      {3, wb5_relaxations},
      {4, [&] { return wb5_desk(desk_run()); }},
      {5, [&] { return wb5_soundness(desk_run()); }},
      {6, completeness},
      {7, case9mod_structure},
      {8, property_suites},
  };
  int failures = 0;
  for (const auto& [k, run] : criteria) {
    if (!wanted(k)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {Verdict::kFail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = o.verdict == Verdict::kPass ? "PASS" : o.verdict == Verdict::kFail ? "FAIL" : "SKIP";
    failures += o.verdict == Verdict::kFail;
    std::cout << tag << " criterion " << k << ": " << o.detail << fmt(" [%.1f s]", secs) << std::endl;
  }
  return failures ? 1 : 0;
}
