#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "opf/atlas.hpp"
#include "opf/cases.hpp"
#include "opf/export.hpp"
#include "oracles.hpp"

using namespace opf;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("opf_atlas_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string write_case(const fs::path& dir, const nlohmann::json& doc, int k) {
  const fs::path p = dir / ("case" + std::to_string(k) + ".json");
  std::ofstream(p) << doc.dump();
  return p.string();
}

RunConfig small_config(const std::string& case_path, int gamma_max) {
  RunConfig cfg;
  cfg.case_id = case_path;
  cfg.dp = 0.25;
  cfg.dv = 0.02;
  cfg.sparse_dp = 0.5;
  cfg.sparse_dv = 0.05;
  cfg.gamma_max = gamma_max;
  return cfg;
}

std::vector<const PointRecord*> nphc_points(const FeasibleSpaceResult& r) {
  std::vector<const PointRecord*> out;
  for (const auto& p : r.points)
    if (p.provenance == Provenance::kNphc) out.push_back(&p);
  return out;
}

bool same_record(const PointRecord& a, const PointRecord& b, double tol) {
  return a.indices == b.indices && (a.voltage.vd - b.voltage.vd).cwiseAbs().maxCoeff() <= tol &&
         (a.voltage.vq - b.voltage.vq).cwiseAbs().maxCoeff() <= tol;
}

PointRecord synthetic(const NetworkCase& c, const GridSpec& g, std::vector<double> coords, double cost) {
  PointRecord r;
  r.state.p_inj = Eigen::VectorXd::Zero(c.n_bus());
  r.state.v_sq = Eigen::VectorXd::Ones(c.n_bus());
  for (std::size_t d = 0; d < g.axes.size(); ++d) {
    const auto& a = g.axes[d];
    const double x = a.origin + coords[d] * a.step;
    if (a.kind == GridAxis::Kind::kActivePower)
      r.state.p_inj(a.bus) = x;
    else
      r.state.v_sq(a.bus) = x * x;
    if (coords[d] == std::round(coords[d])) r.indices.push_back(static_cast<int>(coords[d]));
  }
  if (r.indices.size() != g.axes.size()) r.indices.clear();
  r.state.cost = cost;
  return r;
}

}  // namespace

TEST(RunConfig, Validation) {
  RunConfig ok;
  EXPECT_NO_THROW(ok.validate());
  auto bad = [&](auto mutate) {
    RunConfig c = ok;
    mutate(c);
    EXPECT_THROW(c.validate(), std::invalid_argument);
  };
  bad([](RunConfig& c) { c.dp = 0.0; });
  bad([](RunConfig& c) { c.sparse_dv = c.dv; });
  bad([](RunConfig& c) { c.sparse_dp = 0.1; });
  bad([](RunConfig& c) { c.betas.clear(); });
  bad([](RunConfig& c) { c.betas = {1.0, -1.0}; });
  bad([](RunConfig& c) { c.gamma_max = 3; });
  bad([](RunConfig& c) { c.workers = 0; });
  bad([](RunConfig& c) { c.tol = 0.0; });
}

TEST(ComputeFeasibleSpace, RejectsUnknownCaseAndBadBox) {
  RunConfig cfg;
  cfg.case_id = "no-such-case";
  EXPECT_ANY_THROW(compute_feasible_space(cfg));
  cfg.case_id = "wb5";
  cfg.box = "P5=2.0:99";
  EXPECT_THROW(compute_feasible_space(cfg), std::invalid_argument);
}

// raw - removed by tightening - removed by pruning = solves, and every
// reported point is feasible and sits on a surviving grid point.
TEST(ComputeFeasibleSpace, StageAccountingIdentity) {
  const fs::path dir = scratch_dir("accounting");
  std::mt19937_64 rng(51);
  std::uint64_t solves = 0, removed = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const oracle::TwoGen t = oracle::random_two_gen(rng);
    const RunConfig cfg = small_config(write_case(dir, oracle::two_gen_document(t), trial), 1 + trial % 2);
    const FeasibleSpaceResult r = compute_feasible_space(cfg);
    const RunStats& s = r.stats;
    ASSERT_EQ(s.raw - s.removed_by_tightening() - s.removed_by_pruning(), s.nphc_solves) << "trial " << trial;
    EXPECT_EQ(s.raw, r.raw.size());
    EXPECT_EQ(s.after_tightening, r.dense.size());
    EXPECT_EQ(s.after_pruning, static_cast<std::uint64_t>(std::count(r.alive.begin(), r.alive.end(), 1)));
    EXPECT_LE(s.after_tightening, s.raw);
    const auto pts = nphc_points(r);
    EXPECT_EQ(s.nphc_points, pts.size());
    EXPECT_DOUBLE_EQ(s.feasible_fraction(), s.nphc_solves ? double(pts.size()) / double(s.nphc_solves) : 0.0);
    EXPECT_EQ(s.harvested_points, r.points.size() - pts.size());
    const AdmittanceMatrix y = build_admittance(r.net);
    for (const auto& p : r.points) {
      EXPECT_TRUE(check_feasibility(r.net, y, p.voltage, cfg.tol).feasible);
      EXPECT_GE(p.component, 0);
      EXPECT_LT(p.component, s.components);
    }
    for (const auto* p : pts) EXPECT_TRUE(r.alive.at(r.dense.flat(p->indices)));
    // Harvested points from both stages are all present.
    EXPECT_LE(s.harvested_points, r.tightening.harvested_points.size() + r.pruning.harvested_points.size());
    if (!r.tightening.harvested_points.empty() || !r.pruning.harvested_points.empty())
      EXPECT_GT(s.harvested_points, 0u);
    solves += s.nphc_solves;
    removed += s.removed_by_tightening() + s.removed_by_pruning();
  }
  EXPECT_GT(solves, 0u);
  EXPECT_GT(removed, 0u);
  fs::remove_all(dir);
}

// Tightening and pruning never delete a feasible grid solution.
TEST(ComputeFeasibleSpace, MatchesExhaustiveRun) {
  const fs::path dir = scratch_dir("exhaustive");
  std::mt19937_64 rng(52);
  std::size_t compared = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const oracle::TwoGen t = oracle::random_two_gen(rng);
    RunConfig cfg = small_config(write_case(dir, oracle::two_gen_document(t), trial), 2);
    const FeasibleSpaceResult full = compute_feasible_space(cfg);
    cfg.tighten = cfg.prune = false;
    const FeasibleSpaceResult all = compute_feasible_space(cfg);
    EXPECT_EQ(all.stats.nphc_solves, all.stats.raw);
    const auto a = nphc_points(full), b = nphc_points(all);
    ASSERT_EQ(a.size(), b.size()) << "trial " << trial;
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_TRUE(same_record(*a[k], *b[k], 1e-9)) << "trial " << trial;
    compared += a.size();
  }
  EXPECT_GT(compared, 0u);
  fs::remove_all(dir);
}

TEST(ComputeFeasibleSpace, DeterministicAndResumableFromShards) {
  const fs::path dir = scratch_dir("shards");
  std::mt19937_64 rng(53);
  oracle::TwoGen t = oracle::random_two_gen(rng);
  RunConfig cfg = small_config(write_case(dir, oracle::two_gen_document(t), 0), 1);
  cfg.out_dir = dir / "out";
  cfg.cache_dir = dir / "cache";
  cfg.shard_size = 16;
  const FeasibleSpaceResult first = compute_feasible_space(cfg);
  ASSERT_GT(first.stats.nphc_solves, 16u);
  std::vector<fs::path> shards;
  for (const auto& e : fs::directory_iterator(cfg.out_dir / "shards")) shards.push_back(e.path());
  EXPECT_EQ(shards.size(), (first.stats.nphc_solves + 15) / 16);
  EXPECT_FALSE(fs::is_empty(cfg.cache_dir));

  // A torn shard is recomputed; the rest are read back.
  std::ofstream(shards.front()) << "{\"key\": ";
  cfg.workers = 3;
  const FeasibleSpaceResult again = compute_feasible_space(cfg);
  RunConfig fresh = cfg;
  fresh.out_dir.clear();
  fresh.cache_dir.clear();
  const FeasibleSpaceResult clean = compute_feasible_space(fresh);
  for (const FeasibleSpaceResult* r : {&again, &clean}) {
    ASSERT_EQ(r->points.size(), first.points.size());
    for (std::size_t k = 0; k < first.points.size(); ++k) {
      EXPECT_TRUE(same_record(r->points[k], first.points[k], 0.0));
      EXPECT_EQ(r->points[k].component, first.points[k].component);
      EXPECT_EQ(r->points[k].provenance, first.points[k].provenance);
    }
  }
  fs::remove_all(dir);
}

TEST(LabelComponents, GridAdjacencyAndHarvestBridges) {
  const NetworkCase c = resolve_case("wb5");
  const GridSpec g = enumerate_grid(c, BoundSet::from_case(c), 0.25, 0.01, select_slack(c));
  std::vector<PointRecord> pts;
  pts.push_back(synthetic(c, g, {0, 0, 0}, 10.0));
  pts.push_back(synthetic(c, g, {1, 1, 1}, 12.0));  // diagonal neighbour
  pts.push_back(synthetic(c, g, {3, 1, 1}, 5.0));   // two steps away
  pts.push_back(synthetic(c, g, {3, 1, 1}, 6.0));   // second solution, same point
  pts.push_back(synthetic(c, g, {7, 0, 0}, 1.0));
  EXPECT_EQ(label_components(pts, g), 3);
  EXPECT_EQ(pts[4].component, 0);
  EXPECT_EQ(pts[2].component, 1);
  EXPECT_EQ(pts[3].component, 1);
  EXPECT_EQ(pts[0].component, 2);
  EXPECT_EQ(pts[1].component, pts[0].component);

  // An off-grid point within one step of both clusters joins them.
  pts.push_back(synthetic(c, g, {2.0, 1.0, 1.5}, 20.0));
  EXPECT_TRUE(pts.back().indices.empty());
  EXPECT_EQ(label_components(pts, g), 2);
  EXPECT_EQ(pts[0].component, pts[2].component);
  EXPECT_EQ(pts[5].component, pts[2].component);

  std::vector<PointRecord> none;
  EXPECT_EQ(label_components(none, g), 0);
}

TEST(Export, RoundsToSignificantFigures) {
  EXPECT_DOUBLE_EQ(round_significant(98.65432, 4), 98.65);
  EXPECT_DOUBLE_EQ(round_significant(0.0123456, 4), 0.01235);
  EXPECT_DOUBLE_EQ(round_significant(76.46, 4), 76.46);
  EXPECT_DOUBLE_EQ(round_significant(0.0, 4), 0.0);
}

TEST(Export, ProjectionColumns) {
  EXPECT_EQ(projection_columns(resolve_case("wb5")), (std::vector<std::string>{"P_G1", "P_G5", "Q_G5", "cost"}));
  EXPECT_EQ(projection_columns(resolve_case("case9mod")),
            (std::vector<std::string>{"P_G1", "P_G2", "P_G3", "cost"}));
}

TEST(Export, EmptyResultGivesHeaderOnlyFiles) {
  FeasibleSpaceResult r;
  r.net = resolve_case("wb5");
  r.dense = enumerate_grid(r.net, BoundSet::from_case(r.net), 1.0, 0.05, 0);
  std::ostringstream pts, proj;
  write_points_csv(pts, r);
  write_projection_csv(proj, r);
  const std::string text = pts.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
  EXPECT_EQ(proj.str(), "P_G1,P_G5,Q_G5,cost,component\n");
  EXPECT_EQ(text.rfind("eta_5,mu_1,mu_5,Vd_1,", 0), 0u) << text;
}

TEST(Export, WritesFilesAndReportsBadPaths) {
  const fs::path dir = scratch_dir("export");
  std::mt19937_64 rng(54);
  const RunConfig cfg = small_config(write_case(dir, oracle::two_gen_document(oracle::random_two_gen(rng)), 0), 1);
  const FeasibleSpaceResult r = compute_feasible_space(cfg);
  export_results(r, dir / "out");
  for (const char* f : {"points.csv", "projection.csv", "summary.json", "certificates.json"})
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  std::ifstream in(dir / "out" / "points.csv");
  std::string line;
  std::size_t rows = 0;
  std::getline(in, line);
  const auto cols = std::count(line.begin(), line.end(), ',');
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), cols);
  }
  EXPECT_EQ(rows, r.points.size());
  const nlohmann::json s = nlohmann::json::parse(std::ifstream(dir / "out" / "summary.json"));
  EXPECT_EQ(s.at("stats").at("nphc_solves").get<std::uint64_t>(), r.stats.nphc_solves);
  EXPECT_EQ(s.at("components").size(), static_cast<std::size_t>(r.stats.components));

  std::ofstream(dir / "blocker") << "x";
  try {
    export_results(r, dir / "blocker");
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("blocker"), std::string::npos);
  }
  fs::remove_all(dir);
}
