#include "opf/export.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace opf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string bus_label(const NetworkCase& c, int bus) { return std::to_string(c.buses.at(bus).id); }

std::vector<std::string> index_columns(const FeasibleSpaceResult& r) {
  std::vector<std::string> cols;
  for (const auto& a : r.dense.axes)
    cols.push_back((a.kind == GridAxis::Kind::kActivePower ? "eta_" : "mu_") + bus_label(r.net, a.bus));
  return cols;
}

double percent(std::uint64_t part, std::uint64_t whole) {
  return whole ? round_significant(100.0 * double(part) / double(whole), 4) : 0.0;
}

json point_summary(const NetworkCase& c, const PointRecord& p) {
  json pg = json::object(), qg = json::object();
  for (int b : c.generator_buses()) {
    pg[bus_label(c, b)] = p.state.p_inj(b);
    qg[bus_label(c, b)] = p.state.q_inj(b);
  }
  return {{"cost", p.state.cost}, {"p_g", pg}, {"q_g", qg}, {"provenance", to_string(p.provenance)}};
}

template <typename Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  fn(out);
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

double round_significant(double x, int digits) {
  if (x == 0.0 || !std::isfinite(x)) return x;
  const double scale = std::pow(10.0, digits - 1 - static_cast<int>(std::floor(std::log10(std::abs(x)))));
  return std::round(x * scale) / scale;
}

void write_points_csv(std::ostream& out, const FeasibleSpaceResult& r) {
  const NetworkCase& c = r.net;
  const auto gens = c.generator_buses();
  std::vector<std::string> cols = index_columns(r);
  for (int i = 0; i < c.n_bus(); ++i)
    for (const char* q : {"Vd_", "Vq_", "Vm_"}) cols.push_back(q + bus_label(c, i));
  for (int b : gens) cols.push_back("PG_" + bus_label(c, b));
  for (int b : gens) cols.push_back("QG_" + bus_label(c, b));
  for (const auto& br : c.branches) {
    cols.push_back("S2_" + bus_label(c, br.from) + "_" + bus_label(c, br.to));
    cols.push_back("S2_" + bus_label(c, br.to) + "_" + bus_label(c, br.from));
  }
  for (const char* s : {"cost", "provenance", "component", "path_failures"}) cols.emplace_back(s);
  for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
  out << '\n';

  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  const std::size_t n_idx = r.dense.axes.size();
  for (const auto& p : r.points) {
    for (std::size_t k = 0; k < n_idx; ++k) {
      if (k) out << ',';
      if (k < p.indices.size()) out << p.indices[k];
    }
    if (n_idx) out << ',';
    for (int i = 0; i < c.n_bus(); ++i)
      out << p.voltage.vd(i) << ',' << p.voltage.vq(i) << ',' << std::sqrt(p.state.v_sq(i)) << ',';
    for (int b : gens) out << p.state.p_inj(b) << ',';
    for (int b : gens) out << p.state.q_inj(b) << ',';
    for (const auto& f : p.state.flows) out << f.s_sq[0] << ',' << f.s_sq[1] << ',';
    out << p.state.cost << ',' << to_string(p.provenance) << ',' << p.component << ',' << p.path_failures << '\n';
  }
}

std::vector<std::string> projection_columns(const NetworkCase& c) {
  std::vector<std::string> cols;
  const auto gens = c.generator_buses();
  for (int b : gens) cols.push_back("P_G" + bus_label(c, b));
  if (!gens.empty() && gens.size() < 3) cols.push_back("Q_G" + bus_label(c, gens.back()));
  cols.emplace_back("cost");
  return cols;
}

void write_projection_csv(std::ostream& out, const FeasibleSpaceResult& r) {
  const auto cols = projection_columns(r.net);
  for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
  out << ",component\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  const auto gens = r.net.generator_buses();
  for (const auto& p : r.points) {
    for (int b : gens) out << p.state.p_inj(b) << ',';
    if (!gens.empty() && gens.size() < 3) out << p.state.q_inj(gens.back()) << ',';
    out << p.state.cost << ',' << p.component << '\n';
  }
}

json summary_json(const FeasibleSpaceResult& r) {
  const RunStats& s = r.stats;
  json comps = json::array();
  for (int k = 0; k < s.components; ++k) {
    const PointRecord* best = nullptr;
    std::size_t size = 0;
    for (const auto& p : r.points) {
      if (p.component != k) continue;
      ++size;
      if (!best || p.state.cost < best->state.cost) best = &p;
    }
    comps.push_back({{"id", k}, {"points", size}, {"best", point_summary(r.net, *best)}});
  }
  json failed = json::array();
  for (auto f : r.failed_points) failed.push_back(r.dense.indices(f));
  return {{"case", r.net.name},
          {"config", r.config.to_json()},
          {"stats", s.to_json()},
          {"stage_percent",
           {{"removed_by_tightening_of_raw", percent(s.removed_by_tightening(), s.raw)},
            {"removed_by_pruning_of_tightened", percent(s.removed_by_pruning(), s.after_tightening)},
            {"solved_of_raw", percent(s.nphc_solves, s.raw)},
            {"feasible_fraction", round_significant(100.0 * s.feasible_fraction(), 4)}}},
          {"tightened_bounds", r.tightened.to_json()},
          {"components", comps},
          {"failed_points", failed}};
}

json certificates_json(const FeasibleSpaceResult& r) {
  return {{"tightening", r.tightening.to_json(r.net)},
          {"tightened_bounds", r.tightened.to_json()},
          {"pruning", r.pruning.to_json(r.net)}};
}

void export_results(const FeasibleSpaceResult& r, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "points.csv", [&](std::ostream& o) { write_points_csv(o, r); });
  write_file(dir / "projection.csv", [&](std::ostream& o) { write_projection_csv(o, r); });
  write_file(dir / "summary.json", [&](std::ostream& o) { o << summary_json(r).dump(2) << '\n'; });
  write_file(dir / "certificates.json", [&](std::ostream& o) { o << certificates_json(r).dump(2) << '\n'; });
}

}  // namespace opf
