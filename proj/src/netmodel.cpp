#include "opf/netmodel.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace opf {

using nlohmann::json;

const Generator* NetworkCase::generator_at(int i) const {
  for (const auto& g : generators)
    if (g.bus == i) return &g;
  return nullptr;
}

double NetworkCase::p_min(int i) const {
  const auto* g = generator_at(i);
  return g ? g->p_min : 0.0;
}
double NetworkCase::p_max(int i) const {
  const auto* g = generator_at(i);
  return g ? g->p_max : 0.0;
}
double NetworkCase::q_min(int i) const {
  const auto* g = generator_at(i);
  return g ? g->q_min : 0.0;
}
double NetworkCase::q_max(int i) const {
  const auto* g = generator_at(i);
  return g ? g->q_max : 0.0;
}

std::vector<int> NetworkCase::generator_buses() const {
  std::vector<int> out;
  for (int i = 0; i < n_bus(); ++i)
    if (is_generator(i)) out.push_back(i);
  return out;
}

int NetworkCase::bus_index(int id) const {
  for (int i = 0; i < n_bus(); ++i)
    if (buses[i].id == id) return i;
  return -1;
}

namespace {

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw CaseError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw CaseError(path + "." + key, "missing field");
  return *it;
}

double number(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number()) throw CaseError(path + "." + key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw CaseError(path + "." + key, "must be finite");
  return d;
}

int integer(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number_integer()) throw CaseError(path + "." + key, "expected an integer");
  return v.get<int>();
}

const json& array(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_array()) throw CaseError(path + "." + key, "expected an array");
  return v;
}

std::string at(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

}  // namespace

NetworkCase load_case(const json& doc) {
  const std::string root = "$";
  NetworkCase c;
  c.name = doc.is_object() && doc.contains("name") && doc["name"].is_string()
               ? doc["name"].get<std::string>()
               : std::string("unnamed");
  c.base_mva = number(doc, "base_mva", root);
  if (c.base_mva <= 0.0) throw CaseError("$.base_mva", "must be positive");

  // Power quantities and cost coefficients are either already per unit, or in
  // MW / MVAr / MVA and $/MWh-based units that are normalised here.
  bool per_unit = true;
  if (doc.contains("units")) {
    const json& u = doc["units"];
    if (!u.is_string()) throw CaseError("$.units", "expected \"pu\" or \"mw\"");
    const auto s = u.get<std::string>();
    if (s == "mw")
      per_unit = false;
    else if (s != "pu")
      throw CaseError("$.units", "expected \"pu\" or \"mw\"");
  }
  const double scale = per_unit ? 1.0 : 1.0 / c.base_mva;

  const json& buses = array(doc, "buses", root);
  if (buses.empty()) throw CaseError("$.buses", "at least one bus is required");
  std::set<int> ids;
  for (std::size_t i = 0; i < buses.size(); ++i) {
    const std::string p = at("$.buses", i);
    Bus b;
    b.id = integer(buses[i], "id", p);
    if (!ids.insert(b.id).second) throw CaseError(p + ".id", "duplicate bus index " + std::to_string(b.id));
    b.p_load = number(buses[i], "p_load", p) * scale;
    b.q_load = number(buses[i], "q_load", p) * scale;
    b.v_min = number(buses[i], "v_min", p);
    b.v_max = number(buses[i], "v_max", p);
    if (b.v_min <= 0.0) throw CaseError(p + ".v_min", "must be positive");
    if (b.v_min > b.v_max) throw CaseError(p + ".v_min", "v_min exceeds v_max");
    c.buses.push_back(b);
  }

  const json& gens = array(doc, "generators", root);
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const std::string p = at("$.generators", i);
    Generator g;
    const int id = integer(gens[i], "bus", p);
    g.bus = c.bus_index(id);
    if (g.bus < 0) throw CaseError(p + ".bus", "unknown bus " + std::to_string(id));
    if (c.generator_at(g.bus)) throw CaseError(p + ".bus", "more than one generator at bus " + std::to_string(id));
    g.p_min = number(gens[i], "p_min", p) * scale;
    g.p_max = number(gens[i], "p_max", p) * scale;
    g.q_min = number(gens[i], "q_min", p) * scale;
    g.q_max = number(gens[i], "q_max", p) * scale;
    if (g.p_min > g.p_max) throw CaseError(p + ".p_min", "p_min exceeds p_max");
    if (g.q_min > g.q_max) throw CaseError(p + ".q_min", "q_min exceeds q_max");
    g.c2 = number(gens[i], "c2", p) / (scale * scale);
    g.c1 = number(gens[i], "c1", p) / scale;
    g.c0 = number(gens[i], "c0", p);
    c.generators.push_back(g);
  }
  if (c.generators.empty()) throw CaseError("$.generators", "at least one generator is required");

  const json& branches = array(doc, "branches", root);
  for (std::size_t i = 0; i < branches.size(); ++i) {
    const std::string p = at("$.branches", i);
    Branch br;
    const int f = integer(branches[i], "from", p);
    const int t = integer(branches[i], "to", p);
    br.from = c.bus_index(f);
    br.to = c.bus_index(t);
    if (br.from < 0) throw CaseError(p + ".from", "unknown bus " + std::to_string(f));
    if (br.to < 0) throw CaseError(p + ".to", "unknown bus " + std::to_string(t));
    if (br.from == br.to) throw CaseError(p, "self-loop at bus " + std::to_string(f));
    br.r = number(branches[i], "r", p);
    br.x = number(branches[i], "x", p);
    br.b_sh = branches[i].contains("b_sh") ? number(branches[i], "b_sh", p) : 0.0;
    if (br.r * br.r + br.x * br.x <= 0.0) throw CaseError(p, "zero series impedance");
    if (branches[i].contains("s_max") && !branches[i]["s_max"].is_null()) {
      const double s = number(branches[i], "s_max", p) * scale;
      if (s <= 0.0) throw CaseError(p + ".s_max", "must be positive");
      br.s_max = s;
    }
    c.branches.push_back(br);
  }

  const int ref = integer(doc, "ref_bus", root);
  c.ref_bus = c.bus_index(ref);
  if (c.ref_bus < 0) throw CaseError("$.ref_bus", "missing reference bus " + std::to_string(ref));
  if (!c.is_generator(c.ref_bus)) throw CaseError("$.ref_bus", "reference bus must host a generator");
  return c;
}

NetworkCase load_case_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CaseError("$", std::string("malformed document: ") + e.what());
  }
  return load_case(doc);
}

NetworkCase load_case_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CaseError(path.string(), "cannot open case file");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_case_text(ss.str());
}

AdmittanceMatrix build_admittance(const NetworkCase& c) {
  const int n = c.n_bus();
  AdmittanceMatrix y{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
  for (const auto& br : c.branches) {
    const double g = br.g(), b = br.b();
    const int l = br.from, m = br.to;
    y.g(l, m) -= g;
    y.g(m, l) -= g;
    y.b(l, m) -= b;
    y.b(m, l) -= b;
    y.g(l, l) += g;
    y.g(m, m) += g;
    y.b(l, l) += b + 0.5 * br.b_sh;
    y.b(m, m) += b + 0.5 * br.b_sh;
  }
  return y;
}

Injections eval_injections(const NetworkCase& c, const AdmittanceMatrix& y, const VoltagePoint& v) {
  const int n = c.n_bus();
  // I = Y V in rectangular form.
  const Eigen::VectorXd id = y.g * v.vd - y.b * v.vq;
  const Eigen::VectorXd iq = y.b * v.vd + y.g * v.vq;
  Injections out{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    out.p(i) = c.buses[i].p_load + v.vd(i) * id(i) + v.vq(i) * iq(i);
    out.q(i) = c.buses[i].q_load + v.vq(i) * id(i) - v.vd(i) * iq(i);
  }
  return out;
}

BranchFlow eval_line_flow(const Branch& br, const VoltagePoint& v) {
  const double g = br.g(), b = br.b(), bsh = br.b_sh;
  BranchFlow f;
  for (int dir = 0; dir < 2; ++dir) {
    const int l = dir == 0 ? br.from : br.to;
    const int m = dir == 0 ? br.to : br.from;
    const double vl2 = v.vd(l) * v.vd(l) + v.vq(l) * v.vq(l);
    const double re = v.vd(l) * v.vd(m) + v.vq(l) * v.vq(m);
    const double im = v.vd(l) * v.vq(m) - v.vq(l) * v.vd(m);
    f.p[dir] = g * vl2 - g * re + b * im;
    f.q[dir] = -(b + 0.5 * bsh) * vl2 + b * re + g * im;
    f.s_sq[dir] = f.p[dir] * f.p[dir] + f.q[dir] * f.q[dir];
  }
  return f;
}

std::vector<BranchFlow> eval_line_flows(const NetworkCase& c, const VoltagePoint& v) {
  std::vector<BranchFlow> out;
  out.reserve(c.branches.size());
  for (const auto& br : c.branches) out.push_back(eval_line_flow(br, v));
  return out;
}

double eval_current_sq(const NetworkCase& c, const VoltagePoint& v, int branch, Direction dir) {
  const Branch& br = c.branches.at(static_cast<std::size_t>(branch));
  const double g = br.g(), b = br.b(), bsh = br.b_sh;
  const int l = dir == Direction::kForward ? br.from : br.to;
  const int m = dir == Direction::kForward ? br.to : br.from;
  const double vl2 = v.vd(l) * v.vd(l) + v.vq(l) * v.vq(l);
  const double vm2 = v.vd(m) * v.vd(m) + v.vq(m) * v.vq(m);
  const double re = v.vd(l) * v.vd(m) + v.vq(l) * v.vq(m);
  const double im = v.vd(l) * v.vq(m) - v.vd(m) * v.vq(l);
  const double y2 = g * g + b * b;
  return y2 * vm2 - b * bsh * re + (y2 + b * bsh + 0.25 * bsh * bsh) * vl2 - 2.0 * y2 * re -
         bsh * g * im;
}

double eval_cost(const NetworkCase& c, const Eigen::VectorXd& p_inj) {
  double total = 0.0;
  for (const auto& g : c.generators) {
    const double p = p_inj(g.bus);
    total += g.c2 * p * p + g.c1 * p + g.c0;
  }
  return total;
}

EvaluatedState evaluate(const NetworkCase& c, const AdmittanceMatrix& y, const VoltagePoint& v) {
  EvaluatedState s;
  s.v_sq = v.vd.array().square() + v.vq.array().square();
  auto inj = eval_injections(c, y, v);
  s.p_inj = std::move(inj.p);
  s.q_inj = std::move(inj.q);
  s.flows = eval_line_flows(c, v);
  s.cost = eval_cost(c, s.p_inj);
  return s;
}

std::string Violation::describe(const NetworkCase& c) const {
  std::ostringstream os;
  const char* side_name = side == BoundSide::kLower ? "lower" : "upper";
  switch (kind) {
    case ConstraintKind::kActivePower:
      os << "bus " << c.buses[index].id << " active power " << side_name << " bound";
      break;
    case ConstraintKind::kReactivePower:
      os << "bus " << c.buses[index].id << " reactive power " << side_name << " bound";
      break;
    case ConstraintKind::kVoltage:
      os << "bus " << c.buses[index].id << " voltage magnitude " << side_name << " bound";
      break;
    case ConstraintKind::kFlow: {
      const auto& br = c.branches[index];
      const int a = direction == 0 ? br.from : br.to;
      const int b = direction == 0 ? br.to : br.from;
      os << "branch (" << c.buses[a].id << "," << c.buses[b].id << ") apparent power limit";
      break;
    }
    case ConstraintKind::kAngleReference:
      os << "bus " << c.buses[index].id << " angle reference";
      break;
  }
  os << " exceeded by " << magnitude;
  return os.str();
}

FeasibilityVerdict check_feasibility(const NetworkCase& c, const AdmittanceMatrix& y,
                                     const VoltagePoint& v, double tol) {
  FeasibilityVerdict verdict;
  auto flag = [&](ConstraintKind k, int idx, BoundSide side, double excess, int dir = 0) {
    if (excess > tol) verdict.violations.push_back({k, idx, side, dir, excess});
  };
  const auto inj = eval_injections(c, y, v);
  for (int i = 0; i < c.n_bus(); ++i) {
    flag(ConstraintKind::kActivePower, i, BoundSide::kLower, c.p_min(i) - inj.p(i));
    flag(ConstraintKind::kActivePower, i, BoundSide::kUpper, inj.p(i) - c.p_max(i));
    flag(ConstraintKind::kReactivePower, i, BoundSide::kLower, c.q_min(i) - inj.q(i));
    flag(ConstraintKind::kReactivePower, i, BoundSide::kUpper, inj.q(i) - c.q_max(i));
    const double v2 = v.vd(i) * v.vd(i) + v.vq(i) * v.vq(i);
    const auto& bus = c.buses[i];
    flag(ConstraintKind::kVoltage, i, BoundSide::kLower, bus.v_min * bus.v_min - v2);
    flag(ConstraintKind::kVoltage, i, BoundSide::kUpper, v2 - bus.v_max * bus.v_max);
  }
  for (std::size_t k = 0; k < c.branches.size(); ++k) {
    const auto& br = c.branches[k];
    if (!br.s_max) continue;
    const auto f = eval_line_flow(br, v);
    const double lim = *br.s_max * *br.s_max;
    for (int dir = 0; dir < 2; ++dir)
      flag(ConstraintKind::kFlow, static_cast<int>(k), BoundSide::kUpper, f.s_sq[dir] - lim, dir);
  }
  flag(ConstraintKind::kAngleReference, c.ref_bus, BoundSide::kUpper, std::abs(v.vq(c.ref_bus)));
  verdict.feasible = verdict.violations.empty();
  return verdict;
}

FeasibilityVerdict check_feasibility(const NetworkCase& c, const VoltagePoint& v, double tol) {
  return check_feasibility(c, build_admittance(c), v, tol);
}

VoltagePoint rotate_to_reference(const VoltagePoint& v, int ref_bus) {
  const double a = v.vd(ref_bus), b = v.vq(ref_bus);
  const double r = std::hypot(a, b);
  if (r == 0.0) return v;
  // Multiply every phasor by conj(V_ref)/|V_ref|.
  const double cr = a / r, ci = -b / r;
  VoltagePoint out{v.vd, v.vq};
  for (Eigen::Index i = 0; i < v.vd.size(); ++i) {
    out.vd(i) = v.vd(i) * cr - v.vq(i) * ci;
    out.vq(i) = v.vd(i) * ci + v.vq(i) * cr;
  }
  out.vq(ref_bus) = 0.0;
  return out;
}

}  // namespace opf
