#pragma once

// Independent reference computations and instance generators used by tests.
// Nothing here calls into the library code under test except the data types.

#include <Eigen/Dense>
#include <complex>
#include <random>
#include <vector>

#include "json.hpp"
#include "opf/netmodel.hpp"
#include "opf/polysys.hpp"

namespace oracle {

using cplx = std::complex<double>;

struct Line {
  int from, to;
  double r, x, b_sh;
};

/// Complex Y-bus built directly from pi-model line data.
inline Eigen::MatrixXcd ybus(int n, const std::vector<Line>& lines) {
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& l : lines) {
    const cplx ys = 1.0 / cplx(l.r, l.x);
    const cplx sh(0.0, 0.5 * l.b_sh);
    y(l.from, l.from) += ys + sh;
    y(l.to, l.to) += ys + sh;
    y(l.from, l.to) -= ys;
    y(l.to, l.from) -= ys;
  }
  return y;
}

inline std::vector<Line> lines_of(const opf::NetworkCase& c) {
  std::vector<Line> out;
  for (const auto& b : c.branches) out.push_back({b.from, b.to, b.r, b.x, b.b_sh});
  return out;
}

inline Eigen::VectorXcd phasors(const opf::VoltagePoint& v) {
  Eigen::VectorXcd out(v.vd.size());
  for (Eigen::Index i = 0; i < v.vd.size(); ++i) out(i) = cplx(v.vd(i), v.vq(i));
  return out;
}

/// Complex power entering each bus from the network, S = V conj(Y V).
inline Eigen::VectorXcd bus_power(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v) {
  const Eigen::VectorXcd i = y * v;
  return v.cwiseProduct(i.conjugate());
}

/// Sending-end current of a line seen from `l`.
inline cplx line_current(const Line& ln, const Eigen::VectorXcd& v, bool forward) {
  const int l = forward ? ln.from : ln.to, m = forward ? ln.to : ln.from;
  return (1.0 / cplx(ln.r, ln.x)) * (v(l) - v(m)) + cplx(0.0, 0.5 * ln.b_sh) * v(l);
}

inline cplx line_power(const Line& ln, const Eigen::VectorXcd& v, bool forward) {
  const int l = forward ? ln.from : ln.to;
  return v(l) * std::conj(line_current(ln, v, forward));
}

struct TwoBus {
  double e;        // slack voltage magnitude, angle 0
  double p, q;     // load at bus 2
  double r, x, b_sh;
};

inline nlohmann::json two_bus_document(const TwoBus& t) {
  return {{"name", "two-bus"},
          {"base_mva", 100},
          {"buses",
           {{{"id", 1}, {"p_load", 0.0}, {"q_load", 0.0}, {"v_min", 0.5}, {"v_max", 1.5}},
            {{"id", 2}, {"p_load", t.p}, {"q_load", t.q}, {"v_min", 0.5}, {"v_max", 1.5}}}},
          {"generators",
           {{{"bus", 1}, {"p_min", -10}, {"p_max", 10}, {"q_min", -10}, {"q_max", 10}, {"c2", 0}, {"c1", 1}, {"c0", 0}}}},
          {"branches", {{{"from", 1}, {"to", 2}, {"r", t.r}, {"x", t.x}, {"b_sh", t.b_sh}}}},
          {"ref_bus", 1}};
}

/// All real load-bus voltages of the two-bus system. With u = |V2|^2 the
/// balance V2 conj(Y21 E + Y22 V2) = -S reduces to
///   |Y22|^2 u^2 + (2 Re(conj(Y22) conj(S)) - |Y21|^2 E^2) u + |S|^2 = 0,
/// and V2 = -(conj(Y22) u + S) / (conj(Y21) E).
inline std::vector<cplx> two_bus_solutions(const TwoBus& t) {
  const Eigen::MatrixXcd y = ybus(2, {{0, 1, t.r, t.x, t.b_sh}});
  const cplx s(t.p, t.q);
  const cplx a = std::conj(y(1, 1));
  const double qa = std::norm(a);
  const double qb = 2.0 * (a * std::conj(s)).real() - std::norm(y(1, 0)) * t.e * t.e;
  const double qc = std::norm(s);
  const double disc = qb * qb - 4.0 * qa * qc;
  std::vector<cplx> out;
  if (disc < 0.0) return out;
  const double sq = std::sqrt(disc);
  // Numerically stable pair of roots.
  const double k = -0.5 * (qb + (qb >= 0 ? sq : -sq));
  for (double u : {k / qa, qc / k}) {
    if (!(u > 0.0)) continue;
    out.push_back(-(a * u + s) / (std::conj(y(1, 0)) * t.e));
  }
  if (out.size() == 2 && std::abs(out[0] - out[1]) < 1e-12) out.pop_back();
  return out;
}

/// Real Newton from many random starts on a real-coefficient system; returns
/// the distinct converged roots.
inline std::vector<Eigen::VectorXd> multistart_newton(const opf::PolynomialSystem& sys, int starts,
                                                      double box, std::uint64_t seed) {
  const int m = sys.num_vars;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-box, box);
  // Real copies of the polynomials, evaluated term by term.
  struct Term {
    int row;
    double c;
    std::vector<int> e;
  };
  std::vector<Term> terms;
  for (int r = 0; r < sys.size(); ++r)
    for (const auto& [mono, coef] : sys.equations[r].terms())
      terms.push_back({r, coef.real(), std::vector<int>(mono.exponents.begin(), mono.exponents.end())});
  auto eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& f, Eigen::MatrixXd& j) {
    f.setZero(m);
    j.setZero(m, m);
    for (const auto& t : terms) {
      double v = t.c;
      for (int i = 0; i < m; ++i) v *= std::pow(x(i), t.e[i]);
      f(t.row) += v;
      for (int k = 0; k < m; ++k) {
        if (!t.e[k]) continue;
        double d = t.c * t.e[k] * std::pow(x(k), t.e[k] - 1);
        for (int i = 0; i < m; ++i)
          if (i != k) d *= std::pow(x(i), t.e[i]);
        j(t.row, k) += d;
      }
    }
  };
  std::vector<Eigen::VectorXd> roots;
  Eigen::VectorXd f, x;
  Eigen::MatrixXd j;
  for (int s = 0; s < starts; ++s) {
    x.resize(m);
    for (int i = 0; i < m; ++i) x(i) = u(rng);
    bool ok = false;
    for (int it = 0; it < 60; ++it) {
      eval(x, f, j);
      if (f.norm() < 1e-12) {
        ok = true;
        break;
      }
      Eigen::VectorXd dx = j.fullPivLu().solve(-f);
      if (!dx.allFinite() || dx.norm() > 1e6) break;
      x += dx;
    }
    if (!ok) continue;
    eval(x, f, j);
    if (std::abs(j.determinant()) < 1e-10) continue;
    bool dup = false;
    for (const auto& r : roots)
      if ((r - x).cwiseAbs().maxCoeff() < 1e-6) dup = true;
    if (!dup) roots.push_back(x);
  }
  return roots;
}

/// True when both lists hold the same points within tol (max norm).
inline bool same_point_sets(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b,
                            double tol) {
  if (a.size() != b.size()) return false;
  for (const auto& p : a) {
    bool found = false;
    for (const auto& q : b)
      if ((p - q).cwiseAbs().maxCoeff() <= tol) found = true;
    if (!found) return false;
  }
  return true;
}

/// Random connected network: a spanning chain plus extra lines, generator at
/// bus 0 (reference) and optionally at others.
inline nlohmann::json random_network(int n, std::mt19937_64& rng, int extra_gens = 0, bool limits = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  nlohmann::json buses = nlohmann::json::array(), gens = nlohmann::json::array(),
                 branches = nlohmann::json::array();
  for (int i = 0; i < n; ++i) {
    const bool load = i > extra_gens;
    buses.push_back({{"id", i + 1},
                     {"p_load", load ? 0.2 + 0.6 * u(rng) : 0.0},
                     {"q_load", load ? 0.05 + 0.2 * u(rng) : 0.0},
                     {"v_min", 0.9},
                     {"v_max", 1.1}});
    if (!load)
      gens.push_back({{"bus", i + 1},
                      {"p_min", 0.0},
                      {"p_max", 3.0},
                      {"q_min", -1.0},
                      {"q_max", 2.0},
                      {"c2", u(rng)},
                      {"c1", 1.0 + 10.0 * u(rng)},
                      {"c0", 0.0}});
  }
  auto line = [&](int a, int b) {
    nlohmann::json l = {{"from", a + 1}, {"to", b + 1}, {"r", 0.01 + 0.05 * u(rng)},
                        {"x", 0.05 + 0.2 * u(rng)}, {"b_sh", 0.1 * u(rng)}};
    if (limits) l["s_max"] = 1.0 + 2.0 * u(rng);
    branches.push_back(l);
  };
  for (int i = 1; i < n; ++i) line(static_cast<int>(u(rng) * i), i);
  if (n >= 3 && u(rng) < 0.5) line(0, n - 1);
  return {{"name", "random"}, {"base_mva", 100}, {"buses", buses},
          {"generators", gens}, {"branches", branches}, {"ref_bus", 1}};
}

inline opf::VoltagePoint random_voltages(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.9, 1.1), ang(-0.5, 0.5);
  opf::VoltagePoint v{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    const double a = ang(rng), r = mag(rng);
    v.vd(i) = r * std::cos(a);
    v.vq(i) = r * std::sin(a);
  }
  return v;
}

/// Random network whose limits are set around a random voltage point, so the
/// point is feasible by construction. Load buses get the loads that make their
/// net generation zero at the point.
struct PlantedCase {
  nlohmann::json doc;
  opf::VoltagePoint v;
};

inline PlantedCase planted_feasible_case(int n, std::mt19937_64& rng, int extra_gens, bool limits) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PlantedCase out{random_network(n, rng, extra_gens, false), random_voltages(n, rng)};
  // Reference bus 1 at angle zero.
  out.v.vd(0) = std::hypot(out.v.vd(0), out.v.vq(0));
  out.v.vq(0) = 0.0;
  std::vector<Line> lines;
  for (const auto& b : out.doc["branches"])
    lines.push_back({b["from"].get<int>() - 1, b["to"].get<int>() - 1, b["r"].get<double>(), b["x"].get<double>(),
                     b["b_sh"].get<double>()});
  const Eigen::VectorXcd vv = phasors(out.v);
  const Eigen::VectorXcd s = bus_power(ybus(n, lines), vv);
  std::vector<bool> gen(n, false);
  for (auto& g : out.doc["generators"]) {
    const int i = g["bus"].get<int>() - 1;
    gen[i] = true;
    g["p_min"] = s(i).real() - 0.05 - 0.5 * u(rng);
    g["p_max"] = s(i).real() + 0.05 + 0.5 * u(rng);
    g["q_min"] = s(i).imag() - 0.05 - 0.5 * u(rng);
    g["q_max"] = s(i).imag() + 0.05 + 0.5 * u(rng);
    g["c2"] = u(rng) < 0.5 ? 0.0 : 10.0 * u(rng);
  }
  for (int i = 0; i < n; ++i) {
    auto& b = out.doc["buses"][i];
    b["p_load"] = gen[i] ? 0.0 : -s(i).real();
    b["q_load"] = gen[i] ? 0.0 : -s(i).imag();
    const double m = std::abs(vv(i));
    b["v_min"] = m - 0.01 - 0.1 * u(rng);
    b["v_max"] = m + 0.01 + 0.1 * u(rng);
  }
  if (limits)
    for (std::size_t k = 0; k < lines.size(); ++k) {
      const double f = std::max(std::abs(line_power(lines[k], vv, true)), std::abs(line_power(lines[k], vv, false)));
      out.doc["branches"][k]["s_max"] = f * (1.05 + 0.5 * u(rng));
    }
  return out;
}

/// Two buses, a generator at each. Bus 1 is the reference and has the wider P
/// range, so it is the slack; bus 2 carries a load as well.
struct TwoGen {
  double r, x, b_sh;
  double p_load, q_load;  // at bus 2
  double p2_max;
  double q2_min, q2_max;
  double s_max;
  double v_min, v_max;  // both buses
};

inline TwoGen random_two_gen(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {0.01 + 0.04 * u(rng), 0.05 + 0.25 * u(rng), 0.1 * u(rng), 0.3 + 0.7 * u(rng), 0.3 * u(rng),
          1.0 + u(rng),        -0.1 - 0.3 * u(rng),   0.1 + 0.3 * u(rng), 0.5 + u(rng), 0.95, 1.05};
}

inline nlohmann::json two_gen_document(const TwoGen& t) {
  return {{"name", "two-gen"},
          {"base_mva", 100},
          {"buses",
           {{{"id", 1}, {"p_load", 0.0}, {"q_load", 0.0}, {"v_min", t.v_min}, {"v_max", t.v_max}},
            {{"id", 2}, {"p_load", t.p_load}, {"q_load", t.q_load}, {"v_min", t.v_min}, {"v_max", t.v_max}}}},
          {"generators",
           {{{"bus", 1}, {"p_min", -3}, {"p_max", 3}, {"q_min", -1}, {"q_max", 1}, {"c2", 0}, {"c1", 10}, {"c0", 0}},
            {{"bus", 2}, {"p_min", 0}, {"p_max", t.p2_max}, {"q_min", t.q2_min}, {"q_max", t.q2_max},
             {"c2", 0}, {"c1", 1}, {"c0", 0}}}},
          {"branches", {{{"from", 1}, {"to", 2}, {"r", t.r}, {"x", t.x}, {"b_sh", t.b_sh}, {"s_max", t.s_max}}}},
          {"ref_bus", 1}};
}

/// Every real solution for generation p2 at bus 2 and magnitudes v1, v2, with
/// bus 1 at angle zero. With V2 = v2 e^{j theta} the bus 2 balance is
///   p2 - p_load = G22 v2^2 + v1 v2 (G21 cos theta + B21 sin theta).
inline std::vector<opf::VoltagePoint> two_gen_solutions(const TwoGen& t, double p2, double v1, double v2) {
  const Eigen::MatrixXcd y = ybus(2, {{0, 1, t.r, t.x, t.b_sh}});
  const double a = v1 * v2 * y(1, 0).real(), b = v1 * v2 * y(1, 0).imag();
  const double c = p2 - t.p_load - y(1, 1).real() * v2 * v2;
  const double rad = std::hypot(a, b);
  std::vector<opf::VoltagePoint> out;
  if (std::abs(c) > rad) return out;
  const double phi = std::atan2(b, a), w = std::acos(c / rad);
  for (double th : {phi + w, phi - w}) {
    opf::VoltagePoint v{Eigen::Vector2d(v1, v2 * std::cos(th)), Eigen::Vector2d(0.0, v2 * std::sin(th))};
    out.push_back(v);
    if (w == 0.0) break;
  }
  return out;
}

/// Moments y_alpha = x^alpha of a point, in the order of a monomial list.
inline Eigen::VectorXd point_moments(const std::vector<opf::Monomial>& monomials, const Eigen::VectorXd& x) {
  Eigen::VectorXd y(monomials.size());
  for (std::size_t k = 0; k < monomials.size(); ++k) {
    double v = 1.0;
    for (int i = 0; i < x.size(); ++i) v *= std::pow(x(i), monomials[k].exponents[i]);
    y(k) = v;
  }
  return y;
}

}  // namespace oracle
