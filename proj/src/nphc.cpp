#include "opf/nphc.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "opf/parallel.hpp"

namespace opf {

namespace {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

// Step acceptance tolerance for the corrector while tracking, relative to |X|.
constexpr double kTrackTol = 1e-8;
constexpr double kStopT = 1e-12;
constexpr double kMaxCond = 1e8;
constexpr int kMaxSteps = 200000;
constexpr int kPolishIters = 12;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(seq);
}

Complex unit_complex(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  return std::polar(1.0, angle(rng));
}

double max_norm(const VectorXcd& v) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) m = std::max(m, std::abs(v(i)));
  return m;
}

// H(X, t) with X = (x, x0) in projective coordinates plus the patch row c.X = 1.
class Homotopy {
 public:
  Homotopy(int m, VectorXcd patch) : m_(m), patch_(std::move(patch)) {}
  virtual ~Homotopy() = default;

  int m() const { return m_; }
  const VectorXcd& patch() const { return patch_; }

  void evaluate(const VectorXcd& X, double t, VectorXcd& h, MatrixXcd& hx, VectorXcd* ht) const {
    h.resize(m_ + 1);
    hx.resize(m_ + 1, m_ + 1);
    eval_core(X, t, h, hx, ht);
    h(m_) = patch_.dot(X) - 1.0;  // conjugates patch_; harmless, it is random
    hx.row(m_) = patch_.adjoint();
    if (ht) (*ht)(m_) = 0.0;
  }

  VectorXcd lift(const VectorXcd& x) const {
    VectorXcd X(m_ + 1);
    X.head(m_) = x;
    X(m_) = 1.0;
    return X / patch_.dot(X);
  }

 protected:
  // Fills rows 0..m-1 of h, hx and (if requested) ht.
  virtual void eval_core(const VectorXcd& X, double t, VectorXcd& h, MatrixXcd& hx,
                         VectorXcd* ht) const = 0;

  int m_;
  VectorXcd patch_;
};

class TotalDegreeHomotopy final : public Homotopy {
 public:
  TotalDegreeHomotopy(const PolynomialSystem& start, const PolynomialSystem& target, Complex kappa,
                      VectorXcd patch)
      : Homotopy(target.num_vars, std::move(patch)),
        kappa_(kappa),
        f_(homogenize(target.equations, target.num_vars, 2), target.num_vars + 1),
        g_(homogenize(start.equations, start.num_vars, 2), start.num_vars + 1) {}

 protected:
  void eval_core(const VectorXcd& X, double t, VectorXcd& h, MatrixXcd& hx, VectorXcd* ht) const override {
    VectorXcd fv(m_), gv(m_);
    MatrixXcd fj, gj;
    f_.evaluate(X.data(), fv.data(), fj);
    g_.evaluate(X.data(), gv.data(), gj);
    h.head(m_) = (1.0 - t) * fv + kappa_ * t * gv;
    hx.topRows(m_) = (1.0 - t) * fj + kappa_ * t * gj;
    if (ht) {
      ht->resize(m_ + 1);
      ht->head(m_) = kappa_ * gv - fv;
    }
  }

 private:
  Complex kappa_;
  CompiledPolynomials f_, g_;
};

// Parameters follow p(tau) = (1 - tau) target + tau generic with the complex
// reparameterization tau = kappa t / (1 - t + kappa t).
class ParameterHomotopy final : public Homotopy {
 public:
  ParameterHomotopy(const ParameterizedSystem& sys, VectorXcd generic, VectorXcd target, Complex kappa,
                    VectorXcd patch)
      : Homotopy(sys.num_unknowns, std::move(patch)),
        k_(sys.num_params),
        kappa_(kappa),
        generic_(std::move(generic)),
        target_(std::move(target)),
        f_(homogenize(sys.equations, sys.num_unknowns, 2), sys.num_vars() + 1) {}

 protected:
  void eval_core(const VectorXcd& X, double t, VectorXcd& h, MatrixXcd& hx, VectorXcd* ht) const override {
    const Complex den = 1.0 - t + kappa_ * t;
    const Complex tau = kappa_ * t / den;
    VectorXcd z(m_ + 1 + k_);
    z.head(m_ + 1) = X;
    z.tail(k_) = (1.0 - tau) * target_ + tau * generic_;
    VectorXcd fv(m_);
    MatrixXcd fj;
    f_.evaluate(z.data(), fv.data(), fj);
    h.head(m_) = fv;
    hx.topRows(m_) = fj.leftCols(m_ + 1);
    if (ht) {
      ht->resize(m_ + 1);
      const Complex dtau = kappa_ / (den * den);
      ht->head(m_) = fj.rightCols(k_) * ((generic_ - target_) * dtau);
    }
  }

 private:
  int k_;
  Complex kappa_;
  VectorXcd generic_, target_;
  CompiledPolynomials f_;
};

struct PolishResult {
  bool ok = false;
  VectorXcd x;
};

// Newton on the affine target from x; ok when the residual meets tol at a
// well-conditioned root.
PolishResult polish(const CompiledPolynomials& target, VectorXcd x, const HomotopyConfig& cfg) {
  const int m = target.rows();
  VectorXcd f(m);
  MatrixXcd j;
  for (int it = 0; it < kPolishIters; ++it) {
    target.evaluate(x.data(), f.data(), j);
    Eigen::PartialPivLU<MatrixXcd> lu(j);
    const VectorXcd dx = lu.solve(-f);
    if (!dx.allFinite()) return {false, x};
    x += dx;
    if (max_norm(dx) <= 1e-15 * (1.0 + max_norm(x))) break;
  }
  target.evaluate(x.data(), f.data(), j);
  PolishResult r{false, x};
  if (!x.allFinite() || f.norm() >= cfg.corrector_tol || max_norm(x) >= cfg.divergence_norm) return r;
  Eigen::JacobiSVD<MatrixXcd> svd(j);
  const auto& s = svd.singularValues();
  r.ok = s(s.size() - 1) > 0.0 && s(0) / s(s.size() - 1) < kMaxCond;
  return r;
}

struct Sample {
  double log_t;
  double log_r;
};

// Slope of log(|x0|/|X|) against log t over the last two decades of samples.
// A steady positive slope means the path heads to infinity.
bool trending_to_infinity(const std::vector<Sample>& samples) {
  if (samples.size() < 3) return false;
  const double last = samples.back().log_t;
  auto at = [&](double lt) {
    // Sample closest to lt from above (larger t).
    const Sample* best = &samples.front();
    for (const auto& s : samples)
      if (s.log_t >= lt - 1e-12) best = &s;
    return *best;
  };
  const double decade = std::log(10.0);
  const Sample a = at(last + 2 * decade), b = at(last + decade), c = samples.back();
  if (a.log_t - b.log_t < 0.5 * decade || b.log_t - c.log_t < 0.5 * decade) return false;
  const double s1 = (a.log_r - b.log_r) / (a.log_t - b.log_t);
  const double s2 = (b.log_r - c.log_r) / (b.log_t - c.log_t);
  return s2 > 0.05 && s1 > 0.05 && std::abs(s2 - s1) < 0.5 * s1;
}

PathResult track(const Homotopy& hom, const CompiledPolynomials& target, const VectorXcd& x_start,
                 const HomotopyConfig& cfg) {
  const int m = hom.m();
  PathResult res;
  VectorXcd X = hom.lift(x_start);
  double t = 1.0;
  double dt = cfg.initial_step;
  int successes = 0;
  std::vector<Sample> samples;
  VectorXcd h, ht, v;
  MatrixXcd hx;

  auto affine_norm = [&](const VectorXcd& Y) {
    const double x0 = std::abs(Y(m));
    return x0 == 0.0 ? INFINITY : max_norm(Y.head(m)) / x0;
  };

  bool stalled = false;
  while (t > kStopT) {
    if (res.steps_taken >= kMaxSteps) {
      stalled = true;
      break;
    }
    const bool endgame = t <= cfg.endgame_t;
    double step = std::min(dt, t);
    if (endgame) step = std::min(step, 0.9 * t);

    hom.evaluate(X, t, h, hx, &ht);
    Eigen::PartialPivLU<MatrixXcd> lu(hx);
    v = lu.solve(-ht);  // dX/dt
    const double t1 = t - step;
    VectorXcd Y = X - step * v;

    bool ok = v.allFinite();
    double prev = INFINITY;
    for (int it = 0; ok && it < cfg.max_corrector_iters; ++it) {
      hom.evaluate(Y, t1, h, hx, nullptr);
      const VectorXcd dy = Eigen::PartialPivLU<MatrixXcd>(hx).solve(-h);
      const double nd = max_norm(dy);
      if (!std::isfinite(nd) || nd > 0.5 * prev) {
        ok = false;
        break;
      }
      Y += dy;
      prev = nd;
      if (nd <= kTrackTol * (1.0 + max_norm(Y))) break;
    }
    ok = ok && prev <= kTrackTol * (1.0 + max_norm(Y));

    if (!ok) {
      dt = 0.5 * step;
      successes = 0;
      const double floor = endgame ? cfg.min_step * t : cfg.min_step;
      if (dt < floor) {
        stalled = true;
        break;
      }
      continue;
    }

    X = Y;
    t = t1;
    ++res.steps_taken;
    if (++successes >= 3) {
      dt = std::min(2.0 * step, cfg.max_step);
      successes = 0;
    } else {
      dt = std::max(step, dt);
    }

    if (affine_norm(X) > cfg.divergence_norm) {
      res.status = PathStatus::kDiverged;
      return res;
    }
    if (t <= cfg.endgame_t) {
      const double r = std::abs(X(m)) / max_norm(X);
      samples.push_back({std::log(t), std::log(std::max(r, 1e-300))});
      // Early finish: a nearby well-conditioned root consistent with the tangent.
      if (t <= 1e-3 && r > 1e-8) {
        PolishResult p = polish(target, X.head(m) / X(m), cfg);
        if (p.ok) {
          const VectorXcd Xp = hom.lift(p.x);
          if (max_norm(Xp - X) <= 10.0 * t * (max_norm(v) + 1.0)) {
            res.status = PathStatus::kConverged;
            res.endpoint = std::move(p.x);
            return res;
          }
        }
      }
    }
  }

  const double r = std::abs(X(m)) / max_norm(X);
  if (r > 1e-10) {
    PolishResult p = polish(target, X.head(m) / X(m), cfg);
    if (p.ok && !stalled) {
      res.status = PathStatus::kConverged;
      res.endpoint = std::move(p.x);
      return res;
    }
  }
  if (r <= 1e-10 || affine_norm(X) > cfg.divergence_norm || trending_to_infinity(samples)) {
    res.status = PathStatus::kDiverged;
    return res;
  }
  res.status = PathStatus::kTrackingFailure;
  return res;
}

VectorXcd random_patch(int m, std::uint64_t seed) {
  auto rng = stream(seed, 3);
  VectorXcd c(m + 1);
  for (int i = 0; i <= m; ++i) c(i) = unit_complex(rng);
  return c / std::sqrt(static_cast<double>(m + 1));
}

SolutionSet collect(const std::vector<PathResult>& results, double dedup_tol) {
  SolutionSet s;
  std::vector<VectorXcd> endpoints;
  for (const auto& r : results) {
    s.path_stats.add(r.status);
    if (r.status == PathStatus::kConverged) endpoints.push_back(r.endpoint);
  }
  s.solutions = deduplicate(endpoints, dedup_tol);
  return s;
}

}  // namespace

void HomotopyConfig::validate() const {
  if (!(min_step > 0.0 && min_step <= initial_step && initial_step <= max_step && max_step < 1.0))
    throw std::invalid_argument("homotopy steps must satisfy 0 < min <= initial <= max < 1");
  if (!(corrector_tol > 0.0 && divergence_norm > 0.0 && endgame_t > 0.0 && real_imag_tol > 0.0 &&
        dedup_tol > 0.0))
    throw std::invalid_argument("homotopy tolerances must be positive");
  if (max_corrector_iters < 1) throw std::invalid_argument("max_corrector_iters must be >= 1");
}

const char* to_string(PathStatus s) {
  switch (s) {
    case PathStatus::kConverged:
      return "converged";
    case PathStatus::kDiverged:
      return "diverged";
    case PathStatus::kTrackingFailure:
      return "tracking-failure";
  }
  return "?";
}

void PathStats::add(PathStatus s) {
  switch (s) {
    case PathStatus::kConverged:
      ++converged;
      break;
    case PathStatus::kDiverged:
      ++diverged;
      break;
    case PathStatus::kTrackingFailure:
      ++failed;
      break;
  }
}

StartSystem total_degree_start(int m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("start system needs at least one unknown");
  if (m > 30) throw std::invalid_argument("too many unknowns for a total-degree start");
  auto rng = stream(seed, 1);
  StartSystem s;
  s.system.num_vars = m;
  std::vector<Complex> root(m);
  for (int i = 0; i < m; ++i) {
    s.a.push_back(unit_complex(rng));
    s.b.push_back(unit_complex(rng));
    ComplexPolynomial p(m);
    p.add_term(Monomial::unit(m, i, 2), s.a[i]);
    p.add_term(Monomial(m), -s.b[i]);
    s.system.equations.push_back(std::move(p));
    root[i] = std::sqrt(s.b[i] / s.a[i]);
  }
  const std::size_t count = std::size_t{1} << m;
  s.roots.reserve(count);
  for (std::size_t mask = 0; mask < count; ++mask) {
    VectorXcd x(m);
    for (int i = 0; i < m; ++i) x(i) = (mask >> i) & 1 ? -root[i] : root[i];
    s.roots.push_back(std::move(x));
  }
  return s;
}

Complex gamma_constant(std::uint64_t seed) {
  auto rng = stream(seed, 2);
  return unit_complex(rng);
}

PathResult track_path(const PolynomialSystem& start, const PolynomialSystem& target, const VectorXcd& x0,
                      Complex kappa, const HomotopyConfig& config) {
  config.validate();
  if (start.num_vars != target.num_vars || target.size() != target.num_vars || start.size() != start.num_vars ||
      x0.size() != target.num_vars)
    throw std::invalid_argument("start, target and start point must be square and agree in size");
  TotalDegreeHomotopy hom(start, target, kappa, random_patch(target.num_vars, config.seed));
  CompiledPolynomials aff(target.equations, target.num_vars);
  return track(hom, aff, x0, config);
}

SolutionSet solve_bezout(const PolynomialSystem& target, const HomotopyConfig& config) {
  config.validate();
  const int m = target.num_vars;
  if (target.size() != m) throw std::invalid_argument("target system is not square");
  for (const auto& eq : target.equations)
    if (eq.degree() > 2) throw std::invalid_argument("target system is not quadratic");
  const StartSystem start = total_degree_start(m, config.seed);
  TotalDegreeHomotopy hom(start.system, target, gamma_constant(config.seed), random_patch(m, config.seed));
  CompiledPolynomials aff(target.equations, m);
  std::vector<PathResult> results(start.roots.size());
  parallel_for(results.size(), config.workers,
               [&](std::size_t i) { results[i] = track(hom, aff, start.roots[i], config); });
  return collect(results, config.dedup_tol);
}

Eigen::VectorXcd generic_parameters(int num_params, std::uint64_t seed) {
  auto rng = stream(seed, 4);
  std::normal_distribution<double> n(0.0, 1.0);
  VectorXcd p(num_params);
  for (int i = 0; i < num_params; ++i) p(i) = Complex(n(rng), n(rng));
  return p;
}

SolutionSet solve_parameterized(const ParameterizedSystem& sys, const SolutionSet& generic_solutions,
                                const VectorXcd& generic_params, const VectorXcd& target_params,
                                const HomotopyConfig& config) {
  config.validate();
  if (generic_params.size() != sys.num_params || target_params.size() != sys.num_params)
    throw std::invalid_argument("parameter vectors do not match the system");
  ParameterHomotopy hom(sys, generic_params, target_params, gamma_constant(config.seed),
                        random_patch(sys.num_unknowns, config.seed));
  const PolynomialSystem target = substitute_parameters(sys, target_params);
  CompiledPolynomials aff(target.equations, target.num_vars);
  std::vector<PathResult> results(generic_solutions.solutions.size());
  parallel_for(results.size(), config.workers, [&](std::size_t i) {
    results[i] = track(hom, aff, generic_solutions.solutions[i], config);
  });
  return collect(results, config.dedup_tol);
}

std::vector<VectorXcd> deduplicate(const std::vector<VectorXcd>& points, double tol) {
  std::vector<VectorXcd> kept;
  for (const auto& p : points) {
    bool dup = false;
    for (const auto& k : kept)
      if (max_norm(p - k) <= tol) {
        dup = true;
        break;
      }
    if (!dup) kept.push_back(p);
  }
  return kept;
}

std::vector<Eigen::VectorXd> real_solutions(const SolutionSet& s, double real_imag_tol) {
  if (!(real_imag_tol > 0.0)) throw std::invalid_argument("real_imag_tol must be positive");
  std::vector<Eigen::VectorXd> out;
  for (const auto& x : s.solutions)
    if ((x.imag().array().abs() < real_imag_tol).all()) out.push_back(x.real());
  return out;
}

std::vector<VoltagePoint> extract_real_solutions(const SolutionSet& s, const ParameterizedSystem& sys,
                                                 double slack_v, double real_imag_tol) {
  std::vector<VoltagePoint> out;
  for (const auto& x : real_solutions(s, real_imag_tol)) out.push_back(sys.voltage_point(x, slack_v));
  return out;
}

}  // namespace opf
