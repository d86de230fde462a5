#pragma once

// Power-flow equations as polynomials in the rectangular voltage components,
// with setpoints exposed as parameters for parameter homotopies.

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "opf/netmodel.hpp"
#include "opf/polynomial.hpp"

namespace opf {

/// Where each bus voltage component lives in a polynomial's variable vector.
/// Index -1 means the component is identically zero.
struct VoltageVariables {
  int num_vars = 0;
  std::vector<int> vd;
  std::vector<int> vq;
};

/// f_P, f_Q, f_V per bus and the per-orientation flow polynomials per branch.
/// Injections include the bus load, i.e. they equal generation.
struct VoltagePolynomials {
  std::vector<RealPolynomial> p, q, v;
  std::vector<std::array<RealPolynomial, 2>> flow_p, flow_q, flow_s, current;
};

VoltagePolynomials voltage_polynomials(const NetworkCase& c, const AdmittanceMatrix& y,
                                       const VoltageVariables& vars);

/// Numeric square system; every polynomial is over `num_vars` unknowns.
struct PolynomialSystem {
  int num_vars = 0;
  std::vector<ComplexPolynomial> equations;

  int size() const { return static_cast<int>(equations.size()); }
};

enum class VoltagePart { kReal, kImag };

struct UnknownSlot {
  int bus;
  VoltagePart part;
};

enum class ParamRole { kActivePower, kVoltageSquared, kSlackVoltage };

struct ParamSlot {
  int equation;  // -1 for the slack voltage, which enters many equations
  ParamRole role;
  int bus;
};

/// Polynomials over (unknowns ++ params). Unknowns are V_d then V_q of the
/// non-slack buses; params are P setpoints and V^2 setpoints of the non-slack
/// generators, then the slack voltage magnitude.
struct ParameterizedSystem {
  int slack = 0;
  int num_unknowns = 0;
  int num_params = 0;
  std::vector<ComplexPolynomial> equations;
  std::vector<UnknownSlot> unknown_map;
  std::vector<ParamSlot> param_map;

  int num_vars() const { return num_unknowns + num_params; }

  /// Parameter vector for real setpoints. p_set and v_set are indexed by bus.
  Eigen::VectorXcd params_for(const Eigen::VectorXd& p_set, const Eigen::VectorXd& v_set) const;

  /// Unknown vector for a voltage point already rotated to slack angle zero.
  Eigen::VectorXcd unknowns_for(const VoltagePoint& v) const;

  /// Voltage point from a real unknown vector and the slack voltage magnitude.
  VoltagePoint voltage_point(const Eigen::VectorXd& x, double slack_v) const;
};

/// Throws std::invalid_argument when `slack` is not a generator bus.
ParameterizedSystem build_pf_system(const NetworkCase& c, const AdmittanceMatrix& y, int slack);

/// Throws std::invalid_argument on a length mismatch.
PolynomialSystem substitute_parameters(const ParameterizedSystem& sys, const Eigen::VectorXcd& params);

struct SystemEvaluation {
  Eigen::VectorXcd residual;
  Eigen::MatrixXcd jacobian;
};

SystemEvaluation eval_and_jacobian(const PolynomialSystem& sys, const Eigen::VectorXcd& x);

/// Flat term table for repeated evaluation of a fixed polynomial list.
class CompiledPolynomials {
 public:
  CompiledPolynomials() = default;
  CompiledPolynomials(const std::vector<ComplexPolynomial>& polys, int num_vars);

  int rows() const { return rows_; }
  int num_vars() const { return num_vars_; }

  void evaluate(const Complex* x, Complex* f) const;
  /// jac is rows() x num_vars(), column major, fully overwritten.
  void evaluate(const Complex* x, Complex* f, Eigen::MatrixXcd& jac) const;

 private:
  struct Factor {
    int var;
    int power;
  };
  struct Term {
    int row;
    Complex coef;
    int first_factor;
    int num_factors;
  };

  int rows_ = 0;
  int num_vars_ = 0;
  std::vector<Term> terms_;
  std::vector<Factor> factors_;
};

/// Homogenizes each polynomial to total degree `degree` in the first
/// `num_homog` variables using a new variable inserted at index num_homog.
std::vector<ComplexPolynomial> homogenize(const std::vector<ComplexPolynomial>& polys, int num_homog,
                                          int degree);

}  // namespace opf
