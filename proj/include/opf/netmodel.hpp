#pragma once

// OPF instance data and every scalar function of the rectangular bus voltages
// (injections, branch flows, branch current, cost, constraint satisfaction).
// All quantities are per unit after load_case().

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace opf {

/// Raised by load_case(); what() carries the offending field path.
class CaseError : public std::runtime_error {
 public:
  CaseError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct Bus {
  int id = 0;  // label from the case document
  double p_load = 0.0;
  double q_load = 0.0;
  double v_min = 0.0;
  double v_max = 0.0;
};

struct Generator {
  int bus = 0;  // internal bus index
  double p_min = 0.0, p_max = 0.0;
  double q_min = 0.0, q_max = 0.0;
  double c2 = 0.0, c1 = 0.0, c0 = 0.0;
};

struct Branch {
  int from = 0;  // internal bus index (l)
  int to = 0;    // internal bus index (m)
  double r = 0.0;
  double x = 0.0;
  double b_sh = 0.0;             // total line-charging susceptance
  std::optional<double> s_max;   // absent: unconstrained flow

  double g() const { return r / (r * r + x * x); }
  double b() const { return -x / (r * r + x * x); }
};

enum class Direction { kForward, kReverse };  // (l,m) and (m,l)

struct NetworkCase {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Generator> generators;  // at most one per bus
  std::vector<Branch> branches;
  int ref_bus = 0;  // internal bus index

  int n_bus() const { return static_cast<int>(buses.size()); }

  /// Generator located at bus `i`, or nullptr for load buses.
  const Generator* generator_at(int i) const;
  bool is_generator(int i) const { return generator_at(i) != nullptr; }

  /// Generation limits at a bus; load buses report zero.
  double p_min(int i) const;
  double p_max(int i) const;
  double q_min(int i) const;
  double q_max(int i) const;

  /// Generator bus indices in ascending order.
  std::vector<int> generator_buses() const;
  int bus_index(int id) const;  // -1 when unknown
};

struct AdmittanceMatrix {
  Eigen::MatrixXd g;
  Eigen::MatrixXd b;
};

struct VoltagePoint {
  Eigen::VectorXd vd;
  Eigen::VectorXd vq;

  static VoltagePoint flat(int n) {
    return {Eigen::VectorXd::Ones(n), Eigen::VectorXd::Zero(n)};
  }
};

struct Injections {
  Eigen::VectorXd p;  // f_Pi, generation at bus i (load included)
  Eigen::VectorXd q;  // f_Qi
};

/// Both orientations of every branch; index 0 is (l,m), 1 is (m,l).
struct BranchFlow {
  double p[2] = {0.0, 0.0};
  double q[2] = {0.0, 0.0};
  double s_sq[2] = {0.0, 0.0};
};

struct EvaluatedState {
  Eigen::VectorXd v_sq;
  Eigen::VectorXd p_inj;
  Eigen::VectorXd q_inj;
  std::vector<BranchFlow> flows;
  double cost = 0.0;
};

NetworkCase load_case(const nlohmann::json& document);
NetworkCase load_case_text(const std::string& text);
NetworkCase load_case_file(const std::filesystem::path& path);

AdmittanceMatrix build_admittance(const NetworkCase& c);

Injections eval_injections(const NetworkCase& c, const AdmittanceMatrix& y, const VoltagePoint& v);
std::vector<BranchFlow> eval_line_flows(const NetworkCase& c, const VoltagePoint& v);
BranchFlow eval_line_flow(const Branch& br, const VoltagePoint& v);

/// Squared branch current magnitude |y(V_l - V_m) + j(b_sh/2) V_l|^2 for the
/// chosen orientation, evaluated through its expanded quadratic form.
double eval_current_sq(const NetworkCase& c, const VoltagePoint& v, int branch, Direction dir);

double eval_cost(const NetworkCase& c, const Eigen::VectorXd& p_inj);

EvaluatedState evaluate(const NetworkCase& c, const AdmittanceMatrix& y, const VoltagePoint& v);

enum class ConstraintKind {
  kActivePower,    // P_min <= f_P <= P_max
  kReactivePower,  // Q_min <= f_Q <= Q_max
  kVoltage,        // V_min^2 <= f_V <= V_max^2
  kFlow,           // f_S <= S_max^2, per orientation
  kAngleReference  // V_q = 0 at the reference bus
};

enum class BoundSide { kLower, kUpper };

struct Violation {
  ConstraintKind kind;
  int index;  // bus or branch index
  BoundSide side;
  int direction = 0;  // flows only
  double magnitude;   // amount by which the bound is exceeded

  std::string describe(const NetworkCase& c) const;
};

struct FeasibilityVerdict {
  bool feasible = true;
  std::vector<Violation> violations;
};

inline constexpr double kDefaultFeasibilityTol = 1e-6;

FeasibilityVerdict check_feasibility(const NetworkCase& c, const AdmittanceMatrix& y,
                                     const VoltagePoint& v, double tol = kDefaultFeasibilityTol);
FeasibilityVerdict check_feasibility(const NetworkCase& c, const VoltagePoint& v,
                                     double tol = kDefaultFeasibilityTol);

/// Rotates all phasors so the reference bus has V_q = 0 and V_d >= 0.
VoltagePoint rotate_to_reference(const VoltagePoint& v, int ref_bus);

}  // namespace opf
