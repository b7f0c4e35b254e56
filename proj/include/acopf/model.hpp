#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "acopf/case_io.hpp"

namespace acopf {

// Full primal point of the rectangular ACOPF plus the per-line multipliers
// (pi_11, pi_12, pi_13, pi_14) of the nonlinear line constraints.
struct Iterate {
  std::vector<double> p_g, q_g;
  std::vector<double> w, theta;
  std::vector<double> w_r, w_i;
  std::vector<std::array<double, 4>> pi;

  static Iterate zeros(const Network& net);
  bool shaped_for(const Network& net) const;
  bool finite() const;
};

// Angle bounds; the reference bus angle is pinned at zero.
inline constexpr double kTwoPi = 6.283185307179586;
inline double theta_min(const Network& net, std::size_t bus) { return bus == net.ref_bus ? 0.0 : -kTwoPi; }
inline double theta_max(const Network& net, std::size_t bus) { return bus == net.ref_bus ? 0.0 : kTwoPi; }

// A step has the same primal layout as an iterate; its pi is unused.
using Step = Iterate;

Iterate add_step(const Iterate& x, const Step& d);
double step_inf_norm(const Step& d);

struct FlowValues {
  std::vector<double> p_ij, q_ij, p_ji, q_ji;
};

// (p_ij, q_ij, p_ji, q_ji) of one line. Linear in (w_i, w_j, w_r, w_i).
std::array<double, 4> line_flows(const Network::Line& line, double w_from, double w_to, double w_r, double w_im);

FlowValues flows(const Network& net, const Iterate& it);
double objective(const Network& net, const Iterate& it);

// r_11, r_12 are equality residuals; r_13, r_14 are p^2 + q^2 - s^2 (<= 0 when
// satisfied) and are zero for unlimited lines.
struct LineResidual {
  double r11, r12, r13, r14;
};
std::vector<LineResidual> nonlinear_residuals(const Network& net, const Iterate& it);

// Per bus: (sum p_g - p_d - sum p_ij - g_sh w, sum q_g - q_d - sum q_ij + b_sh w).
std::vector<std::array<double, 2>> balance_residuals(const Network& net, const Iterate& it);

// Ordering of the six line-local variables used by the Hessian and by the
// elimination matrix A_ij.
enum LineVar : int { kWr = 0, kWi = 1, kWFrom = 2, kWTo = 3, kThetaFrom = 4, kThetaTo = 5 };
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

// L_ij = pi_11 c_11 + pi_12 c_12 + pi_13 (s^2 - p_ij^2 - q_ij^2) + pi_14 (s^2 - p_ji^2 - q_ji^2)
double line_lagrangian(const Network& net, const Iterate& it, std::size_t line);
Mat6 line_hessian(const Network& net, const Iterate& it, std::size_t line);

// Gradients (in line-local ordering) of the four line constraint functions
// c_11 = wr^2 + wi^2 - w_i w_j, c_12 = wr sin - wi cos, c_13 = s^2 - p_ij^2 - q_ij^2,
// c_14 = s^2 - p_ji^2 - q_ji^2.
std::array<Vec6, 4> line_constraint_gradients(const Network& net, const Iterate& it, std::size_t line);
// Rows d(p_ij, q_ij, p_ji, q_ji)/d(line-local variables).
Eigen::Matrix<double, 4, 6> line_flow_jacobian(const Network::Line& line);

// h(x): equality residuals in absolute value plus max(0, p^2 + q^2 - s^2).
double constraint_violation(const Network& net, const Iterate& it);
double merit(const Network& net, const Iterate& it, double mu);

// Infinity norm over balance residuals and nonlinear residuals (inequalities as
// their positive part) jointly.
double primal_infeasibility(const Network& net, const Iterate& it);

// Infinity norm of the gradient of f + y'B(x) + sum pi'c(x) with bound
// multipliers recovered by projection. `bus_multipliers` holds (y_p, y_q) per bus.
double dual_infeasibility(const Network& net, const Iterate& it, std::span<const std::array<double, 2>> bus_multipliers,
                          double active_tol = 1e-6);

}  // namespace acopf
