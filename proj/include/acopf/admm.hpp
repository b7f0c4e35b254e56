#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "acopf/qp.hpp"
#include "acopf/tron.hpp"

namespace acopf {

// Augmented Lagrangian schedule for the flow limits inside the line kernel.
struct AlmConfig {
  double mu_scale = 10.0;  // initial mu = mu_scale / rho
  double mu_shrink = 0.1;  // applied when the violation fails to drop by 4x
  double multiplier_max = 1e8;
  double tol = 1e-8;
  int max_outer = 20;
};

struct AdmmConfig {
  double rho = 1e3;
  int max_iter = 1000;
  double eps = 1e-4;
  AlmConfig alm;
  TronConfig tron;
  int threads = 1;
};

// Component-side values, bus-side copies and multipliers of every coupling.
// Coupling order per line: flows (p_ij, q_ij, p_ji, q_ji) and voltages
// (w_from, w_to, theta_from, theta_to).
struct AdmmState {
  double rho = 1.0;

  std::vector<std::array<double, 2>> gen_x, gen_z, gen_lambda;

  std::vector<Vec4> line_v;     // dbar on the line side
  std::vector<Vec4> line_flow;  // flows induced by line_v
  std::vector<Vec4> flow_z;     // bus-side flow copies
  std::vector<Vec4> lambda_flow;
  std::vector<Vec4> lambda_volt;
  std::vector<std::array<double, 2>> alm_multiplier;  // >= 0, for h(dbar) <= 0
  std::vector<std::uint8_t> line_failed;

  std::vector<double> bus_w, bus_theta;
  std::vector<std::array<double, 2>> bus_multiplier;  // balance-row multipliers

  // Bus-side values from the previous iteration, for the dual residual.
  std::vector<std::array<double, 2>> gen_z_prev;
  std::vector<Vec4> flow_z_prev;
  std::vector<double> bus_w_prev, bus_theta_prev;

  int iterations = 0;
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();

  static AdmmState cold(const Network& net, double rho);
  std::size_t coupling_count() const { return 2 * gen_x.size() + 8 * line_v.size(); }

  // Scale the primal copies by `factor` (trust radius change) and zero them
  // entirely with factor 0; multipliers are kept.
  void rescale_primal(double factor);
};

// min 0.5 x'diag(q)x - c'x over l <= x <= u (q > 0): element-wise clamp of c/q.
double clamp_diag_qp(double q, double c, double lo, double hi);

// min 0.5 x'diag(q)x - c'x s.t. a_row' x = b_row for the active rows (at most
// two). `cols[k]` holds the coefficients of x_k in the two rows. Returns the
// row multipliers; x = diag(q)^{-1}(c - A' lambda).
std::array<double, 2> solve_diag_equality_qp(std::span<const double> q, std::span<const double> c,
                                             std::span<const std::array<double, 2>> cols, std::array<double, 2> b,
                                             std::array<bool, 2> active_rows, std::span<double> x);

std::array<double, 2> generator_kernel(const QPData& qp, const AdmmState& st, std::size_t gen);

struct LineKernelResult {
  Vec4 v;
  Vec4 flows;
  std::array<double, 2> alm_multiplier{};
  bool tron_failed = false;
};
LineKernelResult line_kernel(const QPData& qp, const AdmmState& st, std::size_t line, const AdmmConfig& cfg);

// Objective of the line subproblem (without ALM terms) at `v`.
double line_kernel_objective(const QPData& qp, const AdmmState& st, std::size_t line, const Vec4& v);

// Writes bus-side copies of every coupling at `bus` into `st`.
void bus_kernel(const QPData& qp, AdmmState& st, std::size_t bus);

// lambda += rho (x - xbar); stores infinity norms of r = x - xbar and
// s = rho A' (xbar - xbar_prev), A mapping each component to its couplings.
void update_multipliers(AdmmState& st, const QPData& qp, int threads = 1);

enum class AdmmStatus { Converged, IterationLimit };

struct AdmmStats {
  AdmmStatus status = AdmmStatus::IterationLimit;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  std::size_t line_failures = 0;
};

struct QpSolution {
  Step step;
  std::vector<std::array<double, 4>> pi;              // recovered per-line multipliers
  std::vector<std::array<double, 2>> bus_multipliers;  // balance-row multipliers
  AdmmStats stats;
  AdmmState state;
};

// Step assembled from the bus-side consensus values of `st`.
Step assemble_step(const QPData& qp, const AdmmState& st);
std::vector<std::array<double, 4>> recover_line_multipliers(const QPData& qp, const AdmmState& st);

QpSolution solve_qp(const QPData& qp, const AdmmConfig& cfg, const AdmmState* warm = nullptr);

}  // namespace acopf
