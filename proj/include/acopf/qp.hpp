#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "acopf/case_io.hpp"
#include "acopf/model.hpp"

namespace acopf {

using Vec4 = Eigen::Matrix<double, 4, 1>;
using Mat4 = Eigen::Matrix<double, 4, 4>;

// d_wr = a_r . dbar + b_r and d_wi = a_i . dbar + b_i, with
// dbar = (d_w_from, d_w_to, d_theta_from, d_theta_to).
struct Elimination {
  Vec4 a_r, a_i;
  double b_r = 0.0, b_i = 0.0;
};

// Minimum |det| of the 2x2 system defining the elimination.
inline constexpr double kEliminationDetMin = 1e-10;

Elimination eliminate_dependents(const Network& net, const Iterate& it, std::size_t line);

struct Box {
  double lo, hi;
};

// All coefficients of the trust-region QP at one iterate.
struct QPData {
  struct Gen {
    double grad, hess;
    Box p, q;
  };
  struct Bus {
    Box w, theta;
    double p_rhs, q_rhs;  // residual right-hand sides of the linearized balance rows
  };
  struct Line {
    Elimination elim;
    Mat6 hessian;                       // Hessian of L_ij in line-local ordering
    Eigen::Matrix<double, 6, 4> lift;   // A_ij: dbar -> six line-local step components
    Vec6 lift_offset;                   // b_ij
    Mat4 reduced_hessian;               // A' H A
    Vec4 linear;                        // A' H b
    // Step flows (dp_ij, dq_ij, dp_ji, dq_ji) = flow_map * dbar + flow_offset.
    Eigen::Matrix<double, 4, 4> flow_map;
    Vec4 flow_offset;
    // Linearized flow limits: limit_row[e] . dbar <= limit_rhs[e], e = from, to.
    bool limited = false;
    std::array<Vec4, 2> limit_row;
    std::array<double, 2> limit_rhs{};
    // Flows at the iterate and the data for the linearized constraint model m(d).
    std::array<double, 4> flows{};
    std::array<double, 4> residual{};  // c_11, c_12, c_13, c_14 at the iterate
    std::array<Vec6, 4> gradient;      // of c_11 .. c_14
  };

  const Network* network = nullptr;  // must outlive the QPData
  Iterate point;
  double delta = 0.0;
  std::vector<Gen> gens;
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<std::size_t> empty_boxes;  // buses whose w or theta box is empty (for diagnostics)
};

// Throws Error(EmptyBox) when the trust radius cannot reconcile with bounds and
// Error(SingularElimination) when some line's elimination system is singular.
QPData build_qp(const Network& net, const Iterate& it, double delta);

// Zero-gradient projection QP used for linear feasibility, Hessian weight * I.
// The weight does not move the minimizer; matching it to rho keeps ADMM well scaled.
// Flow limits are dropped and the trust region is disabled.
QPData build_projection_qp(const Network& net, const Iterate& it, double weight = 1.0);

// q(0; mu) - q(d; mu). Throws Error(InvalidArgument) if d is not shaped for the network.
double model_reduction(const QPData& qp, const Step& d, double mu);

// Six line-local step components of `d` for `line`.
Vec6 line_step(const Network& net, const Step& d, std::size_t line);

}  // namespace acopf
