#pragma once

#include <optional>
#include <string>
#include <vector>

#include "acopf/admm.hpp"
#include "acopf/case_io.hpp"
#include "acopf/model.hpp"

namespace acopf {

struct SqpConfig {
  double mu = 1e5;  // l1 merit penalty
  double tol = 1e-4;
  double delta0 = 1.0;
  double expand = 2.0;
  double delta_max = 10.0;
  double shrink = 0.25;
  double delta_min = 1e-8;
  int max_iter = 50;
  // ADMM budget of the linear-feasibility projection, as a multiple of admm.max_iter.
  int projection_iter_factor = 20;
  AdmmConfig admm;
};

enum class SqpStatus { Converged, IterationLimit, TrustRegionCollapse };
const char* to_string(SqpStatus s);

enum class RejectReason { None, MeritIncrease, DegenerateModel, EmptyBox, SingularElimination };
const char* to_string(RejectReason r);

struct SqpRecord {
  int k = 0;
  double merit = 0.0;  // phi_1 at the iterate the step was computed from
  double objective = 0.0;
  double violation = 0.0;
  double step_norm = 0.0;
  double delta = 0.0;
  bool accepted = false;
  RejectReason reject = RejectReason::None;
  double ared = 0.0, pred = 0.0;
  double merit_next = 0.0;  // phi_1 at the iterate after the step decision
  double delta_next = 0.0;
  int admm_iterations = 0;
  double admm_primal = 0.0, admm_dual = 0.0;
};

struct SqpReport {
  std::vector<SqpRecord> iterations;
  SqpStatus status = SqpStatus::IterationLimit;
  double objective = 0.0;
  double primal_infeas = 0.0;
  double dual_infeas = 0.0;
  int sqp_steps = 0;  // accepted steps
  int admm_total_iters = 0;
  double wall_time_s = 0.0;
};

// Flat start: w = 1, theta = 0, w_r = 1, w_i = 0, generator outputs at box midpoints.
Iterate initial_iterate(const Network& net);

double balance_infeasibility(const Network& net, const Iterate& it);

// Projection of `it` onto the bounds and the balance rows, solved with ADMM.
// Throws Error(InfeasibleLinear) when the projection cannot reach the balance rows.
Iterate linear_feasibility(const Network& net, const Iterate& it, const SqpConfig& cfg, int* admm_iters = nullptr);

struct StepResult {
  bool accepted = false;
  Iterate next;
  double delta_next = 0.0;
  SqpRecord record;
  std::vector<std::array<double, 2>> bus_multipliers;
  std::optional<AdmmState> admm_state;
};

StepResult sqp_step(const Network& net, const Iterate& it, double delta, const SqpConfig& cfg,
                    const AdmmState* warm = nullptr);

struct SqpResult {
  Iterate x;
  SqpReport report;
};

SqpResult solve(const Network& net, const SqpConfig& cfg);

}  // namespace acopf
