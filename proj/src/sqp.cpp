#include "acopf/sqp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <utility>

#include "acopf/error.hpp"
#include "acopf/qp.hpp"

namespace acopf {

namespace {

// Roundoff in x + d can step a hair outside the bounds.
void clamp_to_bounds(const Network& net, Iterate& x) {
  for (std::size_t g = 0; g < net.n_gen(); ++g) {
    const auto& gen = net.gens[g];
    x.p_g[g] = std::clamp(x.p_g[g], gen.p_min, gen.p_max);
    x.q_g[g] = std::clamp(x.q_g[g], gen.q_min, gen.q_max);
  }
  for (std::size_t i = 0; i < net.n_bus(); ++i) {
    const auto& b = net.buses[i];
    x.w[i] = std::clamp(x.w[i], b.v_min * b.v_min, b.v_max * b.v_max);
    x.theta[i] = std::clamp(x.theta[i], theta_min(net, i), theta_max(net, i));
  }
}

void validate(const SqpConfig& cfg) {
  if (!(cfg.mu > 0.0) || !(cfg.tol > 0.0) || !(cfg.delta0 > 0.0) || !(cfg.shrink > 0.0 && cfg.shrink < 1.0) ||
      !(cfg.expand > 1.0) || cfg.max_iter < 1) {
    throw Error(ErrorKind::InvalidArgument, "invalid SQP configuration");
  }
}

}  // namespace

const char* to_string(SqpStatus s) {
  switch (s) {
    case SqpStatus::Converged: return "converged";
    case SqpStatus::IterationLimit: return "iteration_limit";
    case SqpStatus::TrustRegionCollapse: return "trust_region_collapse";
  }
  return "unknown";
}

const char* to_string(RejectReason r) {
  switch (r) {
    case RejectReason::None: return "none";
    case RejectReason::MeritIncrease: return "merit_increase";
    case RejectReason::DegenerateModel: return "degenerate_model";
    case RejectReason::EmptyBox: return "empty_box";
    case RejectReason::SingularElimination: return "singular_elimination";
  }
  return "unknown";
}

Iterate initial_iterate(const Network& net) {
  Iterate it = Iterate::zeros(net);
  for (std::size_t g = 0; g < net.n_gen(); ++g) {
    it.p_g[g] = 0.5 * (net.gens[g].p_min + net.gens[g].p_max);
    it.q_g[g] = 0.5 * (net.gens[g].q_min + net.gens[g].q_max);
  }
  std::fill(it.w.begin(), it.w.end(), 1.0);
  std::fill(it.w_r.begin(), it.w_r.end(), 1.0);
  return it;
}

double balance_infeasibility(const Network& net, const Iterate& it) {
  double m = 0.0;
  for (const auto& b : balance_residuals(net, it)) m = std::max({m, std::abs(b[0]), std::abs(b[1])});
  return m;
}

Iterate linear_feasibility(const Network& net, const Iterate& it, const SqpConfig& cfg, int* admm_iters) {
  const QPData qp = build_projection_qp(net, it, cfg.admm.rho);
  AdmmConfig admm = cfg.admm;
  admm.max_iter = cfg.admm.max_iter * std::max(1, cfg.projection_iter_factor);
  const QpSolution sol = solve_qp(qp, admm);
  if (admm_iters != nullptr) *admm_iters = sol.stats.iterations;
  Iterate out = add_step(it, sol.step);
  clamp_to_bounds(net, out);
  out.pi = it.pi;
  const double bal = balance_infeasibility(net, out);
  const double bal0 = balance_infeasibility(net, it);
  // Leftover imbalance is repaired by the balance rows of later QPs; only a
  // projection that makes no real progress certifies infeasibility.
  if (sol.stats.status != AdmmStatus::Converged && bal > std::max(100.0 * cfg.admm.eps, 0.5 * bal0)) {
    throw Error(ErrorKind::InfeasibleLinear,
                "projection onto the balance rows stalled at residual " + std::to_string(bal));
  }
  return out;
}

StepResult sqp_step(const Network& net, const Iterate& it, double delta, const SqpConfig& cfg, const AdmmState* warm) {
  StepResult res;
  auto& rec = res.record;
  rec.delta = delta;
  rec.objective = objective(net, it);
  rec.violation = constraint_violation(net, it);
  rec.merit = rec.objective + cfg.mu * rec.violation;

  auto reject = [&](RejectReason why) {
    res.accepted = false;
    res.next = it;
    res.delta_next = delta * cfg.shrink;
    rec.accepted = false;
    rec.reject = why;
    rec.merit_next = rec.merit;
    rec.delta_next = res.delta_next;
  };

  QPData qp;
  try {
    qp = build_qp(net, it, delta);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::EmptyBox) {
      reject(RejectReason::EmptyBox);
      return res;
    }
    if (e.kind() == ErrorKind::SingularElimination) {
      reject(RejectReason::SingularElimination);
      return res;
    }
    throw;
  }

  QpSolution sol = solve_qp(qp, cfg.admm, warm);
  rec.admm_iterations = sol.stats.iterations;
  rec.admm_primal = sol.stats.primal_residual;
  rec.admm_dual = sol.stats.dual_residual;
  rec.step_norm = step_inf_norm(sol.step);

  Iterate trial = add_step(it, sol.step);
  clamp_to_bounds(net, trial);
  trial.pi = sol.pi;
  rec.pred = model_reduction(qp, sol.step, cfg.mu);
  const double merit_trial = merit(net, trial, cfg.mu);
  rec.ared = rec.merit - merit_trial;

  if (!(rec.pred > 0.0) || !(rec.ared > 0.0) || !trial.finite()) {
    reject(rec.pred > 0.0 ? RejectReason::MeritIncrease : RejectReason::DegenerateModel);
    sol.state.rescale_primal(cfg.shrink);
  } else {
    res.accepted = true;
    res.next = std::move(trial);
    res.delta_next = std::min(cfg.expand * delta, cfg.delta_max);
    rec.accepted = true;
    rec.merit_next = merit_trial;
    rec.delta_next = res.delta_next;
    sol.state.rescale_primal(0.0);
  }
  res.bus_multipliers = std::move(sol.bus_multipliers);
  res.admm_state = std::move(sol.state);
  return res;
}

SqpResult solve(const Network& net, const SqpConfig& cfg) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  SqpResult out;
  auto& rep = out.report;

  Iterate x = initial_iterate(net);
  if (balance_infeasibility(net, x) > cfg.tol) {
    int iters = 0;
    x = linear_feasibility(net, x, cfg, &iters);
    rep.admm_total_iters += iters;
  }

  std::vector<std::array<double, 2>> y(net.n_bus(), {0.0, 0.0});
  std::optional<AdmmState> warm;
  double delta = cfg.delta0;
  rep.status = SqpStatus::IterationLimit;

  for (int k = 0; k < cfg.max_iter; ++k) {
    StepResult step = sqp_step(net, x, delta, cfg, warm ? &*warm : nullptr);
    step.record.k = k;
    rep.admm_total_iters += step.record.admm_iterations;
    if (step.admm_state) warm = std::move(step.admm_state);
    const bool accepted = step.accepted;
    const double dnorm = step.record.step_norm;
    const bool computed = step.record.reject != RejectReason::EmptyBox &&
                          step.record.reject != RejectReason::SingularElimination;
    rep.iterations.push_back(step.record);
    delta = step.delta_next;

    if (accepted) {
      ++rep.sqp_steps;
      x = std::move(step.next);
      y = std::move(step.bus_multipliers);
      if (primal_infeasibility(net, x) <= cfg.tol && dual_infeasibility(net, x, y) <= cfg.tol) {
        rep.status = SqpStatus::Converged;
        break;
      }
    }
    // A QP step below tolerance means the model sees no further progress. It
    // only counts at a primal-feasible point, since inexact ADMM steps can
    // drift the linear rows which the merit function does not see.
    if (computed && dnorm <= cfg.tol && primal_infeasibility(net, x) <= cfg.tol) {
      rep.status = SqpStatus::Converged;
      break;
    }
    if (delta < cfg.delta_min) {
      rep.status = SqpStatus::TrustRegionCollapse;
      break;
    }
  }

  rep.objective = objective(net, x);
  rep.primal_infeas = primal_infeasibility(net, x);
  rep.dual_infeas = dual_infeasibility(net, x, y);
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.x = std::move(x);
  return out;
}

}  // namespace acopf
