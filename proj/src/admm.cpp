#include "acopf/admm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "acopf/error.hpp"
#include "acopf/parallel.hpp"

namespace acopf {

namespace {

Vec4 voltage_targets(const Network& net, const AdmmState& st, std::size_t l) {
  const auto& ln = net.lines[l];
  return {st.bus_w[ln.from], st.bus_w[ln.to], st.bus_theta[ln.from], st.bus_theta[ln.to]};
}

struct LineBox {
  Vec4 lo, hi;
};

LineBox line_box(const QPData& qp, std::size_t l) {
  const auto& ln = qp.network->lines[l];
  const auto& bf = qp.buses[ln.from];
  const auto& bt = qp.buses[ln.to];
  return {Vec4(bf.w.lo, bt.w.lo, bf.theta.lo, bt.theta.lo), Vec4(bf.w.hi, bt.w.hi, bf.theta.hi, bt.theta.hi)};
}

// Line subproblem without the flow limits: 0.5 v'Qv + b'v + const.
struct LineQuadratic {
  Mat4 q;
  Vec4 b;
  double c = 0.0;
};

LineQuadratic line_quadratic(const QPData& qp, const AdmmState& st, std::size_t l) {
  const auto& ql = qp.lines[l];
  const double rho = st.rho;
  const Vec4 t = voltage_targets(*qp.network, st, l);
  const Vec4 off = ql.flow_offset - st.flow_z[l];
  LineQuadratic lq;
  lq.q = ql.reduced_hessian + rho * ql.flow_map.transpose() * ql.flow_map + rho * Mat4::Identity();
  lq.b = ql.linear + ql.flow_map.transpose() * (st.lambda_flow[l] + rho * off) + st.lambda_volt[l] - rho * t;
  lq.c = st.lambda_flow[l].dot(off) + 0.5 * rho * off.squaredNorm() - st.lambda_volt[l].dot(t) +
         0.5 * rho * t.squaredNorm();
  return lq;
}

}  // namespace

AdmmState AdmmState::cold(const Network& net, double rho) {
  AdmmState st;
  st.rho = rho;
  const auto ng = net.n_gen(), nl = net.n_line(), nb = net.n_bus();
  st.gen_x.assign(ng, {0.0, 0.0});
  st.gen_z = st.gen_x;
  st.gen_lambda = st.gen_x;
  st.line_v.assign(nl, Vec4::Zero());
  st.line_flow = st.line_v;
  st.flow_z = st.line_v;
  st.lambda_flow = st.line_v;
  st.lambda_volt = st.line_v;
  st.alm_multiplier.assign(nl, {0.0, 0.0});
  st.line_failed.assign(nl, 0);
  st.bus_w.assign(nb, 0.0);
  st.bus_theta.assign(nb, 0.0);
  st.bus_multiplier.assign(nb, {0.0, 0.0});
  st.gen_z_prev = st.gen_z;
  st.flow_z_prev = st.flow_z;
  st.bus_w_prev = st.bus_w;
  st.bus_theta_prev = st.bus_theta;
  return st;
}

void AdmmState::rescale_primal(double factor) {
  for (auto* v : {&gen_x, &gen_z}) {
    for (auto& a : *v) {
      a[0] *= factor;
      a[1] *= factor;
    }
  }
  for (auto* v : {&line_v, &line_flow, &flow_z}) {
    for (auto& a : *v) a *= factor;
  }
  for (auto* v : {&bus_w, &bus_theta}) {
    for (auto& a : *v) a *= factor;
  }
}

double clamp_diag_qp(double q, double c, double lo, double hi) { return std::clamp(c / q, lo, hi); }

std::array<double, 2> solve_diag_equality_qp(std::span<const double> q, std::span<const double> c,
                                             std::span<const std::array<double, 2>> cols, std::array<double, 2> b,
                                             std::array<bool, 2> active, std::span<double> x) {
  const std::size_t n = q.size();
  double s00 = 0.0, s01 = 0.0, s11 = 0.0, r0 = -b[0], r1 = -b[1];
  for (std::size_t k = 0; k < n; ++k) {
    const double a0 = active[0] ? cols[k][0] : 0.0;
    const double a1 = active[1] ? cols[k][1] : 0.0;
    s00 += a0 * a0 / q[k];
    s01 += a0 * a1 / q[k];
    s11 += a1 * a1 / q[k];
    r0 += a0 * c[k] / q[k];
    r1 += a1 * c[k] / q[k];
  }
  std::array<double, 2> lambda{0.0, 0.0};
  if (active[0] && active[1]) {
    const double det = s00 * s11 - s01 * s01;
    if (!(std::abs(det) > 1e-14 * std::max(1.0, s00 * s11))) {
      throw Error(ErrorKind::SingularSchur, "balance rows are linearly dependent");
    }
    lambda[0] = (s11 * r0 - s01 * r1) / det;
    lambda[1] = (s00 * r1 - s01 * r0) / det;
  } else if (active[0] || active[1]) {
    const int r = active[0] ? 0 : 1;
    const double s = r == 0 ? s00 : s11;
    if (!(s > 0.0)) throw Error(ErrorKind::SingularSchur, "balance row has no coupled variables");
    lambda[r] = (r == 0 ? r0 : r1) / s;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double a0 = active[0] ? cols[k][0] : 0.0;
    const double a1 = active[1] ? cols[k][1] : 0.0;
    x[k] = (c[k] - a0 * lambda[0] - a1 * lambda[1]) / q[k];
  }
  return lambda;
}

std::array<double, 2> generator_kernel(const QPData& qp, const AdmmState& st, std::size_t g) {
  const auto& qg = qp.gens[g];
  const double rho = st.rho;
  const auto& z = st.gen_z[g];
  const auto& lam = st.gen_lambda[g];
  // grad d + 0.5 hess d^2 + lam d + rho/2 (d - z)^2  ->  Q = hess + rho, c = rho z - lam - grad
  return {clamp_diag_qp(qg.hess + rho, rho * z[0] - lam[0] - qg.grad, qg.p.lo, qg.p.hi),
          clamp_diag_qp(rho, rho * z[1] - lam[1], qg.q.lo, qg.q.hi)};
}

double line_kernel_objective(const QPData& qp, const AdmmState& st, std::size_t l, const Vec4& v) {
  const auto lq = line_quadratic(qp, st, l);
  return 0.5 * v.dot(lq.q * v) + lq.b.dot(v) + lq.c;
}

LineKernelResult line_kernel(const QPData& qp, const AdmmState& st, std::size_t l, const AdmmConfig& cfg) {
  const auto& ql = qp.lines[l];
  const auto lq = line_quadratic(qp, st, l);
  const auto box = line_box(qp, l);
  const Vec4 start = st.line_v[l].cwiseMax(box.lo).cwiseMin(box.hi);

  LineKernelResult out;
  TronConfig tron = cfg.tron;
  tron.gtol = std::min(tron.gtol, cfg.alm.tol);

  if (!ql.limited) {
    auto fn = [&](const Vec4& x, Vec4* g, Mat4* h) {
      const Vec4 qx = lq.q * x;
      if (g != nullptr) *g = qx + lq.b;
      if (h != nullptr) *h = lq.q;
      return 0.5 * x.dot(qx) + lq.b.dot(x);
    };
    const auto r = tron_minimize<4>(fn, start, box.lo, box.hi, tron);
    out.v = r.x;
    out.tron_failed = r.status != TronStatus::Converged;
  } else {
    // Inequality ALM with the slack eliminated in closed form:
    // psi(h) = (max(0, nu + beta h)^2 - nu^2) / (2 beta), beta = 1 / mu.
    std::array<double, 2> nu = st.alm_multiplier[l];
    double beta = st.rho / cfg.alm.mu_scale;
    double prev_violation = std::numeric_limits<double>::infinity();
    Vec4 x = start;
    for (int outer = 0; outer < cfg.alm.max_outer; ++outer) {
      auto fn = [&](const Vec4& v, Vec4* g, Mat4* h) {
        const Vec4 qv = lq.q * v;
        double value = 0.5 * v.dot(qv) + lq.b.dot(v);
        if (g != nullptr) *g = qv + lq.b;
        if (h != nullptr) *h = lq.q;
        for (int e = 0; e < 2; ++e) {
          const double he = ql.limit_row[e].dot(v) - ql.limit_rhs[e];
          const double m = std::max(0.0, nu[e] + beta * he);
          value += (m * m - nu[e] * nu[e]) / (2.0 * beta);
          if (m > 0.0) {
            if (g != nullptr) *g += m * ql.limit_row[e];
            if (h != nullptr) *h += beta * ql.limit_row[e] * ql.limit_row[e].transpose();
          }
        }
        return value;
      };
      const auto r = tron_minimize<4>(fn, x, box.lo, box.hi, tron);
      x = r.x;
      out.tron_failed = r.status != TronStatus::Converged;

      double violation = 0.0;
      for (int e = 0; e < 2; ++e) {
        const double he = ql.limit_row[e].dot(x) - ql.limit_rhs[e];
        violation = std::max(violation, std::abs(std::max(he, -nu[e] / beta)));
        nu[e] = std::clamp(nu[e] + beta * he, 0.0, cfg.alm.multiplier_max);
      }
      if (violation <= cfg.alm.tol) break;
      if (violation > 0.25 * prev_violation) beta /= cfg.alm.mu_shrink;
      prev_violation = violation;
    }
    out.v = x;
    out.alm_multiplier = nu;
  }
  out.flows = ql.flow_map * out.v + ql.flow_offset;
  return out;
}

void bus_kernel(const QPData& qp, AdmmState& st, std::size_t i) {
  const Network& net = *qp.network;
  const double rho = st.rho;
  const auto& gens = net.bus_gens[i];
  const auto& ends = net.adjacency[i];
  const auto& bus = net.buses[i];
  const bool has_lines = !ends.empty();

  thread_local std::vector<double> q, c, x;
  thread_local std::vector<std::array<double, 2>> cols;
  q.clear();
  c.clear();
  cols.clear();

  for (const auto g : gens) {
    const auto& xg = st.gen_x[g];
    const auto& lg = st.gen_lambda[g];
    q.push_back(rho);
    c.push_back(lg[0] + rho * xg[0]);
    cols.push_back({1.0, 0.0});
    q.push_back(rho);
    c.push_back(lg[1] + rho * xg[1]);
    cols.push_back({0.0, 1.0});
  }
  double cw = 0.0, ctheta = 0.0;
  for (const auto& inc : ends) {
    const int k = inc.end == LineEnd::From ? 0 : 2;  // offset into (p_ij, q_ij, p_ji, q_ji)
    const int v = inc.end == LineEnd::From ? 0 : 1;  // offset into (w_from, w_to, ...)
    const auto& flow = st.line_flow[inc.line];
    const auto& lf = st.lambda_flow[inc.line];
    q.push_back(rho);
    c.push_back(lf(k) + rho * flow(k));
    cols.push_back({-1.0, 0.0});
    q.push_back(rho);
    c.push_back(lf(k + 1) + rho * flow(k + 1));
    cols.push_back({0.0, -1.0});
    const auto& lv = st.lambda_volt[inc.line];
    const auto& xv = st.line_v[inc.line];
    cw += lv(v) + rho * xv(v);
    ctheta += lv(2 + v) + rho * xv(2 + v);
  }
  const double qw = rho * static_cast<double>(ends.size());
  if (has_lines) {
    q.push_back(qw);
    c.push_back(cw);
    cols.push_back({-bus.g_sh, bus.b_sh});
  }

  std::array<bool, 2> active{false, false};
  for (const auto& col : cols) {
    active[0] = active[0] || col[0] != 0.0;
    active[1] = active[1] || col[1] != 0.0;
  }
  x.assign(q.size(), 0.0);
  const auto lambda = solve_diag_equality_qp(q, c, cols, {qp.buses[i].p_rhs, qp.buses[i].q_rhs}, active, x);

  std::size_t k = 0;
  for (const auto g : gens) {
    st.gen_z[g] = {x[k], x[k + 1]};
    k += 2;
  }
  for (const auto& inc : ends) {
    const int off = inc.end == LineEnd::From ? 0 : 2;
    st.flow_z[inc.line](off) = x[k];
    st.flow_z[inc.line](off + 1) = x[k + 1];
    k += 2;
  }
  st.bus_w[i] = has_lines ? x[k] : 0.0;
  st.bus_theta[i] = has_lines ? ctheta / qw : 0.0;
  st.bus_multiplier[i] = lambda;
}

void update_multipliers(AdmmState& st, const QPData& qp, int threads) {
  const Network& net = *qp.network;
  const double rho = st.rho;
  const double r_gen = parallel_max(net.n_gen(), threads, [&](std::size_t g) {
    double m = 0.0;
    for (int k = 0; k < 2; ++k) {
      const double r = st.gen_x[g][k] - st.gen_z[g][k];
      st.gen_lambda[g][k] += rho * r;
      m = std::max(m, std::abs(r));
    }
    return m;
  });
  const double s_gen = parallel_max(net.n_gen(), threads, [&](std::size_t g) {
    return rho * std::max(std::abs(st.gen_z[g][0] - st.gen_z_prev[g][0]), std::abs(st.gen_z[g][1] - st.gen_z_prev[g][1]));
  });
  const double r_line = parallel_max(net.n_line(), threads, [&](std::size_t l) {
    const Vec4 rf = st.line_flow[l] - st.flow_z[l];
    const Vec4 rv = st.line_v[l] - voltage_targets(net, st, l);
    st.lambda_flow[l] += rho * rf;
    st.lambda_volt[l] += rho * rv;
    return std::max(rf.cwiseAbs().maxCoeff(), rv.cwiseAbs().maxCoeff());
  });
  // Dual residual of the line block in its own coordinates: rho (M' dz_flow + dt).
  const double s_line = parallel_max(net.n_line(), threads, [&](std::size_t l) {
    const auto& ln = net.lines[l];
    const Vec4 dt(st.bus_w[ln.from] - st.bus_w_prev[ln.from], st.bus_w[ln.to] - st.bus_w_prev[ln.to],
                  st.bus_theta[ln.from] - st.bus_theta_prev[ln.from], st.bus_theta[ln.to] - st.bus_theta_prev[ln.to]);
    const Vec4 s = qp.lines[l].flow_map.transpose() * (st.flow_z[l] - st.flow_z_prev[l]) + dt;
    return rho * s.cwiseAbs().maxCoeff();
  });
  st.primal_residual = std::max(r_gen, r_line);
  st.dual_residual = std::max(s_gen, s_line);
}

Step assemble_step(const QPData& qp, const AdmmState& st) {
  const Network& net = *qp.network;
  Step d = Iterate::zeros(net);
  for (std::size_t g = 0; g < net.n_gen(); ++g) {
    d.p_g[g] = st.gen_x[g][0];
    d.q_g[g] = st.gen_x[g][1];
  }
  // The bus kernel carries no bounds; clip to the QP box so iterates stay within limits.
  for (std::size_t i = 0; i < net.n_bus(); ++i) {
    d.w[i] = std::clamp(st.bus_w[i], qp.buses[i].w.lo, qp.buses[i].w.hi);
    d.theta[i] = std::clamp(st.bus_theta[i], qp.buses[i].theta.lo, qp.buses[i].theta.hi);
  }
  // (w_r, w_i) from the line-side copy: the step's flows then equal the line
  // kernel's flows, so ADMM error reaches the balance rows unscaled by the admittances.
  for (std::size_t l = 0; l < net.n_line(); ++l) {
    const auto& e = qp.lines[l].elim;
    const Vec4& v = st.line_v[l];
    d.w_r[l] = e.a_r.dot(v) + e.b_r;
    d.w_i[l] = e.a_i.dot(v) + e.b_i;
  }
  return d;
}

std::vector<std::array<double, 4>> recover_line_multipliers(const QPData& qp, const AdmmState& st) {
  const Network& net = *qp.network;
  std::vector<std::array<double, 4>> pi(net.n_line());
  for (std::size_t l = 0; l < net.n_line(); ++l) {
    const auto& ql = qp.lines[l];
    const Vec6 d6 = ql.lift * st.line_v[l] + ql.lift_offset;
    const auto jac = line_flow_jacobian(net.lines[l]);
    // Stationarity of the QP Lagrangian in the eliminated variables (w_r, w_i):
    // H d + J' lambda_flow - nu_13 grad c_13 - nu_14 grad c_14 + pi_11 grad c_11 + pi_12 grad c_12 = 0.
    Vec6 rest = ql.hessian * d6 + jac.transpose() * st.lambda_flow[l];
    const auto& nu = st.alm_multiplier[l];
    if (ql.limited) rest -= nu[0] * ql.gradient[2] + nu[1] * ql.gradient[3];
    const double m00 = ql.gradient[0](kWr), m01 = ql.gradient[1](kWr);
    const double m10 = ql.gradient[0](kWi), m11 = ql.gradient[1](kWi);
    const double det = m00 * m11 - m01 * m10;  // nonzero whenever the elimination exists
    const double r0 = -rest(kWr), r1 = -rest(kWi);
    pi[l] = {(m11 * r0 - m01 * r1) / det, (m00 * r1 - m10 * r0) / det, ql.limited ? -nu[0] : 0.0,
             ql.limited ? -nu[1] : 0.0};
  }
  return pi;
}

QpSolution solve_qp(const QPData& qp, const AdmmConfig& cfg, const AdmmState* warm) {
  if (!(cfg.rho > 0.0) || cfg.max_iter < 1 || !(cfg.eps > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "ADMM needs rho > 0, max_iter >= 1 and eps > 0");
  }
  const Network& net = *qp.network;
  AdmmState st = warm != nullptr ? *warm : AdmmState::cold(net, cfg.rho);
  if (st.gen_x.size() != net.n_gen() || st.line_v.size() != net.n_line() || st.bus_w.size() != net.n_bus()) {
    throw Error(ErrorKind::InvalidArgument, "warm-start state does not match the network");
  }
  st.rho = cfg.rho;
  st.iterations = 0;
  std::fill(st.line_failed.begin(), st.line_failed.end(), 0);

  const std::size_t ng = net.n_gen(), nl = net.n_line();
  AdmmState best;
  double best_residual = std::numeric_limits<double>::infinity();
  AdmmStats stats;

  for (int k = 1; k <= cfg.max_iter; ++k) {
    parallel_for(ng + nl, cfg.threads, [&](std::size_t idx) {
      if (idx < ng) {
        st.gen_x[idx] = generator_kernel(qp, st, idx);
        return;
      }
      const std::size_t l = idx - ng;
      const auto r = line_kernel(qp, st, l, cfg);
      st.line_v[l] = r.v;
      st.line_flow[l] = r.flows;
      st.alm_multiplier[l] = r.alm_multiplier;
      st.line_failed[l] = st.line_failed[l] || r.tron_failed;
    });

    st.gen_z_prev = st.gen_z;
    st.flow_z_prev = st.flow_z;
    st.bus_w_prev = st.bus_w;
    st.bus_theta_prev = st.bus_theta;
    parallel_for(net.n_bus(), cfg.threads, [&](std::size_t i) { bus_kernel(qp, st, i); });

    update_multipliers(st, qp, cfg.threads);
    st.iterations = k;

    const double residual = std::max(st.primal_residual, st.dual_residual);
    if (residual <= cfg.eps) {
      stats.status = AdmmStatus::Converged;
      break;
    }
    if (residual < best_residual) {
      best_residual = residual;
      best = st;
    }
  }
  if (stats.status != AdmmStatus::Converged && best_residual < std::max(st.primal_residual, st.dual_residual)) {
    const int iters = st.iterations;
    st = std::move(best);
    st.iterations = iters;
  }

  stats.iterations = st.iterations;
  stats.primal_residual = st.primal_residual;
  stats.dual_residual = st.dual_residual;
  stats.line_failures =
      static_cast<std::size_t>(std::count(st.line_failed.begin(), st.line_failed.end(), std::uint8_t{1}));

  QpSolution sol;
  sol.step = assemble_step(qp, st);
  sol.pi = recover_line_multipliers(qp, st);
  sol.bus_multipliers = st.bus_multiplier;
  sol.stats = stats;
  sol.state = std::move(st);
  return sol;
}

}  // namespace acopf
