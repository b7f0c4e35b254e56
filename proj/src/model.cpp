#include "acopf/model.hpp"

#include <algorithm>
#include <cmath>

namespace acopf {

namespace {

double sq(double v) { return v * v; }

template <class F>
void for_each_vector(Iterate& a, const Iterate& b, F&& f) {
  f(a.p_g, b.p_g);
  f(a.q_g, b.q_g);
  f(a.w, b.w);
  f(a.theta, b.theta);
  f(a.w_r, b.w_r);
  f(a.w_i, b.w_i);
}

// Residual of grad L_j against the box [lo, hi] after absorbing bound multipliers.
double projected_residual(double grad, double x, double lo, double hi, double tol) {
  const bool at_lo = x <= lo + tol;
  const bool at_hi = x >= hi - tol;
  if (at_lo && at_hi) return 0.0;
  if (at_lo) return std::min(grad, 0.0);
  if (at_hi) return std::max(grad, 0.0);
  return grad;
}

}  // namespace

Iterate Iterate::zeros(const Network& net) {
  Iterate it;
  it.p_g.assign(net.n_gen(), 0.0);
  it.q_g.assign(net.n_gen(), 0.0);
  it.w.assign(net.n_bus(), 0.0);
  it.theta.assign(net.n_bus(), 0.0);
  it.w_r.assign(net.n_line(), 0.0);
  it.w_i.assign(net.n_line(), 0.0);
  it.pi.assign(net.n_line(), {0.0, 0.0, 0.0, 0.0});
  return it;
}

bool Iterate::shaped_for(const Network& net) const {
  return p_g.size() == net.n_gen() && q_g.size() == net.n_gen() && w.size() == net.n_bus() &&
         theta.size() == net.n_bus() && w_r.size() == net.n_line() && w_i.size() == net.n_line() &&
         pi.size() == net.n_line();
}

bool Iterate::finite() const {
  auto ok = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  const bool pi_ok = std::all_of(pi.begin(), pi.end(), [](const std::array<double, 4>& p) {
    return std::all_of(p.begin(), p.end(), [](double x) { return std::isfinite(x); });
  });
  return ok(p_g) && ok(q_g) && ok(w) && ok(theta) && ok(w_r) && ok(w_i) && pi_ok;
}

Iterate add_step(const Iterate& x, const Step& d) {
  Iterate out = x;
  for_each_vector(out, d, [](std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
  });
  return out;
}

double step_inf_norm(const Step& d) {
  double m = 0.0;
  for (const auto* v : {&d.p_g, &d.q_g, &d.w, &d.theta, &d.w_r, &d.w_i}) {
    for (double x : *v) m = std::max(m, std::abs(x));
  }
  return m;
}

std::array<double, 4> line_flows(const Network::Line& ln, double w_from, double w_to, double w_r, double w_im) {
  return {ln.g_ii * w_from + ln.g_ij * w_r + ln.b_ij * w_im, -ln.b_ii * w_from - ln.b_ij * w_r + ln.g_ij * w_im,
          ln.g_jj * w_to + ln.g_ji * w_r - ln.b_ji * w_im, -ln.b_jj * w_to - ln.b_ji * w_r - ln.g_ji * w_im};
}

FlowValues flows(const Network& net, const Iterate& it) {
  FlowValues fv;
  const auto n = net.n_line();
  fv.p_ij.resize(n);
  fv.q_ij.resize(n);
  fv.p_ji.resize(n);
  fv.q_ji.resize(n);
  for (std::size_t l = 0; l < n; ++l) {
    const auto& ln = net.lines[l];
    const auto f = line_flows(ln, it.w[ln.from], it.w[ln.to], it.w_r[l], it.w_i[l]);
    fv.p_ij[l] = f[0];
    fv.q_ij[l] = f[1];
    fv.p_ji[l] = f[2];
    fv.q_ji[l] = f[3];
  }
  return fv;
}

double objective(const Network& net, const Iterate& it) {
  double f = 0.0;
  for (std::size_t g = 0; g < net.n_gen(); ++g) {
    const auto& gen = net.gens[g];
    const double p = it.p_g[g];
    f += gen.c2 * p * p + gen.c1 * p + gen.c0;
  }
  return f;
}

std::vector<LineResidual> nonlinear_residuals(const Network& net, const Iterate& it) {
  std::vector<LineResidual> out(net.n_line());
  for (std::size_t l = 0; l < net.n_line(); ++l) {
    const auto& ln = net.lines[l];
    const double wr = it.w_r[l], wi = it.w_i[l];
    const double dtheta = it.theta[ln.from] - it.theta[ln.to];
    auto& r = out[l];
    r.r11 = wr * wr + wi * wi - it.w[ln.from] * it.w[ln.to];
    r.r12 = wr * std::sin(dtheta) - wi * std::cos(dtheta);
    if (ln.limited) {
      const auto f = line_flows(ln, it.w[ln.from], it.w[ln.to], wr, wi);
      const double s2 = ln.s_max * ln.s_max;
      r.r13 = f[0] * f[0] + f[1] * f[1] - s2;
      r.r14 = f[2] * f[2] + f[3] * f[3] - s2;
    } else {
      r.r13 = r.r14 = 0.0;
    }
  }
  return out;
}

std::vector<std::array<double, 2>> balance_residuals(const Network& net, const Iterate& it) {
  std::vector<std::array<double, 2>> res(net.n_bus());
  for (std::size_t i = 0; i < net.n_bus(); ++i) {
    const auto& b = net.buses[i];
    res[i] = {-b.p_d - b.g_sh * it.w[i], -b.q_d + b.b_sh * it.w[i]};
  }
  for (std::size_t g = 0; g < net.n_gen(); ++g) {
    res[net.gens[g].bus][0] += it.p_g[g];
    res[net.gens[g].bus][1] += it.q_g[g];
  }
  for (std::size_t l = 0; l < net.n_line(); ++l) {
    const auto& ln = net.lines[l];
    const auto f = line_flows(ln, it.w[ln.from], it.w[ln.to], it.w_r[l], it.w_i[l]);
    res[ln.from][0] -= f[0];
    res[ln.from][1] -= f[1];
    res[ln.to][0] -= f[2];
    res[ln.to][1] -= f[3];
  }
  return res;
}

Eigen::Matrix<double, 4, 6> line_flow_jacobian(const Network::Line& ln) {
  Eigen::Matrix<double, 4, 6> j = Eigen::Matrix<double, 4, 6>::Zero();
  j(0, kWr) = ln.g_ij;
  j(0, kWi) = ln.b_ij;
  j(0, kWFrom) = ln.g_ii;
  j(1, kWr) = -ln.b_ij;
  j(1, kWi) = ln.g_ij;
  j(1, kWFrom) = -ln.b_ii;
  j(2, kWr) = ln.g_ji;
  j(2, kWi) = -ln.b_ji;
  j(2, kWTo) = ln.g_jj;
  j(3, kWr) = -ln.b_ji;
  j(3, kWi) = -ln.g_ji;
  j(3, kWTo) = -ln.b_jj;
  return j;
}

double line_lagrangian(const Network& net, const Iterate& it, std::size_t l) {
  const auto& ln = net.lines[l];
  const auto& pi = it.pi[l];
  const double wr = it.w_r[l], wi = it.w_i[l];
  const double dtheta = it.theta[ln.from] - it.theta[ln.to];
  double value = pi[0] * (wr * wr + wi * wi - it.w[ln.from] * it.w[ln.to]) +
                 pi[1] * (wr * std::sin(dtheta) - wi * std::cos(dtheta));
  if (ln.limited) {
    const auto f = line_flows(ln, it.w[ln.from], it.w[ln.to], wr, wi);
    const double s2 = ln.s_max * ln.s_max;
    value += pi[2] * (s2 - f[0] * f[0] - f[1] * f[1]) + pi[3] * (s2 - f[2] * f[2] - f[3] * f[3]);
  }
  return value;
}

Mat6 line_hessian(const Network& net, const Iterate& it, std::size_t l) {
  const auto& ln = net.lines[l];
  const auto& pi = it.pi[l];
  const double wr = it.w_r[l], wi = it.w_i[l];
  const double dtheta = it.theta[ln.from] - it.theta[ln.to];
  const double s = std::sin(dtheta), c = std::cos(dtheta);

  // Upper triangle only; mirrored at the end so the result is exactly symmetric.
  Mat6 h = Mat6::Zero();
  h(kWr, kWr) += 2.0 * pi[0];
  h(kWi, kWi) += 2.0 * pi[0];
  h(kWFrom, kWTo) += -pi[0];

  h(kWr, kThetaFrom) += pi[1] * c;
  h(kWr, kThetaTo) += -pi[1] * c;
  h(kWi, kThetaFrom) += pi[1] * s;
  h(kWi, kThetaTo) += -pi[1] * s;
  const double tt = pi[1] * (-wr * s + wi * c);
  h(kThetaFrom, kThetaFrom) += tt;
  h(kThetaTo, kThetaTo) += tt;
  h(kThetaFrom, kThetaTo) += -tt;

  if (ln.limited) {
    const auto jac = line_flow_jacobian(ln);
    for (int e = 0; e < 2; ++e) {
      const double m = pi[2 + e];
      if (m == 0.0) continue;
      const auto gp = jac.row(2 * e);
      const auto gq = jac.row(2 * e + 1);
      for (int a = 0; a < 6; ++a) {
        for (int b = a; b < 6; ++b) h(a, b) += -2.0 * m * (gp(a) * gp(b) + gq(a) * gq(b));
      }
    }
  }
  for (int a = 0; a < 6; ++a) {
    for (int b = a + 1; b < 6; ++b) h(b, a) = h(a, b);
  }
  return h;
}

std::array<Vec6, 4> line_constraint_gradients(const Network& net, const Iterate& it, std::size_t l) {
  const auto& ln = net.lines[l];
  const double wr = it.w_r[l], wi = it.w_i[l];
  const double wf = it.w[ln.from], wt = it.w[ln.to];
  const double dtheta = it.theta[ln.from] - it.theta[ln.to];
  const double s = std::sin(dtheta), c = std::cos(dtheta);
  std::array<Vec6, 4> g;
  for (auto& v : g) v.setZero();
  g[0](kWr) = 2.0 * wr;
  g[0](kWi) = 2.0 * wi;
  g[0](kWFrom) = -wt;
  g[0](kWTo) = -wf;
  const double k = wr * c + wi * s;
  g[1](kWr) = s;
  g[1](kWi) = -c;
  g[1](kThetaFrom) = k;
  g[1](kThetaTo) = -k;
  if (ln.limited) {
    const auto jac = line_flow_jacobian(ln);
    const auto f = line_flows(ln, wf, wt, wr, wi);
    g[2] = (-2.0 * f[0] * jac.row(0) - 2.0 * f[1] * jac.row(1)).transpose();
    g[3] = (-2.0 * f[2] * jac.row(2) - 2.0 * f[3] * jac.row(3)).transpose();
  }
  return g;
}

double constraint_violation(const Network& net, const Iterate& it) {
  double h = 0.0;
  for (const auto& r : nonlinear_residuals(net, it)) {
    h += std::abs(r.r11) + std::abs(r.r12) + std::max(0.0, r.r13) + std::max(0.0, r.r14);
  }
  return h;
}

double merit(const Network& net, const Iterate& it, double mu) {
  return objective(net, it) + mu * constraint_violation(net, it);
}

double primal_infeasibility(const Network& net, const Iterate& it) {
  double m = 0.0;
  for (const auto& b : balance_residuals(net, it)) m = std::max({m, std::abs(b[0]), std::abs(b[1])});
  for (const auto& r : nonlinear_residuals(net, it)) {
    m = std::max({m, std::abs(r.r11), std::abs(r.r12), std::max(0.0, r.r13), std::max(0.0, r.r14)});
  }
  return m;
}

double dual_infeasibility(const Network& net, const Iterate& it, std::span<const std::array<double, 2>> y,
                          double active_tol) {
  std::vector<double> g_w(net.n_bus(), 0.0), g_theta(net.n_bus(), 0.0);
  for (std::size_t i = 0; i < net.n_bus(); ++i) {
    g_w[i] = -net.buses[i].g_sh * y[i][0] + net.buses[i].b_sh * y[i][1];
  }

  double worst = 0.0;
  for (std::size_t l = 0; l < net.n_line(); ++l) {
    const auto& ln = net.lines[l];
    const auto jac = line_flow_jacobian(ln);
    const auto cg = line_constraint_gradients(net, it, l);
    const auto& pi = it.pi[l];
    Vec6 grad = -y[ln.from][0] * jac.row(0).transpose() - y[ln.from][1] * jac.row(1).transpose() -
                y[ln.to][0] * jac.row(2).transpose() - y[ln.to][1] * jac.row(3).transpose();
    grad += pi[0] * cg[0] + pi[1] * cg[1];
    if (ln.limited) grad += pi[2] * cg[2] + pi[3] * cg[3];
    worst = std::max({worst, std::abs(grad(kWr)), std::abs(grad(kWi))});
    g_w[ln.from] += grad(kWFrom);
    g_w[ln.to] += grad(kWTo);
    g_theta[ln.from] += grad(kThetaFrom);
    g_theta[ln.to] += grad(kThetaTo);
  }
  for (std::size_t g = 0; g < net.n_gen(); ++g) {
    const auto& gen = net.gens[g];
    const double gp = 2.0 * gen.c2 * it.p_g[g] + gen.c1 + y[gen.bus][0];
    const double gq = y[gen.bus][1];
    worst = std::max(worst, std::abs(projected_residual(gp, it.p_g[g], gen.p_min, gen.p_max, active_tol)));
    worst = std::max(worst, std::abs(projected_residual(gq, it.q_g[g], gen.q_min, gen.q_max, active_tol)));
  }
  for (std::size_t i = 0; i < net.n_bus(); ++i) {
    const auto& b = net.buses[i];
    worst = std::max(worst, std::abs(projected_residual(g_w[i], it.w[i], sq(b.v_min), sq(b.v_max), active_tol)));
    worst = std::max(worst, std::abs(projected_residual(g_theta[i], it.theta[i], theta_min(net, i),
                                                        theta_max(net, i), active_tol)));
  }
  return worst;
}

}  // namespace acopf
