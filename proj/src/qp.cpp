#include "acopf/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "acopf/error.hpp"

namespace acopf {

namespace {

double sq(double v) { return v * v; }

Box fold(double lower, double upper, double x, double delta) {
  return {std::max(-delta, lower - x), std::min(delta, upper - x)};
}

void fill_line(const Network& net, const Iterate& it, std::size_t l, QPData::Line& out) {
  const auto& ln = net.lines[l];
  out.elim = eliminate_dependents(net, it, l);
  out.hessian = line_hessian(net, it, l);

  out.lift.setZero();
  out.lift.row(kWr) = out.elim.a_r.transpose();
  out.lift.row(kWi) = out.elim.a_i.transpose();
  out.lift(kWFrom, 0) = 1.0;
  out.lift(kWTo, 1) = 1.0;
  out.lift(kThetaFrom, 2) = 1.0;
  out.lift(kThetaTo, 3) = 1.0;
  out.lift_offset.setZero();
  out.lift_offset(kWr) = out.elim.b_r;
  out.lift_offset(kWi) = out.elim.b_i;

  out.reduced_hessian = out.lift.transpose() * out.hessian * out.lift;
  // Symmetrize against roundoff in the triple product.
  out.reduced_hessian = 0.5 * (out.reduced_hessian + out.reduced_hessian.transpose()).eval();
  out.linear = out.lift.transpose() * (out.hessian * out.lift_offset);

  const auto jac = line_flow_jacobian(ln);
  out.flow_map = jac * out.lift;
  out.flow_offset = jac * out.lift_offset;

  out.flows = line_flows(ln, it.w[ln.from], it.w[ln.to], it.w_r[l], it.w_i[l]);
  out.gradient = line_constraint_gradients(net, it, l);
  const double dtheta = it.theta[ln.from] - it.theta[ln.to];
  const double wr = it.w_r[l], wi = it.w_i[l];
  out.residual[0] = wr * wr + wi * wi - it.w[ln.from] * it.w[ln.to];
  out.residual[1] = wr * std::sin(dtheta) - wi * std::cos(dtheta);
  out.limited = ln.limited;
  if (ln.limited) {
    const double s2 = sq(ln.s_max);
    out.residual[2] = s2 - sq(out.flows[0]) - sq(out.flows[1]);
    out.residual[3] = s2 - sq(out.flows[2]) - sq(out.flows[3]);
    for (int e = 0; e < 2; ++e) {
      // 2p dp + 2q dq <= s^2 - p^2 - q^2, with (dp, dq) affine in dbar.
      const double p = out.flows[2 * e], q = out.flows[2 * e + 1];
      out.limit_row[e] = (2.0 * p * out.flow_map.row(2 * e) + 2.0 * q * out.flow_map.row(2 * e + 1)).transpose();
      out.limit_rhs[e] =
          out.residual[2 + e] - 2.0 * p * out.flow_offset(2 * e) - 2.0 * q * out.flow_offset(2 * e + 1);
    }
  } else {
    out.residual[2] = out.residual[3] = 0.0;
    out.limit_row[0].setZero();
    out.limit_row[1].setZero();
    out.limit_rhs = {0.0, 0.0};
  }
}

void fill_buses(const Network& net, const Iterate& it, double delta, QPData& qp) {
  const auto bal = balance_residuals(net, it);
  qp.buses.resize(net.n_bus());
  for (std::size_t i = 0; i < net.n_bus(); ++i) {
    const auto& b = net.buses[i];
    auto& qb = qp.buses[i];
    qb.w = fold(sq(b.v_min), sq(b.v_max), it.w[i], delta);
    qb.theta = fold(theta_min(net, i), theta_max(net, i), it.theta[i], delta);
    qb.p_rhs = -bal[i][0];
    qb.q_rhs = -bal[i][1];
    if (qb.w.lo > qb.w.hi || qb.theta.lo > qb.theta.hi) qp.empty_boxes.push_back(i);
  }
}

}  // namespace

Elimination eliminate_dependents(const Network& net, const Iterate& it, std::size_t l) {
  const auto& ln = net.lines[l];
  const double wr = it.w_r[l], wi = it.w_i[l];
  const double wf = it.w[ln.from], wt = it.w[ln.to];
  const double dtheta = it.theta[ln.from] - it.theta[ln.to];
  const double s = std::sin(dtheta), c = std::cos(dtheta);
  const double k = wr * c + wi * s;
  // [2wr 2wi; s -c] [d_wr; d_wi] = [wt dwf + wf dwt + rhs1; -k (dthf - dtht) + rhs2]
  const double det = -2.0 * k;
  if (!(std::abs(det) >= kEliminationDetMin)) {
    throw Error(ErrorKind::SingularElimination,
                "line " + std::to_string(l) + ": |det| = " + std::to_string(std::abs(det)));
  }
  const double rhs1 = wf * wt - wr * wr - wi * wi;
  const double rhs2 = -wr * s + wi * c;
  const Vec4 r1(wt, wf, 0.0, 0.0);
  const Vec4 r2(0.0, 0.0, -k, k);
  Elimination e;
  e.a_r = (-c * r1 - 2.0 * wi * r2) / det;
  e.a_i = (-s * r1 + 2.0 * wr * r2) / det;
  e.b_r = (-c * rhs1 - 2.0 * wi * rhs2) / det;
  e.b_i = (-s * rhs1 + 2.0 * wr * rhs2) / det;
  return e;
}

QPData build_qp(const Network& net, const Iterate& it, double delta) {
  if (!(delta > 0.0)) throw Error(ErrorKind::InvalidArgument, "trust radius must be positive");
  QPData qp;
  qp.network = &net;
  qp.point = it;
  qp.delta = delta;

  qp.gens.resize(net.n_gen());
  for (std::size_t g = 0; g < net.n_gen(); ++g) {
    const auto& gen = net.gens[g];
    auto& q = qp.gens[g];
    q.grad = 2.0 * gen.c2 * it.p_g[g] + gen.c1;
    q.hess = 2.0 * gen.c2;
    q.p = fold(gen.p_min, gen.p_max, it.p_g[g], delta);
    q.q = fold(gen.q_min, gen.q_max, it.q_g[g], delta);
    if (q.p.lo > q.p.hi || q.q.lo > q.q.hi) {
      throw Error(ErrorKind::EmptyBox, "generator " + std::to_string(g) + " box is empty at radius " +
                                           std::to_string(delta));
    }
  }
  fill_buses(net, it, delta, qp);
  if (!qp.empty_boxes.empty()) {
    throw Error(ErrorKind::EmptyBox, "bus " + std::to_string(qp.empty_boxes.front()) + " box is empty at radius " +
                                         std::to_string(delta));
  }

  qp.lines.resize(net.n_line());
  for (std::size_t l = 0; l < net.n_line(); ++l) fill_line(net, it, l, qp.lines[l]);
  return qp;
}

QPData build_projection_qp(const Network& net, const Iterate& it, double weight) {
  if (!(weight > 0.0)) throw Error(ErrorKind::InvalidArgument, "projection weight must be positive");
  constexpr double kNoTrust = std::numeric_limits<double>::infinity();
  QPData qp;
  qp.network = &net;
  qp.point = it;
  qp.point.pi.assign(net.n_line(), {0.0, 0.0, 0.0, 0.0});
  qp.delta = kNoTrust;

  qp.gens.resize(net.n_gen());
  for (std::size_t g = 0; g < net.n_gen(); ++g) {
    const auto& gen = net.gens[g];
    qp.gens[g] = {0.0, weight, fold(gen.p_min, gen.p_max, it.p_g[g], kNoTrust),
                  fold(gen.q_min, gen.q_max, it.q_g[g], kNoTrust)};
  }
  fill_buses(net, it, kNoTrust, qp);
  if (!qp.empty_boxes.empty()) throw Error(ErrorKind::EmptyBox, "inconsistent bus bounds");

  qp.lines.resize(net.n_line());
  for (std::size_t l = 0; l < net.n_line(); ++l) {
    auto& ql = qp.lines[l];
    fill_line(net, qp.point, l, ql);
    // ||d||^2 over all six line-local components, w_r and w_i included through A.
    ql.reduced_hessian = weight * ql.lift.transpose() * ql.lift;
    ql.linear = weight * ql.lift.transpose() * ql.lift_offset;
    ql.limited = false;
  }
  return qp;
}

Vec6 line_step(const Network& net, const Step& d, std::size_t l) {
  const auto& ln = net.lines[l];
  Vec6 v;
  v(kWr) = d.w_r[l];
  v(kWi) = d.w_i[l];
  v(kWFrom) = d.w[ln.from];
  v(kWTo) = d.w[ln.to];
  v(kThetaFrom) = d.theta[ln.from];
  v(kThetaTo) = d.theta[ln.to];
  return v;
}

double model_reduction(const QPData& qp, const Step& d, double mu) {
  const Network& net = *qp.network;
  if (!d.shaped_for(net)) throw Error(ErrorKind::InvalidArgument, "step not shaped for network");
  double model_obj = 0.0;
  for (std::size_t g = 0; g < qp.gens.size(); ++g) {
    model_obj += qp.gens[g].grad * d.p_g[g] + 0.5 * qp.gens[g].hess * d.p_g[g] * d.p_g[g];
  }
  double m0 = 0.0, md = 0.0;
  for (std::size_t l = 0; l < qp.lines.size(); ++l) {
    const auto& ql = qp.lines[l];
    const Vec6 s = line_step(net, d, l);
    model_obj += 0.5 * s.dot(ql.hessian * s);
    for (int k = 0; k < 2; ++k) {
      m0 += std::abs(ql.residual[k]);
      md += std::abs(ql.residual[k] + ql.gradient[k].dot(s));
    }
    if (ql.limited) {
      for (int k = 2; k < 4; ++k) {
        m0 += std::max(0.0, -ql.residual[k]);
        md += std::max(0.0, -(ql.residual[k] + ql.gradient[k].dot(s)));
      }
    }
  }
  return -model_obj + mu * (m0 - md);
}

}  // namespace acopf
