#include "dense_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/LU>
#include <Eigen/QR>

#include "acopf/tron.hpp"

namespace acopf::oracle {

namespace {

double fold_lo(double lower, double x, double delta) { return std::max(-delta, lower - x); }
double fold_hi(double upper, double x, double delta) { return std::min(delta, upper - x); }

// Solve the equality KKT system on the active set guessed from an ALM iterate.
DenseSolution polish(const DenseQP& q, const DenseSolution& from, double act_tol) {
  const Eigen::Index n = q.n();
  std::vector<Eigen::Index> free, act;
  Eigen::VectorXd x = from.x;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (x(i) - q.lo(i) <= act_tol) {
      x(i) = q.lo(i);
    } else if (q.hi(i) - x(i) <= act_tol) {
      x(i) = q.hi(i);
    } else {
      free.push_back(i);
    }
  }
  for (Eigen::Index k = 0; k < q.G.rows(); ++k) {
    if (from.z(k) > 0.0 || q.h(k) - q.G.row(k).dot(from.x) <= act_tol) act.push_back(k);
  }
  const auto nf = static_cast<Eigen::Index>(free.size()), na = static_cast<Eigen::Index>(act.size());
  const Eigen::Index me = q.E.rows(), dim = nf + me + na;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd xb = x;
  for (const auto i : free) xb(i) = 0.0;
  const Eigen::VectorXd hxb = q.H * xb;
  for (Eigen::Index a = 0; a < nf; ++a) {
    for (Eigen::Index b = 0; b < nf; ++b) K(a, b) = q.H(free[a], free[b]);
    for (Eigen::Index r = 0; r < me; ++r) K(a, nf + r) = K(nf + r, a) = q.E(r, free[a]);
    for (Eigen::Index k = 0; k < na; ++k) K(a, nf + me + k) = K(nf + me + k, a) = q.G(act[k], free[a]);
    rhs(a) = -q.g(free[a]) - hxb(free[a]);
  }
  if (me > 0) rhs.segment(nf, me) = q.e - q.E * xb;
  for (Eigen::Index k = 0; k < na; ++k) rhs(nf + me + k) = q.h(act[k]) - q.G.row(act[k]).dot(xb);
  const Eigen::VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);

  DenseSolution out = from;
  out.x = x;
  for (Eigen::Index a = 0; a < nf; ++a) out.x(free[a]) = sol(a);
  out.y = sol.segment(nf, me);
  out.z.setZero();
  for (Eigen::Index k = 0; k < na; ++k) out.z(act[k]) = sol(nf + me + k);
  out.kkt = kkt_residual(q, out.x, out.y, out.z);
  return out;
}

}  // namespace

DenseQP assemble_dense(const QPData& qp, const Network& net) {
  const Iterate& x = qp.point;
  const double delta = qp.delta;
  const auto ng = net.n_gen(), nb = net.n_bus(), nl = net.n_line();
  const Eigen::Index n = static_cast<Eigen::Index>(2 * ng + 2 * nb);
  auto ip = [](std::size_t g) { return static_cast<Eigen::Index>(2 * g); };
  auto iq = [](std::size_t g) { return static_cast<Eigen::Index>(2 * g + 1); };
  auto iw = [&](std::size_t i) { return static_cast<Eigen::Index>(2 * ng + 2 * i); };
  auto ith = [&](std::size_t i) { return static_cast<Eigen::Index>(2 * ng + 2 * i + 1); };

  DenseQP q;
  q.n_gen = ng;
  q.n_bus = nb;
  q.H = Eigen::MatrixXd::Zero(n, n);
  q.g = Eigen::VectorXd::Zero(n);
  q.lo.resize(n);
  q.hi.resize(n);

  for (std::size_t g = 0; g < ng; ++g) {
    const auto& gen = net.gens[g];
    q.H(ip(g), ip(g)) = 2.0 * gen.c2;
    q.g(ip(g)) = 2.0 * gen.c2 * x.p_g[g] + gen.c1;
    q.lo(ip(g)) = fold_lo(gen.p_min, x.p_g[g], delta);
    q.hi(ip(g)) = fold_hi(gen.p_max, x.p_g[g], delta);
    q.lo(iq(g)) = fold_lo(gen.q_min, x.q_g[g], delta);
    q.hi(iq(g)) = fold_hi(gen.q_max, x.q_g[g], delta);
  }
  for (std::size_t i = 0; i < nb; ++i) {
    const auto& b = net.buses[i];
    q.lo(iw(i)) = fold_lo(b.v_min * b.v_min, x.w[i], delta);
    q.hi(iw(i)) = fold_hi(b.v_max * b.v_max, x.w[i], delta);
    if (i == net.ref_bus) {
      q.lo(ith(i)) = q.hi(ith(i)) = 0.0;
    } else {
      q.lo(ith(i)) = fold_lo(-2.0 * M_PI, x.theta[i], delta);
      q.hi(ith(i)) = fold_hi(2.0 * M_PI, x.theta[i], delta);
    }
  }

  // Balance rows: linear in the variables, so x + d is balanced iff E d = e.
  const auto bal = balance_residuals(net, x);
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * nb), n);
  Eigen::VectorXd e(2 * nb);
  for (std::size_t i = 0; i < nb; ++i) {
    const auto r = static_cast<Eigen::Index>(2 * i);
    e(r) = -bal[i][0];
    e(r + 1) = -bal[i][1];
    for (const auto g : net.bus_gens[i]) {
      E(r, ip(g)) += 1.0;
      E(r + 1, iq(g)) += 1.0;
    }
    E(r, iw(i)) -= net.buses[i].g_sh;
    E(r + 1, iw(i)) += net.buses[i].b_sh;
  }

  const auto res = nonlinear_residuals(net, x);
  std::vector<Eigen::RowVectorXd> g_rows;
  std::vector<double> h_vals;
  q.recon.resize(nl);
  q.recon_offset.resize(nl);
  for (std::size_t l = 0; l < nl; ++l) {
    const auto& ln = net.lines[l];
    // s = (d_wr, d_wi, d_wf, d_wt, d_thf, d_tht) = P x + t
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(6, n);
    P(2, iw(ln.from)) = 1.0;
    P(3, iw(ln.to)) = 1.0;
    P(4, ith(ln.from)) = 1.0;
    P(5, ith(ln.to)) = 1.0;
    Eigen::VectorXd t = Eigen::VectorXd::Zero(6);

    // c_k + grad c_k' s = 0 for k = 11, 12, solved for (d_wr, d_wi).
    const auto grads = line_constraint_gradients(net, x, l);
    Eigen::Matrix2d M;
    Eigen::Matrix<double, 2, 4> N;
    for (int k = 0; k < 2; ++k) {
      M(k, 0) = grads[k](0);
      M(k, 1) = grads[k](1);
      for (int j = 0; j < 4; ++j) N(k, j) = grads[k](2 + j);
    }
    const Eigen::Vector2d c(res[l].r11, res[l].r12);
    const Eigen::Matrix2d Minv = M.fullPivLu().inverse();
    const Eigen::MatrixXd rest = P.bottomRows(4);
    P.topRows(2) = -Minv * N * rest;
    t.head(2) = -Minv * c;
    q.recon[l] = P.topRows(2);
    q.recon_offset[l] = t.head(2);

    const Mat6 Hl = line_hessian(net, x, l);
    q.H += P.transpose() * Hl * P;
    q.g += P.transpose() * (Hl * t);

    const auto J = line_flow_jacobian(ln);
    const Eigen::MatrixXd JP = J * P;
    const Eigen::Vector4d Jt = J * t;
    const auto rf = static_cast<Eigen::Index>(2 * ln.from), rt = static_cast<Eigen::Index>(2 * ln.to);
    E.row(rf) -= JP.row(0);
    E.row(rf + 1) -= JP.row(1);
    E.row(rt) -= JP.row(2);
    E.row(rt + 1) -= JP.row(3);
    e(rf) += Jt(0);
    e(rf + 1) += Jt(1);
    e(rt) += Jt(2);
    e(rt + 1) += Jt(3);

    if (ln.limited) {
      // c_13 + grad c_13' s >= 0, where c_13 = s^2 - p^2 - q^2 = -r_13
      const double r[2] = {res[l].r13, res[l].r14};
      for (int k = 0; k < 2; ++k) {
        g_rows.push_back(-(grads[2 + k].transpose() * P));
        h_vals.push_back(-r[k] + grads[2 + k].dot(t));
      }
    }
  }
  q.H = 0.5 * (q.H + q.H.transpose()).eval();

  // Drop balance rows with no coefficients (isolated, unloaded buses).
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < E.rows(); ++r) {
    if (E.row(r).cwiseAbs().maxCoeff() > 0.0) keep.push_back(r);
  }
  q.E.resize(static_cast<Eigen::Index>(keep.size()), n);
  q.e.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    q.E.row(static_cast<Eigen::Index>(k)) = E.row(keep[k]);
    q.e(static_cast<Eigen::Index>(k)) = e(keep[k]);
  }
  q.G.resize(static_cast<Eigen::Index>(g_rows.size()), n);
  q.h.resize(static_cast<Eigen::Index>(h_vals.size()));
  for (std::size_t k = 0; k < g_rows.size(); ++k) {
    q.G.row(static_cast<Eigen::Index>(k)) = g_rows[k];
    q.h(static_cast<Eigen::Index>(k)) = h_vals[k];
  }
  return q;
}

Step to_step(const DenseQP& q, const Network& net, const Eigen::VectorXd& x) {
  Step d = Iterate::zeros(net);
  for (std::size_t g = 0; g < q.n_gen; ++g) {
    d.p_g[g] = x(static_cast<Eigen::Index>(2 * g));
    d.q_g[g] = x(static_cast<Eigen::Index>(2 * g + 1));
  }
  for (std::size_t i = 0; i < q.n_bus; ++i) {
    d.w[i] = x(static_cast<Eigen::Index>(2 * q.n_gen + 2 * i));
    d.theta[i] = x(static_cast<Eigen::Index>(2 * q.n_gen + 2 * i + 1));
  }
  for (std::size_t l = 0; l < q.recon.size(); ++l) {
    const Eigen::Vector2d v = q.recon[l] * x + q.recon_offset[l];
    d.w_r[l] = v(0);
    d.w_i[l] = v(1);
  }
  return d;
}

Eigen::VectorXd from_step(const DenseQP& q, const Step& d) {
  Eigen::VectorXd x(q.n());
  for (std::size_t g = 0; g < q.n_gen; ++g) {
    x(static_cast<Eigen::Index>(2 * g)) = d.p_g[g];
    x(static_cast<Eigen::Index>(2 * g + 1)) = d.q_g[g];
  }
  for (std::size_t i = 0; i < q.n_bus; ++i) {
    x(static_cast<Eigen::Index>(2 * q.n_gen + 2 * i)) = d.w[i];
    x(static_cast<Eigen::Index>(2 * q.n_gen + 2 * i + 1)) = d.theta[i];
  }
  return x;
}

double objective(const DenseQP& q, const Eigen::VectorXd& x) { return 0.5 * x.dot(q.H * x) + q.g.dot(x); }

double kkt_residual(const DenseQP& q, const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& z) {
  Eigen::VectorXd grad = q.H * x + q.g;
  if (q.E.rows() > 0) grad += q.E.transpose() * y;
  if (q.G.rows() > 0) grad += q.G.transpose() * z;
  double r = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double gi = grad(i);
    if (x(i) <= q.lo(i)) gi = std::min(gi, 0.0);
    if (x(i) >= q.hi(i)) gi = std::max(gi, 0.0);
    r = std::max(r, std::abs(gi));
    r = std::max({r, q.lo(i) - x(i), x(i) - q.hi(i)});
  }
  if (q.E.rows() > 0) r = std::max(r, (q.E * x - q.e).cwiseAbs().maxCoeff());
  if (q.G.rows() > 0) {
    const Eigen::VectorXd slack = q.h - q.G * x;
    for (Eigen::Index k = 0; k < slack.size(); ++k) {
      r = std::max({r, -slack(k), -z(k), std::abs(z(k) * slack(k))});
    }
  }
  return r;
}

DenseSolution solve_dense(const DenseQP& q, double tol, int max_outer) {
  const Eigen::Index n = q.n();
  DenseSolution s;
  s.x = Eigen::VectorXd::Zero(n).cwiseMax(q.lo).cwiseMin(q.hi);
  s.y = Eigen::VectorXd::Zero(q.E.rows());
  s.z = Eigen::VectorXd::Zero(q.G.rows());

  const Eigen::MatrixXd EtE = q.E.transpose() * q.E;
  double beta = 10.0 * std::max(1.0, q.H.diagonal().cwiseAbs().maxCoeff());
  double prev_violation = std::numeric_limits<double>::infinity();

  TronConfig cfg;
  cfg.max_iter = 20000;
  cfg.gtol = 0.05 * tol;
  cfg.cg_rtol = 1e-3;

  for (int outer = 1; outer <= max_outer; ++outer) {
    s.outer = outer;
    auto fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
      const Eigen::VectorXd hx = q.H * x;
      const Eigen::VectorXd re = q.E * x - q.e;
      double f = 0.5 * x.dot(hx) + q.g.dot(x) + s.y.dot(re) + 0.5 * beta * re.squaredNorm();
      Eigen::VectorXd m(q.G.rows());
      for (Eigen::Index k = 0; k < q.G.rows(); ++k) {
        m(k) = std::max(0.0, s.z(k) + beta * (q.G.row(k).dot(x) - q.h(k)));
        f += (m(k) * m(k) - s.z(k) * s.z(k)) / (2.0 * beta);
      }
      if (grad != nullptr) {
        *grad = hx + q.g + q.E.transpose() * (s.y + beta * re);
        if (q.G.rows() > 0) *grad += q.G.transpose() * m;
      }
      if (hess != nullptr) {
        *hess = q.H + beta * EtE;
        for (Eigen::Index k = 0; k < q.G.rows(); ++k) {
          if (m(k) > 0.0) *hess += beta * q.G.row(k).transpose() * q.G.row(k);
        }
      }
      return f;
    };
    const auto r = tron_minimize<Eigen::Dynamic>(fn, s.x, q.lo, q.hi, cfg);
    s.x = r.x;

    const Eigen::VectorXd re = q.E * s.x - q.e;
    double violation = re.size() > 0 ? re.cwiseAbs().maxCoeff() : 0.0;
    s.y += beta * re;
    for (Eigen::Index k = 0; k < q.G.rows(); ++k) {
      const double hk = q.G.row(k).dot(s.x) - q.h(k);
      violation = std::max(violation, std::abs(std::max(hk, -s.z(k) / beta)));
      s.z(k) = std::max(0.0, s.z(k) + beta * hk);
    }
    s.kkt = kkt_residual(q, s.x, s.y, s.z);
    if (s.kkt > tol && violation <= 1e-6) {
      for (const double act_tol : {1e-9, 1e-7, 1e-5}) {
        auto p = polish(q, s, act_tol);
        if (p.kkt < s.kkt) {
          s.x = p.x;
          s.y = p.y;
          s.z = p.z;
          s.kkt = p.kkt;
        }
      }
    }
    if (s.kkt <= tol) {
      s.converged = true;
      break;
    }
    // Past the feasibility target a larger beta only hurts the inner conditioning.
    if (violation > tol && violation > 0.25 * prev_violation) beta = std::min(beta * 10.0, 1e9);
    prev_violation = violation;
  }
  return s;
}

}  // namespace acopf::oracle
