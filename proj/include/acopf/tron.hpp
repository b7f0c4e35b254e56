#pragma once

// Trust-region Newton method for bound-constrained minimization
//   min f(x)  s.t.  l <= x <= u
// after Lin and More: a projected-gradient search finds a generalized Cauchy
// point, then truncated conjugate gradients on the free variables refine it,
// with a projected search keeping every trial point inside the box. Dense and
// meant for small problems (the line kernel has four variables).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Core>

namespace acopf {

struct TronConfig {
  int max_iter = 200;
  double gtol = 1e-8;  // on the infinity norm of the projected gradient
  double initial_radius = 1.0;
  double shrink = 0.25;
  double expand = 2.0;
  double eta0 = 1e-4;  // minimum ratio for accepting a step
  double eta1 = 0.25;
  double eta2 = 0.75;
  double cg_rtol = 0.1;
};

enum class TronStatus { Converged, IterationLimit, CallbackNonFinite };

template <int N>
struct TronResult {
  Eigen::Matrix<double, N, 1> x;
  double f = 0.0;
  double pg_norm = 0.0;
  int iterations = 0;
  TronStatus status = TronStatus::IterationLimit;
};

// Type-erased problem for callers that prefer separate callbacks.
struct BoxProblem {
  using Vec = Eigen::VectorXd;
  using Mat = Eigen::MatrixXd;
  std::function<double(const Vec&)> value;
  std::function<void(const Vec&, Vec&)> gradient;
  std::function<void(const Vec&, Mat&)> hessian;
  Vec lower, upper, x0;

  // Adapter to the single-callback form used by tron_minimize.
  double operator()(const Vec& x, Vec* g, Mat* h) const {
    if (g != nullptr) gradient(x, *g);
    if (h != nullptr) hessian(x, *h);
    return value(x);
  }
};

namespace detail {

template <class Vec>
double projected_gradient_norm(const Vec& x, const Vec& g, const Vec& l, const Vec& u) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double gi = g(i);
    if (x(i) <= l(i)) gi = std::min(gi, 0.0);
    if (x(i) >= u(i)) gi = std::max(gi, 0.0);
    m = std::max(m, std::abs(gi));
  }
  return m;
}

template <class Vec>
Vec project(const Vec& x, const Vec& l, const Vec& u) {
  return x.cwiseMax(l).cwiseMin(u);
}

template <class Vec, class Mat>
double model(const Vec& g, const Mat& h, const Vec& s) {
  return g.dot(s) + 0.5 * s.dot(h * s);
}

// Largest tau >= 0 with ||y + tau d|| = radius.
template <class Vec>
double to_boundary(const Vec& y, const Vec& d, double radius) {
  const double dd = d.squaredNorm();
  if (dd == 0.0) return 0.0;
  const double yd = y.dot(d);
  const double rhs = radius * radius - y.squaredNorm();
  if (rhs <= 0.0) return 0.0;
  return (-yd + std::sqrt(yd * yd + dd * rhs)) / dd;
}

}  // namespace detail

// `fn(x, g*, H*)` returns f(x) and fills the gradient/Hessian when non-null.
template <int N, class Fn>
TronResult<N> tron_minimize(Fn&& fn, const Eigen::Matrix<double, N, 1>& x0, const Eigen::Matrix<double, N, 1>& lower,
                            const Eigen::Matrix<double, N, 1>& upper, const TronConfig& cfg) {
  using Vec = Eigen::Matrix<double, N, 1>;
  using Mat = Eigen::Matrix<double, N, N>;
  constexpr double kSufficient = 0.01;

  const Eigen::Index n = x0.size();
  TronResult<N> res;
  Vec x = detail::project(x0, lower, upper);
  Vec g(n);
  Mat h(n, n);
  double f = fn(x, &g, &h);
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(f) || !g.allFinite() || !h.allFinite()) {
    res.x = x;
    res.f = f;
    res.status = TronStatus::CallbackNonFinite;
    return res;
  }

  double radius = cfg.initial_radius;
  double alpha_c = 1.0;
  int it = 0;
  for (; it < cfg.max_iter; ++it) {
    res.pg_norm = detail::projected_gradient_norm(x, g, lower, upper);
    if (res.pg_norm <= cfg.gtol) {
      res.status = TronStatus::Converged;
      break;
    }

    // Generalized Cauchy point along the projected steepest-descent path.
    auto cauchy_step = [&](double a) -> Vec { return detail::project<Vec>(x - a * g, lower, upper) - x; };
    auto acceptable = [&](const Vec& s) {
      return detail::model(g, h, s) <= kSufficient * g.dot(s) && s.norm() <= radius;
    };
    Vec s = cauchy_step(alpha_c);
    if (!acceptable(s)) {
      for (int k = 0; k < 60 && !acceptable(s); ++k) {
        alpha_c *= 0.1;
        s = cauchy_step(alpha_c);
      }
    } else {
      for (int k = 0; k < 30; ++k) {
        const Vec trial = cauchy_step(alpha_c * 10.0);
        if (!acceptable(trial) || (trial - s).norm() == 0.0) break;
        alpha_c *= 10.0;
        s = trial;
      }
    }

    // Truncated CG on the face of the Cauchy point, followed by projected searches.
    Vec w = s;
    double cg_tol = -1.0;
    for (Eigen::Index pass = 0; pass <= n; ++pass) {
      const Vec xc = x + w;
      Vec mask(n);
      for (Eigen::Index i = 0; i < n; ++i) mask(i) = (xc(i) > lower(i) && xc(i) < upper(i)) ? 1.0 : 0.0;
      if (mask.sum() == 0.0) break;
      const Vec model_grad = g + h * w;
      Vec r = -(mask.cwiseProduct(model_grad));
      // Forcing term shrinks with the residual so the outer iteration converges quadratically.
      if (cg_tol < 0.0) cg_tol = std::min(cfg.cg_rtol, r.norm()) * r.norm();
      if (r.norm() <= cg_tol) break;

      Vec z = Vec::Zero(n);
      Vec d = r;
      double rr = r.squaredNorm();
      bool boundary = false;
      for (Eigen::Index k = 0; k < 2 * n + 2; ++k) {
        const Vec hd = mask.cwiseProduct(h * d);
        const double dhd = d.dot(hd);
        if (dhd <= 0.0) {
          z += detail::to_boundary<Vec>(w + z, d, radius) * d;
          boundary = true;
          break;
        }
        const double a = rr / dhd;
        if ((w + z + a * d).norm() >= radius) {
          z += detail::to_boundary<Vec>(w + z, d, radius) * d;
          boundary = true;
          break;
        }
        z += a * d;
        r -= a * hd;
        const double rr_new = r.squaredNorm();
        if (std::sqrt(rr_new) <= cg_tol) break;
        d = r + (rr_new / rr) * d;
        rr = rr_new;
      }
      if (z.squaredNorm() == 0.0) break;

      const double q_w = detail::model(g, h, w);
      double beta = 1.0;
      Vec w_new = w;
      bool clipped = false;
      bool found = false;
      for (int k = 0; k < 30; ++k) {
        const Vec raw = x + w + beta * z;
        const Vec proj = detail::project(raw, lower, upper);
        const Vec cand = proj - x;
        if (detail::model(g, h, cand) <= q_w + kSufficient * model_grad.dot(cand - w)) {
          w_new = cand;
          clipped = (proj - raw).squaredNorm() > 0.0;
          found = true;
          break;
        }
        beta *= 0.5;
      }
      if (!found) break;
      w = w_new;
      if (boundary || !clipped) break;
    }

    const double pred = -detail::model(g, h, w);
    const Vec x_new = detail::project<Vec>(x + w, lower, upper);
    Vec g_new(n);
    Mat h_new(n, n);
    const double f_new = fn(x_new, &g_new, &h_new);
    const double actual = f - f_new;
    const double snorm = w.norm();

    if (!finite(f_new) || !g_new.allFinite() || !h_new.allFinite()) {
      radius = cfg.shrink * std::min(radius, snorm);
    } else {
      const double ratio = pred > 0.0 ? actual / pred : -1.0;
      if (ratio < cfg.eta1) {
        radius = cfg.shrink * std::min(radius, snorm);
      } else if (ratio > cfg.eta2 && snorm >= 0.99 * radius) {
        radius = cfg.expand * radius;
      }
      if (actual > 0.0 && ratio > cfg.eta0) {
        x = x_new;
        f = f_new;
        g = g_new;
        h = h_new;
      }
    }
    // Radius collapsed below roundoff: no further progress is possible.
    if (radius <= 1e-15 * (1.0 + x.norm()) || snorm == 0.0) {
      res.pg_norm = detail::projected_gradient_norm(x, g, lower, upper);
      res.status = res.pg_norm <= cfg.gtol ? TronStatus::Converged : TronStatus::IterationLimit;
      ++it;
      res.x = x;
      res.f = f;
      res.iterations = it;
      return res;
    }
  }
  if (it == cfg.max_iter) res.pg_norm = detail::projected_gradient_norm(x, g, lower, upper);
  res.x = x;
  res.f = f;
  res.iterations = it;
  return res;
}

inline TronResult<Eigen::Dynamic> solve_box(const BoxProblem& p, const TronConfig& cfg = {}) {
  return tron_minimize<Eigen::Dynamic>(p, p.x0, p.lower, p.upper, cfg);
}

}  // namespace acopf
