#include <random>

#include <doctest.h>

#include <Eigen/Dense>

#include "acopf/sqp.hpp"
#include "oracle/dense_qp.hpp"
#include "test_util.hpp"

using namespace acopf;

namespace {

oracle::DenseQP box_only(int n) {
  oracle::DenseQP q;
  q.H = Eigen::MatrixXd::Identity(n, n);
  q.g = Eigen::VectorXd::Zero(n);
  q.E.resize(0, n);
  q.e.resize(0);
  q.G.resize(0, n);
  q.h.resize(0);
  q.lo = Eigen::VectorXd::Constant(n, -1.0);
  q.hi = Eigen::VectorXd::Constant(n, 1.0);
  return q;
}

}  // namespace

TEST_SUITE("oracle") {
  TEST_CASE("case9 layout") {
    const auto net = load_network(testutil::data("case9.m"));
    const auto qp = build_qp(net, initial_iterate(net), 1.0);
    const auto dq = oracle::assemble_dense(qp, net);
    CHECK(dq.n() == 24);
    CHECK(dq.recon.size() == net.n_line());
    // Round trip through the step layout.
    const Eigen::VectorXd z = Eigen::VectorXd::Random(dq.n());
    CHECK((oracle::from_step(dq, oracle::to_step(dq, net, z)) - z).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("zero QP") {
    const auto q = box_only(3);
    const auto s = oracle::solve_dense(q);
    CHECK(s.converged);
    CHECK(s.x.cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("bound-active one-dimensional QP") {
    auto q = box_only(1);
    q.g(0) = -1.0;
    q.lo(0) = 0.0;
    q.hi(0) = 0.3;
    const auto s = oracle::solve_dense(q);
    CHECK(s.converged);
    CHECK(s.x(0) == doctest::Approx(0.3).epsilon(1e-12));
  }

  TEST_CASE("equality-constrained convex QP against a direct KKT solve") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 10; ++t) {
      const int n = 6, m = 2;
      auto q = box_only(n);
      const Eigen::MatrixXd b = Eigen::MatrixXd::Random(n, n);
      q.H = b * b.transpose() + Eigen::MatrixXd::Identity(n, n);
      q.g = Eigen::VectorXd::Random(n);
      q.E = Eigen::MatrixXd::Random(m, n);
      q.e = Eigen::VectorXd::Random(m) * 0.1;
      q.lo.setConstant(-1e3);
      q.hi.setConstant(1e3);
      Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n + m, n + m);
      k.topLeftCorner(n, n) = q.H;
      k.topRightCorner(n, m) = q.E.transpose();
      k.bottomLeftCorner(m, n) = q.E;
      Eigen::VectorXd rhs(n + m);
      rhs << -q.g, q.e;
      const Eigen::VectorXd direct = k.fullPivLu().solve(rhs);
      const auto s = oracle::solve_dense(q);
      CHECK(s.converged);
      CHECK((s.x - direct.head(n)).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK(oracle::kkt_residual(q, s.x, s.y, s.z) <= 1e-9);
    }
  }

  TEST_CASE("inequality rows") {
    // min 0.5|x|^2 - (1,1)'x  s.t.  x0 + x1 <= 1  ->  x = (0.5, 0.5), z = 0.5.
    auto q = box_only(2);
    q.g << -1.0, -1.0;
    q.G.resize(1, 2);
    q.G << 1.0, 1.0;
    q.h.resize(1);
    q.h << 1.0;
    const auto s = oracle::solve_dense(q);
    CHECK(s.converged);
    CHECK(s.x(0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(s.x(1) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(s.z(0) == doctest::Approx(0.5).epsilon(1e-6));
  }

  TEST_CASE("case9 first QP solves to a small KKT residual") {
    const auto net = load_network(testutil::data("case9.m"));
    SqpConfig cfg;
    cfg.admm.rho = 1e3;
    const auto x = linear_feasibility(net, initial_iterate(net), cfg);
    const auto dq = oracle::assemble_dense(build_qp(net, x, 1.0), net);
    const auto s = oracle::solve_dense(dq);
    CHECK(s.converged);
    CHECK(s.kkt <= 1e-9);
  }
}
