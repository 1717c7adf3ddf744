#include <doctest.h>

#include <cmath>

#include "tslpm/lbfgs.hpp"

using namespace tslpm;

namespace {

double rosenbrock(const VectorXd& x, VectorXd& g) {
    double f = 0;
    g = VectorXd::Zero(x.size());
    for (Index i = 0; i + 1 < x.size(); ++i) {
        const double a = x(i + 1) - x(i) * x(i), b = 1 - x(i);
        f += 100 * a * a + b * b;
        g(i) += -400 * a * x(i) - 2 * b;
        g(i + 1) += 200 * a;
    }
    return f;
}

}  // namespace

TEST_CASE("minimises an ill-conditioned quadratic") {
    VectorXd d(5);
    d << 1, 10, 100, 1000, 1e4;
    const Objective f = [&](const VectorXd& x, VectorXd& g) {
        g = d.cwiseProduct(x - VectorXd::Ones(5));
        return 0.5 * (x - VectorXd::Ones(5)).cwiseProduct(g).sum();
    };
    const LbfgsResult r = minimize_lbfgs(f, VectorXd::Zero(5));
    CHECK(r.converged);
    CHECK((r.x - VectorXd::Ones(5)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("minimises the Rosenbrock function") {
    VectorXd x0(4);
    x0 << -1.2, 1, -1.2, 1;
    LbfgsOptions o;
    o.gradient_tolerance = 1e-9;
    const LbfgsResult r = minimize_lbfgs(rosenbrock, x0, o);
    CHECK(r.converged);
    CHECK((r.x - VectorXd::Ones(4)).norm() < 1e-6);
    CHECK(r.f < 1e-12);
}

TEST_CASE("accepted steps decrease f along descent directions") {
    VectorXd x0(2);
    x0 << -1.2, 1;
    const LbfgsResult r = minimize_lbfgs(rosenbrock, x0);
    REQUIRE(r.f_history.size() >= 2);
    for (std::size_t k = 1; k < r.f_history.size(); ++k) CHECK(r.f_history[k] < r.f_history[k - 1]);
    for (double dd : r.directional_derivatives) CHECK(dd < 0.0);
}

TEST_CASE("iteration cap reports non-convergence") {
    VectorXd x0(2);
    x0 << -1.2, 1;
    LbfgsOptions o;
    o.max_iters = 3;
    const LbfgsResult r = minimize_lbfgs(rosenbrock, x0, o);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 3);
    CHECK_FALSE(r.message.empty());
}

TEST_CASE("starting at the optimum converges immediately") {
    const LbfgsResult r = minimize_lbfgs(rosenbrock, VectorXd::Ones(3));
    CHECK(r.converged);
    CHECK(r.iterations == 0);
}

TEST_CASE("recovers from non-finite trial points") {
    // f = x - log(x) has its minimum at x = 1 and is undefined for x <= 0.
    const Objective f = [](const VectorXd& x, VectorXd& g) {
        g.resize(1);
        if (x(0) <= 0) return std::numeric_limits<double>::infinity();
        g(0) = 1 - 1 / x(0);
        return x(0) - std::log(x(0));
    };
    VectorXd x0(1);
    x0 << 0.05;
    const LbfgsResult r = minimize_lbfgs(f, x0);
    CHECK(r.converged);
    CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-5));
}
