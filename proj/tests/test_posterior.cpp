#include <doctest.h>

#include <Eigen/Cholesky>
#include <cmath>

#include "support.hpp"
#include "tslpm/align.hpp"
#include "tslpm/error.hpp"
#include "tslpm/model.hpp"

using namespace tslpm;

TEST_CASE("flat layout order and names") {
    ModelConfig c = testing::config_variant(1 + 8 + 12);  // per-node alpha, per-node eta, covariates
    const FlatLayout l(c, 3);
    REQUIRE(l.blocks().size() == 5);
    CHECK(l.blocks()[0].name == "alpha");
    CHECK(l.blocks()[1].name == "beta");
    CHECK(l.blocks()[2].name == "Z");
    CHECK(l.blocks()[3].name == "eta");
    CHECK(l.blocks()[4].name == "delta");
    CHECK(l.size() == 3 + 3 + 6 + 3 + 2);
    CHECK(l.coordinate_name(6) == "Z[1,1]");
    CHECK(l.coordinate_name(7) == "Z[1,2]");
    CHECK(l.coordinate_name(8) == "Z[2,1]");
    CHECK(l.coordinate_name(3) == "beta[1]");
    CHECK(l.find("offdiag") == nullptr);

    c.interaction_mode = InteractionMode::full_matrix;
    const FlatLayout f(c, 3);
    REQUIRE(f.find("offdiag") != nullptr);
    CHECK(f.find("offdiag")->length == 6);
}

TEST_CASE("pack and unpack are inverse") {
    for (int k = 0; k < 48; ++k) {
        const ModelConfig c = testing::config_variant(k);
        const ParameterSet p = testing::modest_parameters(c, 4, k);
        const FlatParams flat = pack(p, c);
        CHECK(flat.values.size() == flat.layout.size());
        const ParameterSet q = unpack(flat, c);
        if (c.interaction_mode == InteractionMode::full_matrix) {
            // The diagonal of full_B is not a parameter.
            CHECK(build_interaction_matrix(q, c) == build_interaction_matrix(p, c));
            CHECK(q.full_B.diagonal().isZero());
        } else {
            CHECK(q == p);
        }
    }
}

TEST_CASE("log prior is the sum of N(0, 100^2) log densities") {
    VectorXd x(3);
    x << 0.0, 10.0, -250.0;
    double ref = 0.0;
    for (Index k = 0; k < 3; ++k) ref += -0.5 * std::log(2 * M_PI * 1e4) - x(k) * x(k) / 2e4;
    CHECK(log_prior(x) == doctest::Approx(ref).epsilon(1e-14));
}

TEST_CASE("posterior equals likelihood plus prior") {
    for (int k = 0; k < 48; k += 7) {
        const ModelConfig c = testing::config_variant(k);
        const CovariateMatrix cov = testing::random_covariates(4, 3);
        const ParameterSet p = testing::modest_parameters(c, 4, k);
        const CountPanel y = simulate_panel(p, c, 30, k, cov);
        const Posterior post(c, y, cov);
        const FlatParams flat = pack(p, c);
        CHECK(post.evaluate(flat.values, nullptr) ==
              doctest::Approx(log_likelihood(p, c, y, cov) + log_prior(flat.values)).epsilon(1e-12));
        CHECK(log_posterior(flat, post) == post.evaluate(flat.values, nullptr));
    }
}

TEST_CASE("analytic gradient matches central differences in every mode") {
    for (int k = 0; k < 48; ++k) {
        const ModelConfig c = testing::config_variant(k);
        const Index n = 2 + k % 4;
        const CovariateMatrix cov = testing::random_covariates(n, 50 + k);
        const ParameterSet p = testing::modest_parameters(c, n, 200 + k);
        const CountPanel y = simulate_panel(p, c, 20 + k % 30, 300 + k, cov);
        const Posterior post(c, y, cov);
        const VectorXd x = testing::jitter(pack(p, c).values, 400 + k, 0.05);
        VectorXd g;
        post.evaluate(x, &g);
        const VectorXd fd = testing::numeric_gradient(post, x);
        const double rel = (g - fd).norm() / std::max(1.0, fd.norm());
        CHECK_MESSAGE(rel < 1e-6, "config " << k << " relative error " << rel);
    }
}

TEST_CASE("prior-only target has the Gaussian gradient") {
    const Posterior prior = Posterior::prior_only(ModelConfig{}, 3);
    CHECK_FALSE(prior.has_data());
    VectorXd x = VectorXd::LinSpaced(prior.dimension(), -50, 50);
    VectorXd g;
    prior.evaluate(x, &g);
    CHECK((g + x / 1e4).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("log posterior is invariant to orthogonal transforms of Z") {
    const ModelConfig c;
    const ParameterSet p = testing::modest_parameters(c, 5, 1);
    const CountPanel y = simulate_panel(p, c, 50, 2);
    const Posterior post(c, y, CovariateMatrix::empty(5));
    const double base = log_posterior(pack(p, c), post);
    Rng rng(3);
    for (int k = 0; k < 20; ++k) {
        ParameterSet q = p;
        q.Z = apply_rotation(p.Z, testing::random_orthogonal(rng));
        CHECK(std::abs(log_posterior(pack(q, c), post) - base) < 1e-10 * std::abs(base));
    }
}

TEST_CASE("overflow yields -inf from evaluate and an error from the free function") {
    const ModelConfig c;
    ParameterSet p = testing::modest_parameters(c, 3, 1);
    const CountPanel y = simulate_panel(p, c, 20, 2);
    const Posterior post(c, y, CovariateMatrix::empty(3));
    p.alpha(0) = 1000.0;
    const FlatParams flat = pack(p, c);
    CHECK(post.evaluate(flat.values, nullptr) == -std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(log_posterior(flat, post), NumericError);
    CHECK_THROWS_AS(grad_log_posterior(flat, post), NumericError);
}

TEST_CASE("mismatched covariates are rejected") {
    ModelConfig c;
    c.covariate_names = {"x1"};
    const ParameterSet p = testing::modest_parameters(ModelConfig{}, 3, 1);
    const CountPanel y = simulate_panel(p, ModelConfig{}, 20, 2);
    CHECK_THROWS(Posterior(c, y, CovariateMatrix::empty(3)));
    CHECK_THROWS(Posterior(c, y, testing::random_covariates(4, 1)));
}

TEST_CASE("negative Hessian matches differences of the gradient") {
    for (int k : {0, 3, 13, 25, 40}) {
        const ModelConfig c = testing::config_variant(k);
        const Index n = 3 + k % 2;
        const CovariateMatrix cov = testing::random_covariates(n, 60 + k);
        const ParameterSet p = testing::modest_parameters(c, n, 70 + k);
        const CountPanel y = simulate_panel(p, c, 40, 80 + k, cov);
        const Posterior post(c, y, cov);
        const VectorXd x = testing::jitter(pack(p, c).values, 90 + k, 0.2);
        const MatrixXd H = post.negative_hessian(x);
        MatrixXd fd(x.size(), x.size());
        for (Index j = 0; j < x.size(); ++j) {
            VectorXd gp, gm, xp = x, xm = x;
            const double h = 1e-5;
            xp(j) += h;
            xm(j) -= h;
            post.evaluate(xp, &gp);
            post.evaluate(xm, &gm);
            fd.col(j) = -(gp - gm) / (2 * h);
        }
        const double rel = (H - fd).norm() / fd.norm();
        CHECK_MESSAGE(rel < 1e-6, "config " << k << " relative error " << rel);
        CHECK((H - H.transpose()).cwiseAbs().maxCoeff() == 0.0);
        // The Fisher part is positive definite.
        CHECK(Eigen::LLT<MatrixXd>(post.fisher_information(x)).info() == Eigen::Success);
    }
}

TEST_CASE("linearised estimate recovers a near-deterministic log-linear fit") {
    ModelConfig c;
    c.interaction_mode = InteractionMode::full_matrix;
    ParameterSet p = ParameterSet::zeros(c, 2);
    p.alpha << 6.0;
    p.beta << 0.2, 0.1;
    p.full_B.resize(2, 2);
    p.full_B << 0.0, 0.05, -0.05, 0.0;
    const CountPanel y = simulate_panel(p, c, 400, 3);
    const Posterior post(c, y, CovariateMatrix::empty(2));
    const VectorXd est = post.linearised_estimate(VectorXd::Zero(post.dimension()));
    const VectorXd truth = pack(p, c).values;
    CHECK((est - truth).cwiseAbs().maxCoeff() < 0.1);
}
