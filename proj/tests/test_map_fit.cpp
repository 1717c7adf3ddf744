#include <doctest.h>

#include "support.hpp"
#include "tslpm/map_fit.hpp"
#include "tslpm/model.hpp"

using namespace tslpm;

TEST_CASE("MAP recovers alpha and beta on a long series") {
    const ModelConfig c;
    const ParameterSet truth = draw_parameters(4, 11, c);
    const CountPanel y = simulate_panel(truth, c, 2000, 12);
    MapOptions o;
    o.seed = 1;
    const MapFit fit = fit_map(y, CovariateMatrix::empty(4), c, std::nullopt, o);
    CHECK(fit.converged);
    CHECK(std::abs(fit.params.alpha(0) - truth.alpha(0)) < 0.25);
    CHECK((fit.params.beta - truth.beta).cwiseAbs().maxCoeff() < 0.1);
    CHECK(fit.gradient_norm < 1e-2);
}

TEST_CASE("the reported optimum is a stationary point and beats the truth") {
    const ModelConfig c = testing::config_variant(12 + 4);  // covariates with shared seasonality
    const CovariateMatrix cov = testing::random_covariates(3, 5);
    const ParameterSet truth = testing::modest_parameters(c, 3, 6);
    const CountPanel y = simulate_panel(truth, c, 300, 7, cov);
    const Posterior post(c, y, cov);
    MapOptions o;
    o.seed = 2;
    const MapFit fit = fit_map(post, std::nullopt, o);
    CHECK(fit.log_posterior >= post.evaluate(pack(truth, c).values, nullptr));
    VectorXd g;
    CHECK(post.evaluate(fit.flat.values, &g) == doctest::Approx(fit.log_posterior));
    CHECK(g.cwiseAbs().maxCoeff() == doctest::Approx(fit.gradient_norm));
}

TEST_CASE("multi-start fitting is deterministic across thread counts") {
    const ModelConfig c;
    const ParameterSet truth = draw_parameters(3, 1, c);
    const CountPanel y = simulate_panel(truth, c, 200, 2);
    const Posterior post(c, y, CovariateMatrix::empty(3));
    MapOptions o;
    o.seed = 9;
    const MapFit a = fit_map(post, std::nullopt, o);
    o.jobs = 3;
    const MapFit b = fit_map(post, std::nullopt, o);
    CHECK(a.flat.values == b.flat.values);
    CHECK(a.best_start == b.best_start);
}

TEST_CASE("a supplied start is used as the first start") {
    const ModelConfig c;
    const ParameterSet truth = draw_parameters(3, 3, c);
    const CountPanel y = simulate_panel(truth, c, 200, 4);
    const Posterior post(c, y, CovariateMatrix::empty(3));
    MapOptions o;
    o.n_starts = 1;
    const MapFit fit = fit_map(post, pack(truth, c).values, o);
    CHECK(fit.best_start == 0);
    CHECK(fit.log_posterior >= post.evaluate(pack(truth, c).values, nullptr));
}

TEST_CASE("default initialisation is zero apart from small latent coordinates") {
    const ModelConfig c;
    const Posterior post = Posterior::prior_only(c, 4);
    const VectorXd x = default_initialization(post, 1);
    const auto* z = post.layout().find("Z");
    REQUIRE(z != nullptr);
    CHECK(x.head(z->offset).isZero());
    CHECK(x.segment(z->offset, z->length).cwiseAbs().maxCoeff() > 0.0);
    CHECK(x.segment(z->offset, z->length).cwiseAbs().maxCoeff() < 1.0);
}

TEST_CASE("curvature whitening inverts a concave curvature") {
    // Without latent positions the log posterior is concave, so W W^T H = I.
    const ModelConfig c = testing::config_variant(24 + 1);
    const ParameterSet truth = testing::modest_parameters(c, 3, 8);
    const Posterior post(c, simulate_panel(truth, c, 200, 9), CovariateMatrix::empty(3));
    const VectorXd x = pack(truth, c).values;
    const MatrixXd W = curvature_whitening(post, x, 0.0);
    const MatrixXd H = post.negative_hessian(x);
    CHECK((W * W.transpose() * H - MatrixXd::Identity(H.rows(), H.cols())).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("without latent positions the linearised start is the MAP") {
    // A concave Poisson fit solved by Newton, so the gradient vanishes.
    const ModelConfig c = testing::config_variant(24);
    const ParameterSet truth = testing::modest_parameters(c, 3, 10);
    const Posterior post(c, simulate_panel(truth, c, 300, 11), CovariateMatrix::empty(3));
    const VectorXd x = post.linearised_estimate(VectorXd::Zero(post.dimension()));
    VectorXd g;
    const double lp = post.evaluate(x, &g);
    MapOptions o;
    o.seed = 4;
    const MapFit fit = fit_map(post, std::nullopt, o);
    CHECK(lp == doctest::Approx(fit.log_posterior).epsilon(1e-12));
    CHECK(g.cwiseAbs().maxCoeff() < 1e-3);
}
