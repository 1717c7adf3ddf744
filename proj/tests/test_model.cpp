#include <doctest.h>

#include <boost/math/distributions/poisson.hpp>
#include <cmath>

#include "support.hpp"
#include "tslpm/error.hpp"
#include "tslpm/model.hpp"

using namespace tslpm;

namespace {

CountPanel small_panel() {
    CountMatrix y(2, 4);
    y << 1, 0, 3, 2,
         4, 2, 0, 5;
    return CountPanel(y, {"a", "b"});
}

}  // namespace

TEST_CASE("CountPanel validates shape, counts and labels") {
    CountMatrix one(1, 1);
    one << 3;
    CHECK_THROWS_AS(CountPanel{one}, DataError);
    CountMatrix neg(1, 2);
    neg << 1, -1;
    CHECK_THROWS_AS(CountPanel{neg}, DataError);
    CountMatrix ok(2, 2);
    ok << 1, 2, 3, 4;
    CHECK_THROWS(CountPanel{ok, {"x", "x"}});
    CHECK_THROWS(CountPanel{ok, {"x"}});
    const CountPanel p(ok);
    CHECK(p.labels() == std::vector<std::string>{"node1", "node2"});
    CHECK(p.log1p_counts()(1, 1) == doctest::Approx(std::log(5.0)));
    const CountPanel s = small_panel().slice(1, 3);
    CHECK(s.n_times() == 2);
    CHECK(s(1, 1) == 0);
}

TEST_CASE("ModelConfig validation") {
    ModelConfig c;
    CHECK_NOTHROW(c.validate());
    c.eta_mode = SeasonalMode::shared;
    CHECK_THROWS_AS(c.validate(), ConfigError);  // lag missing
    c.seasonal_lag = 2;
    CHECK_NOTHROW(c.validate());
    CHECK(c.first_modeled_index() == 2);
    c.eta_mode = SeasonalMode::none;
    CHECK_THROWS_AS(c.validate(), ConfigError);  // lag without seasonal term

    ModelConfig cov;
    cov.covariate_names = {"x1", "zzz"};
    CHECK_THROWS_AS(cov.validate(testing::random_covariates(3, 1)), ConfigError);
    cov.covariate_names = {"x1", "x1"};
    CHECK_THROWS_AS(cov.validate(testing::random_covariates(3, 1)), ConfigError);
}

TEST_CASE("standardised covariates have zero mean and unit variance") {
    CovariateMatrix c;
    c.names = {"a", "const"};
    c.values.resize(4, 2);
    c.values << 1, 5, 2, 5, 3, 5, 10, 5;
    const CovariateMatrix s = c.standardized();
    CHECK(s.values.col(0).mean() == doctest::Approx(0.0).epsilon(1e-12));
    const double var = s.values.col(0).squaredNorm() / 3.0;  // sample variance
    CHECK(var == doctest::Approx(1.0));
    CHECK(s.values.col(1).isZero());
}

TEST_CASE("interaction matrix from latent positions and from a full matrix") {
    ModelConfig c;
    ParameterSet p = ParameterSet::zeros(c, 3);
    p.alpha << 0.5;
    p.beta << 0.1, 0.2, 0.3;
    p.Z << 1, 2, 3, 4, 5, 6;
    const MatrixXd B = build_interaction_matrix(p, c);
    CHECK(B(0, 0) == 0.1);
    CHECK(B(0, 1) == 1 * 3 + 2 * 4);
    CHECK(B(2, 1) == 5 * 3 + 6 * 4);
    CHECK(B(1, 2) == B(2, 1));

    ModelConfig f;
    f.interaction_mode = InteractionMode::full_matrix;
    ParameterSet q = ParameterSet::zeros(f, 2);
    q.beta << 0.4, -0.2;
    q.full_B << 9, 0.3, -0.1, 9;
    const MatrixXd Bf = build_interaction_matrix(q, f);
    CHECK(Bf(0, 0) == 0.4);
    CHECK(Bf(1, 1) == -0.2);
    CHECK(Bf(0, 1) == 0.3);
    CHECK(Bf(1, 0) == -0.1);
}

TEST_CASE("log intensity matches a hand computation") {
    ModelConfig c;
    c.alpha_mode = SharingMode::per_node;
    c.eta_mode = SeasonalMode::per_node;
    c.seasonal_lag = 2;
    c.covariate_names = {"x"};
    CovariateMatrix cov;
    cov.names = {"x"};
    cov.values.resize(2, 1);
    cov.values << -1, 1;
    ParameterSet p = ParameterSet::zeros(c, 2);
    p.alpha << 0.3, -0.2;
    p.beta << 0.5, 0.1;
    p.Z << 0.2, 0.1, -0.3, 0.4;
    p.eta << 0.25, -0.15;
    p.delta << 0.7;
    const CountPanel panel = small_panel();
    const double g = 0.2 * -0.3 + 0.1 * 0.4;
    // t = 3: prev = y[:,2] = (3, 0), seasonal = y[:,1] = (0, 2)
    const double l0 = 0.3 + 0.5 * std::log(4.0) + g * std::log(1.0) + 0.25 * std::log(1.0) + 0.7 * -1;
    const double l1 = -0.2 + g * std::log(4.0) + 0.1 * std::log(1.0) - 0.15 * std::log(3.0) + 0.7 * 1;
    const VectorXd li = log_intensity(p, c, panel, cov, 3);
    CHECK(li(0) == doctest::Approx(l0).epsilon(1e-14));
    CHECK(li(1) == doctest::Approx(l1).epsilon(1e-14));
    CHECK_THROWS_AS(log_intensity(p, c, panel, cov, 1), IndexError);
    CHECK_THROWS_AS(log_intensity(p, c, panel, cov, 5), IndexError);
    CHECK_NOTHROW(log_intensity(p, c, panel, cov, 4));  // first step past the panel
}

TEST_CASE("log likelihood equals the sum of Poisson log pmfs") {
    for (int k = 0; k < 48; k += 5) {
        const ModelConfig c = testing::config_variant(k);
        const CovariateMatrix cov = testing::random_covariates(3, 11);
        const ParameterSet p = testing::modest_parameters(c, 3, 100 + k);
        const CountPanel panel = simulate_panel(p, c, 12, 7 + k, cov);
        const MatrixXd lambda = intensity_path(p, c, panel, cov);
        double oracle = 0.0;
        const Index t0 = c.first_modeled_index();
        for (Index t = t0; t < panel.n_times(); ++t)
            for (Index i = 0; i < 3; ++i) {
                const boost::math::poisson_distribution<double> d(lambda(i, t - t0));
                oracle += std::log(boost::math::pdf(d, static_cast<double>(panel(i, t))));
            }
        CHECK(log_likelihood(p, c, panel, cov) == doctest::Approx(oracle).epsilon(1e-11));
    }
}

TEST_CASE("intensity overflow is reported with its location") {
    ModelConfig c;
    ParameterSet p = ParameterSet::zeros(c, 2);
    p.alpha << 800.0;
    p.beta << 0.0, 0.0;
    try {
        intensity_path(p, c, small_panel(), CovariateMatrix::empty(2));
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("t=1") != std::string::npos);
    }
}

TEST_CASE("ParameterSet validation catches wrong shapes") {
    ModelConfig c;
    ParameterSet p = ParameterSet::zeros(c, 3);
    CHECK_NOTHROW(p.validate(c, 3));
    CHECK_THROWS(p.validate(c, 4));
    p.beta.resize(2);
    CHECK_THROWS_AS(p.validate(c, 3), ConfigError);
    p = ParameterSet::zeros(c, 3);
    p.alpha(0) = std::nan("");
    CHECK_THROWS(p.validate(c, 3));
}

TEST_CASE("stable Poisson log pmf agrees with the direct formula") {
    for (double y : {0.0, 1.0, 3.0, 15.0, 16.0, 17.0, 250.0, 1e5}) {
        for (double ll : {-2.0, 0.0, 1.5, std::log(y + 1.0), std::log(y + 1.0) + 0.3}) {
            const double direct = y * ll - std::exp(ll) - std::lgamma(y + 1.0);
            CHECK(poisson_log_pmf(y, ll) == doctest::Approx(direct).epsilon(1e-10).scale(1.0));
        }
        const long double yl = y;
        const double oracle = y > 0 ? static_cast<double>(yl * std::log(yl) - yl - std::lgamma(yl + 1.0L)) : 0.0;
        CHECK(poisson_log_normaliser(y) == doctest::Approx(oracle).epsilon(1e-11).scale(1.0));
    }
}

TEST_CASE("log pmf keeps its precision at very large counts") {
    // At y = 3e11 the direct form cancels terms of size 8e12.
    const double y = 3e11;
    const double at_mode = poisson_log_pmf(y, std::log(y));
    CHECK(at_mode == doctest::Approx(-0.5 * std::log(2.0 * M_PI * y)).epsilon(1e-10));
    // One standard deviation away: about -1/2 relative to the mode.
    const double off = poisson_log_pmf(y, std::log(y + std::sqrt(y)));
    CHECK(off - at_mode == doctest::Approx(-0.5).epsilon(1e-4));
}
