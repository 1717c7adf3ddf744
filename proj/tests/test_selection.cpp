#include <doctest.h>

#include "support.hpp"
#include "tslpm/align.hpp"
#include "tslpm/error.hpp"
#include "tslpm/model.hpp"
#include "tslpm/selection.hpp"

using namespace tslpm;

namespace {

Chain chain_from(const std::vector<ParameterSet>& draws, const ModelConfig& c) {
    Chain ch;
    ch.config = c;
    ch.layout = FlatLayout(c, draws.front().n_nodes());
    for (const auto& p : draws) {
        ch.samples.push_back(pack(p, c).values);
        ch.log_posteriors.push_back(0.0);
    }
    return ch;
}

}  // namespace

TEST_CASE("deviance is minus twice the log likelihood") {
    const ModelConfig c;
    const ParameterSet p = testing::modest_parameters(c, 3, 1);
    const CountPanel y = simulate_panel(p, c, 40, 2);
    const CovariateMatrix cov = CovariateMatrix::empty(3);
    CHECK(deviance(p, c, y, cov) == doctest::Approx(-2 * log_likelihood(p, c, y, cov)));
}

TEST_CASE("a constant chain has zero effective parameters") {
    const ModelConfig c;
    const ParameterSet p = testing::modest_parameters(c, 3, 1);
    const CountPanel y = simulate_panel(p, c, 40, 2);
    Chain ch = chain_from({p, p, p}, c);
    ch.aligned = true;
    const DicResult r = dic(ch, y, CovariateMatrix::empty(3));
    CHECK(std::abs(r.p_d) < 1e-8);
    CHECK(r.dic == doctest::Approx(deviance(p, c, y, CovariateMatrix::empty(3))));
    CHECK(std::abs(r.p_d_mean_interaction) < 1e-8);
    CHECK_FALSE(r.negative_p_d);
}

TEST_CASE("DIC matches a hand computation on two draws") {
    ModelConfig c;
    c.interaction_mode = InteractionMode::full_matrix;  // no latent positions, alignment not needed
    const ParameterSet a = testing::modest_parameters(c, 2, 1);
    ParameterSet b = a;
    b.alpha(0) += 0.1;
    b.beta(1) -= 0.05;
    const CountPanel y = simulate_panel(a, c, 50, 3);
    const CovariateMatrix cov = CovariateMatrix::empty(2);
    const DicResult r = dic(chain_from({a, b}, c), y, cov);
    ParameterSet mean = a;
    mean.alpha = (a.alpha + b.alpha) / 2;
    mean.beta = (a.beta + b.beta) / 2;
    const double d_bar = (deviance(a, c, y, cov) + deviance(b, c, y, cov)) / 2;
    const double d_hat = deviance(mean, c, y, cov);
    CHECK(r.d_bar == doctest::Approx(d_bar).epsilon(1e-12));
    CHECK(r.d_at_mean == doctest::Approx(d_hat).epsilon(1e-12));
    CHECK(r.dic == doctest::Approx(2 * d_bar - d_hat).epsilon(1e-12));
    CHECK(r.p_d > 0.0);
}

TEST_CASE("unaligned chains with latent positions are refused") {
    const ModelConfig c;
    const ParameterSet p = testing::modest_parameters(c, 3, 1);
    const CountPanel y = simulate_panel(p, c, 40, 2);
    const Chain ch = chain_from({p, p}, c);
    CHECK_THROWS_AS(dic(ch, y, CovariateMatrix::empty(3)), StateError);
    CHECK_NOTHROW(dic(align_chain(ch, p.Z), y, CovariateMatrix::empty(3)));
}
