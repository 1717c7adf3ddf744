#pragma once

#include <cstdint>
#include <vector>

#include "tslpm/posterior.hpp"
#include "tslpm/random.hpp"
#include "tslpm/synthesis.hpp"

namespace tslpm::testing {

// Every combination of sharing, seasonality, covariates and interaction
// mode, cycled by `k`.
inline ModelConfig config_variant(int k) {
    ModelConfig c;
    c.alpha_mode = (k & 1) ? SharingMode::per_node : SharingMode::shared;
    c.beta_mode = (k & 2) ? SharingMode::shared : SharingMode::per_node;
    switch ((k >> 2) % 3) {
        case 0: break;
        case 1: c.eta_mode = SeasonalMode::shared; c.seasonal_lag = 3; break;
        default: c.eta_mode = SeasonalMode::per_node; c.seasonal_lag = 4; break;
    }
    if ((k / 12) % 2 == 1) c.covariate_names = {"x2", "x1"};
    if ((k / 24) % 2 == 1) c.interaction_mode = InteractionMode::full_matrix;
    return c;
}

inline CovariateMatrix random_covariates(Index n, std::uint64_t seed) {
    Rng rng(seed);
    CovariateMatrix cov;
    cov.names = {"x1", "x2", "x3"};
    cov.values.resize(n, 3);
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < 3; ++k) cov.values(i, k) = rng.normal();
    return cov.standardized();
}

// Moderate parameters so simulated panels stay in a well-behaved range.
inline ParameterSet modest_parameters(const ModelConfig& config, Index n, std::uint64_t seed) {
    Rng rng(seed);
    ParameterSet p = ParameterSet::zeros(config, n);
    for (Index k = 0; k < p.alpha.size(); ++k) p.alpha(k) = rng.uniform(0.5, 1.5);
    for (Index k = 0; k < p.beta.size(); ++k) p.beta(k) = rng.uniform(-0.3, 0.3);
    for (Index k = 0; k < p.Z.size(); ++k) p.Z.data()[k] = rng.normal(0.0, 0.2);
    for (Index k = 0; k < p.eta.size(); ++k) p.eta(k) = rng.uniform(-0.2, 0.2);
    for (Index k = 0; k < p.delta.size(); ++k) p.delta(k) = rng.uniform(-0.3, 0.3);
    for (Index k = 0; k < p.full_B.size(); ++k) p.full_B.data()[k] = rng.uniform(-0.05, 0.05);
    return p;
}

// Random evaluation point near `p` so gradients are not taken only at truth.
inline VectorXd jitter(const VectorXd& x, std::uint64_t seed, double sd) {
    Rng rng(seed);
    VectorXd out = x;
    for (Index k = 0; k < out.size(); ++k) out(k) += rng.normal(0.0, sd);
    return out;
}

// Central differences with step h.
inline VectorXd numeric_gradient(const LogDensity& f, const VectorXd& x, double h = 1e-5) {
    VectorXd g(x.size());
    for (Index k = 0; k < x.size(); ++k) {
        VectorXd a = x, b = x;
        a(k) += h;
        b(k) -= h;
        g(k) = (f.evaluate(a, nullptr) - f.evaluate(b, nullptr)) / (2 * h);
    }
    return g;
}

inline Eigen::Matrix2d random_orthogonal(Rng& rng) {
    const double th = rng.uniform(0.0, 6.283185307179586);
    Eigen::Matrix2d r;
    r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    if (rng.uniform() < 0.5) r.col(0) *= -1.0;
    return r;
}

}  // namespace tslpm::testing
