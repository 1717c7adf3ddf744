#include "tslpm/synthesis.hpp"

#include <atomic>
#include <cmath>
#include <iostream>

#include "tslpm/error.hpp"
#include "tslpm/model.hpp"
#include "tslpm/random.hpp"
#include "tslpm/stability.hpp"

namespace tslpm {

ParameterSet draw_parameters(Index n_nodes, std::uint64_t seed, const ModelConfig& config,
                             const DrawOptions& options) {
    if (n_nodes < 1) throw ConfigError("n_nodes must be >= 1");
    config.validate();
    Rng rng(seed);
    ParameterSet p = ParameterSet::zeros(config, n_nodes);
    for (Index i = 0; i < p.alpha.size(); ++i) p.alpha(i) = rng.uniform(options.alpha_low, options.alpha_high);
    for (Index i = 0; i < p.beta.size(); ++i) p.beta(i) = rng.uniform(options.beta_low, options.beta_high);
    const double sd = std::sqrt(options.latent_variance);
    if (config.interaction_mode == InteractionMode::latent_projection) {
        for (Index i = 0; i < n_nodes; ++i)
            for (Index k = 0; k < kLatentDim; ++k) p.Z(i, k) = rng.normal(0.0, sd);
    } else {
        for (Index i = 0; i < n_nodes; ++i)
            for (Index j = 0; j < n_nodes; ++j)
                if (i != j) p.full_B(i, j) = rng.normal(0.0, sd);
    }
    return p;
}

ExpansionResult expand_latent_space(const ParameterSet& params, double factor, const ModelConfig& config,
                                    int max_multiplications) {
    if (!(factor > 1.0)) throw ConfigError("expansion factor must be > 1");
    const auto stable = [&](const ParameterSet& p) {
        return spectral_radius(build_interaction_matrix(p, config)) < 1.0;
    };
    if (!stable(params)) throw ConfigError("initial parameters are not stationary (spectral radius >= 1)");

    ExpansionResult out{params, 0, false};
    ParameterSet trial = params;
    for (int m = 1; m <= max_multiplications; ++m) {
        if (config.interaction_mode == InteractionMode::latent_projection)
            trial.Z *= factor;
        else
            trial.full_B *= factor;
        if (!stable(trial)) {
            out.reached_boundary = true;
            return out;
        }
        out.params = trial;
        out.multiplications = m;
    }
    return {params, 0, false};
}

CountPanel simulate_panel(const ParameterSet& params, const ModelConfig& config, Index n_times, std::uint64_t seed,
                          const std::optional<CovariateMatrix>& covariates) {
    if (n_times < 2) throw ConfigError("simulation needs T >= 2");
    const Index n = params.n_nodes();
    const CovariateMatrix cov = covariates ? *covariates : CovariateMatrix::empty(n);
    const IntensityModel model(params, config, cov);
    static std::atomic<bool> warned{false};  // once per process
    if (spectral_radius(model.interaction()) >= 1.0 && !warned.exchange(true))
        std::cerr << "warning: simulating from a non-stationary interaction matrix\n";

    Rng rng(seed);
    CountMatrix y(n, n_times);
    MatrixXd h(n, n_times);  // log(y + 1)
    const Index t0 = config.first_modeled_index();
    const VectorXd zero = VectorXd::Zero(n);
    const VectorXd seed_rate = model.log_intensity(zero, zero).array().exp();
    for (Index t = 0; t < n_times; ++t) {
        VectorXd lam = t < t0 ? seed_rate
                              : VectorXd(model.log_intensity(h.col(t - 1), config.seasonal_lag > 0
                                                                                ? VectorXd(h.col(t - config.seasonal_lag))
                                                                                : zero)
                                             .array()
                                             .exp());
        for (Index i = 0; i < n; ++i) {
            if (!std::isfinite(lam(i)) || lam(i) > 1e15)
                throw NumericError("intensity overflow while simulating node " + std::to_string(i) + " at t=" +
                                   std::to_string(t));
            y(i, t) = rng.poisson(lam(i));
            h(i, t) = std::log1p(static_cast<double>(y(i, t)));
        }
    }
    return CountPanel(std::move(y));
}

SyntheticDataset generate_dataset(Index n_nodes, Index n_times, std::uint64_t seed, const ModelConfig& config,
                                  const DrawOptions& options, double expand_factor, int max_attempts) {
    SyntheticDataset out;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        const auto stream = static_cast<std::uint64_t>(attempt);
        ParameterSet p = draw_parameters(n_nodes, derive_seed(seed, 2 * stream), config, options);
        if (spectral_radius(build_interaction_matrix(p, config)) >= 1.0) continue;
        bool capped = false;
        if (expand_factor > 1.0 && n_nodes > 1 && config.interaction_mode == InteractionMode::latent_projection) {
            ExpansionResult ex = expand_latent_space(p, expand_factor, config);
            capped = !ex.reached_boundary;
            p = std::move(ex.params);
        }
        try {
            out.panel = simulate_panel(p, config, n_times, derive_seed(seed, 2 * stream + 1));
        } catch (const NumericError&) {
            continue;
        }
        out.params = std::move(p);
        out.redraws = attempt;
        out.expansion_capped = capped;
        return out;
    }
    throw NumericError("no usable dataset after " + std::to_string(max_attempts) + " parameter draws");
}

}  // namespace tslpm
