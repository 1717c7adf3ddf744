#pragma once

#include <cstdint>
#include <optional>

#include "tslpm/types.hpp"

namespace tslpm {

struct DrawOptions {
    double alpha_low = 0.0, alpha_high = 3.0;
    double beta_low = -1.0, beta_high = 1.0;
    double latent_variance = 0.01;  // sigma^2 of each latent coordinate
};

/// Ground-truth parameters: alpha ~ U(0,3), beta_i ~ U(-1,1),
/// z_ik ~ N(0, sigma^2). Only the default family (shared alpha, latent
/// projection, no seasonality or covariates) is generated; other blocks of
/// `config` are filled with zeros.
ParameterSet draw_parameters(Index n_nodes, std::uint64_t seed, const ModelConfig& config,
                             const DrawOptions& options = {});

struct ExpansionResult {
    ParameterSet params;
    int multiplications = 0;
    /// False when the cap was reached without ever losing stability; the
    /// input is returned unchanged in that case.
    bool reached_boundary = false;
};

/// Scales Z by `factor` repeatedly until the spectral radius of B reaches 1,
/// then returns the last stable configuration. Throws ConfigError if the
/// input is already unstable or factor <= 1.
ExpansionResult expand_latent_space(const ParameterSet& params, double factor, const ModelConfig& config,
                                    int max_multiplications = 500);

/// Draws y_0 ~ Poisson(exp(alpha + X delta)) and then y_t ~ Poisson(lambda_t)
/// for t = 1..T-1. For seasonal models every column before the seasonal lag
/// is drawn from the no-history intensity as well.
CountPanel simulate_panel(const ParameterSet& params, const ModelConfig& config, Index n_times,
                          std::uint64_t seed, const std::optional<CovariateMatrix>& covariates = std::nullopt);

struct SyntheticDataset {
    ParameterSet params;
    CountPanel panel;
    /// Draws discarded before this one, because the drawn matrix was not
    /// stationary or the simulated intensities overflowed.
    int redraws = 0;
    bool expansion_capped = false;  // expansion hit its cap (see ExpansionResult)
};

/// Full generating pipeline: draw parameters, expand the latent space by
/// `expand_factor` (skipped when <= 1 or N = 1), simulate T points. A draw
/// that is unstable or whose simulation overflows is replaced by a fresh
/// draw from the next seed stream; NumericError after `max_attempts`.
SyntheticDataset generate_dataset(Index n_nodes, Index n_times, std::uint64_t seed, const ModelConfig& config,
                                  const DrawOptions& options = {}, double expand_factor = 1.05,
                                  int max_attempts = 1000);

}  // namespace tslpm
