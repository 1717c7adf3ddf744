#pragma once

#include "tslpm/hmc.hpp"

namespace tslpm {

/// D(theta) = -2 log p(y | theta), log-factorial terms included.
double deviance(const ParameterSet& params, const ModelConfig& config, const CountPanel& panel,
                const CovariateMatrix& covariates);

struct DicResult {
    double dic = 0.0;        // 2 * d_bar - d_at_mean
    double p_d = 0.0;        // d_bar - d_at_mean
    double d_bar = 0.0;      // posterior mean deviance
    double d_at_mean = 0.0;  // deviance at the coordinate-wise posterior mean
    /// Same quantities with the plug-in point built from the posterior mean
    /// interaction matrix instead of averaged latent positions.
    double dic_mean_interaction = 0.0;
    double p_d_mean_interaction = 0.0;
    double d_at_mean_interaction = 0.0;
    bool negative_p_d = false;  // flagged, not fatal: usually poor mixing
};

/// Deviance information criterion. Requires an aligned chain when the
/// model has latent positions (the plug-in point averages Z).
DicResult dic(const Chain& chain, const CountPanel& panel, const CovariateMatrix& covariates);

}  // namespace tslpm
