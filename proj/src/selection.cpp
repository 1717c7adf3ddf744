#include "tslpm/selection.hpp"

#include <cmath>
#include <iostream>

#include "tslpm/error.hpp"

namespace tslpm {

double deviance(const ParameterSet& params, const ModelConfig& config, const CountPanel& panel,
                const CovariateMatrix& covariates) {
    return -2.0 * log_likelihood(params, config, panel, covariates);
}

DicResult dic(const Chain& chain, const CountPanel& panel, const CovariateMatrix& covariates) {
    if (chain.samples.empty()) throw ConfigError("DIC needs at least one posterior draw");
    const bool has_latent = chain.layout.find("Z") != nullptr;
    if (has_latent && !chain.aligned)
        throw StateError("DIC averages latent positions across draws; align the chain (Procrustes) first");

    const ModelConfig& config = chain.config;
    const Index n = chain.layout.n_nodes();
    double d_sum = 0.0;
    VectorXd mean = VectorXd::Zero(chain.layout.size());
    MatrixXd mean_B = MatrixXd::Zero(n, n);
    for (const auto& draw : chain.samples) {
        const ParameterSet p = unpack(draw, chain.layout, config);
        const IntensityModel model(p, config, covariates);
        d_sum += -2.0 * log_likelihood(model, config, panel);
        mean += draw;
        mean_B += model.interaction();
    }
    const double s = static_cast<double>(chain.samples.size());
    mean /= s;
    mean_B /= s;

    DicResult out;
    out.d_bar = d_sum / s;
    const ParameterSet at_mean = unpack(mean, chain.layout, config);
    out.d_at_mean = deviance(at_mean, config, panel, covariates);
    out.p_d = out.d_bar - out.d_at_mean;
    out.dic = out.d_at_mean + 2.0 * out.p_d;

    out.d_at_mean_interaction = -2.0 * log_likelihood(IntensityModel(at_mean, mean_B, config, covariates), config, panel);
    out.p_d_mean_interaction = out.d_bar - out.d_at_mean_interaction;
    out.dic_mean_interaction = out.d_at_mean_interaction + 2.0 * out.p_d_mean_interaction;

    // Round-off can make p_D of a constant chain slightly negative.
    const double eps = 1e-8 * std::max(1.0, std::abs(out.d_bar));
    if (out.p_d < -eps) {
        out.negative_p_d = true;
        std::cerr << "warning: negative effective number of parameters (p_D = " << out.p_d
                  << "); the chain may be poorly mixed\n";
    }
    return out;
}

}  // namespace tslpm
