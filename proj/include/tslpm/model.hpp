#pragma once

#include "tslpm/types.hpp"

namespace tslpm {

/// Diagonal from beta, off-diagonal from latent dot products z_i . z_j
/// (or copied from full_B in full_matrix mode).
InteractionMatrix build_interaction_matrix(const ParameterSet& params, const ModelConfig& config);

/// Covariate columns picked out by config.covariate_names, in that order.
MatrixXd selected_covariates(const ModelConfig& config, const CovariateMatrix& covariates);

/// Parameters frozen into the form the intensity recursion needs.
///
/// log lambda_t = alpha + B log(y_{t-1} + 1) + eta o log(y_{t-lag} + 1) + X delta
class IntensityModel {
public:
    IntensityModel(const ParameterSet& params, const ModelConfig& config,
                   const CovariateMatrix& covariates);
    /// Uses `B` in place of the matrix implied by the parameters.
    IntensityModel(const ParameterSet& params, InteractionMatrix B, const ModelConfig& config,
                   const CovariateMatrix& covariates);

    Index n_nodes() const { return B_.rows(); }
    int seasonal_lag() const { return seasonal_lag_; }
    const InteractionMatrix& interaction() const { return B_; }

    /// `prev` = log(y_{t-1}+1); `seasonal` = log(y_{t-lag}+1), ignored for
    /// non-seasonal models.
    VectorXd log_intensity(const VectorXd& prev, const VectorXd& seasonal) const;

    /// Log intensities for all modeled columns t0..T-1 of a log1p history.
    MatrixXd log_intensity_path(const MatrixXd& log1p_history, Index t0) const;

private:
    InteractionMatrix B_;
    VectorXd base_;  // alpha_i + sum_k delta_k x_ik
    VectorXd eta_;   // per-node seasonal coefficient, empty when non-seasonal
    int seasonal_lag_ = 0;
};

/// Log intensity vector at column t. Requires max(1, seasonal_lag) <= t <= T
/// (t == T is the first step past the panel).
VectorXd log_intensity(const ParameterSet& params, const ModelConfig& config, const CountPanel& panel,
                       const CovariateMatrix& covariates, Index t);

/// N x (T - t0) matrix of intensities over the modeled range.
/// Throws NumericError naming (node, t) if exp overflows.
MatrixXd intensity_path(const ParameterSet& params, const ModelConfig& config, const CountPanel& panel,
                        const CovariateMatrix& covariates);

/// Full Poisson log-likelihood including the log-factorial terms.
double log_likelihood(const ParameterSet& params, const ModelConfig& config, const CountPanel& panel,
                      const CovariateMatrix& covariates);

/// Same, with an externally supplied interaction matrix.
double log_likelihood(const IntensityModel& model, const ModelConfig& config, const CountPanel& panel);

/// sum_i,t [y log(lambda) - lambda - log(y!)] given log intensities for
/// columns t0..T-1.
double poisson_log_likelihood(const CountPanel& panel, Index t0, const MatrixXd& log_lambda);

/// y log y - y - log(y!), the lambda-free part of the Poisson log-pmf
/// (0 at y = 0). Uses the Stirling series for large y.
double poisson_log_normaliser(double y);

/// log p(y | lambda = exp(log_lambda)), written as a deviance term plus
/// poisson_log_normaliser(y) so that large counts do not cancel.
double poisson_log_pmf(double y, double log_lambda);

}  // namespace tslpm
