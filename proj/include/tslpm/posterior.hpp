#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tslpm/model.hpp"

namespace tslpm {

/// Layout of a flat parameter vector: alpha, beta, then Z row-major (or the
/// off-diagonal entries of full_B row-major), eta, delta.
class FlatLayout {
public:
    struct Block {
        std::string name;
        Index offset = 0;
        Index length = 0;
        bool operator==(const Block&) const = default;
    };

    FlatLayout() = default;
    FlatLayout(const ModelConfig& config, Index n_nodes);

    Index size() const { return size_; }
    Index n_nodes() const { return n_nodes_; }
    const std::vector<Block>& blocks() const { return blocks_; }
    /// nullptr when the block is absent (or empty).
    const Block* find(std::string_view name) const;
    /// Human-readable coordinate name, e.g. "beta[2]" or "Z[3,1]".
    std::string coordinate_name(Index k) const;

    bool operator==(const FlatLayout&) const = default;

private:
    std::vector<Block> blocks_;
    Index size_ = 0;
    Index n_nodes_ = 0;
};

struct FlatParams {
    VectorXd values;
    FlatLayout layout;
};

FlatParams pack(const ParameterSet& params, const ModelConfig& config);
ParameterSet unpack(const FlatParams& flat, const ModelConfig& config);
ParameterSet unpack(const VectorXd& values, const FlatLayout& layout, const ModelConfig& config);

/// Standard deviation of the independent normal prior on every coordinate.
inline constexpr double kPriorSd = 100.0;

/// sum_k log N(theta_k; 0, 100^2)
double log_prior(const VectorXd& theta);
double log_prior(const ParameterSet& params, const ModelConfig& config);

/// Differentiable log density over R^P.
class LogDensity {
public:
    virtual ~LogDensity() = default;
    virtual Index dimension() const = 0;
    /// Returns log density at x and, when `grad` is non-null, writes its
    /// gradient. Returns -infinity (gradient unspecified) where the density
    /// cannot be evaluated, e.g. on intensity overflow. Never throws.
    virtual double evaluate(const VectorXd& x, VectorXd* grad) const = 0;
};

/// Unnormalised log posterior of a model configuration on one dataset.
class Posterior final : public LogDensity {
public:
    Posterior(ModelConfig config, const CountPanel& panel, const CovariateMatrix& covariates);
    /// Posterior with no observations, i.e. the prior itself.
    static Posterior prior_only(ModelConfig config, Index n_nodes);

    Index dimension() const override { return layout_.size(); }
    double evaluate(const VectorXd& x, VectorXd* grad) const override;

    const FlatLayout& layout() const { return layout_; }
    const ModelConfig& config() const { return config_; }
    bool has_data() const { return has_data_; }

    /// Expected information sum_t lambda J J^T plus the prior precision,
    /// with J the Jacobian of log intensities. Positive definite.
    MatrixXd fisher_information(const VectorXd& x) const;

    /// Minus the Hessian of the log posterior: the Fisher information plus
    /// the residual-weighted curvature of the bilinear latent terms.
    MatrixXd negative_hessian(const VectorXd& x) const;

    /// Least-squares fit of log(y + 1/2) on the linear part of the log
    /// intensity, with Z from a rank-2 fit to a free off-diagonal block.
    /// x seeds that factorisation. A cheap starting point.
    VectorXd linearised_estimate(const VectorXd& x) const;

    /// Log-likelihood part only (no prior). -infinity on overflow.
    double log_likelihood(const VectorXd& x) const;

private:
    Posterior(ModelConfig config, Index n_nodes);
    VectorXd node_values(const VectorXd& x, const FlatLayout::Block* blk) const;
    MatrixXd log_intensity(const VectorXd& x, MatrixXd& Z) const;
    /// d log lambda_ic / d theta
    void jacobian_row(Index i, Index c, const MatrixXd& Z, VectorXd& J) const;

    ModelConfig config_;
    FlatLayout layout_;
    bool has_data_ = false;
    MatrixXd y_;         // counts over the modeled range, N x M
    MatrixXd prev_;      // log(y_{t-1}+1), N x M
    MatrixXd seasonal_;  // log(y_{t-lag}+1), N x M (empty if no seasonality)
    MatrixXd X_;         // selected covariates, N x K'
    MatrixXd log_y_;     // log y where y > 0, else 0
    double normaliser_sum_ = 0.0;  // sum of poisson_log_normaliser(y)
};

/// log_likelihood + log_prior; throws NumericError if not finite.
double log_posterior(const FlatParams& flat, const Posterior& target);
VectorXd grad_log_posterior(const FlatParams& flat, const Posterior& target);

}  // namespace tslpm
