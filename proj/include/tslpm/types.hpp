#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tslpm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Dimension of the latent space. Fixed; the model is only defined for 2.
inline constexpr Index kLatentDim = 2;

enum class SharingMode { shared, per_node };
enum class SeasonalMode { none, shared, per_node };
enum class InteractionMode { latent_projection, full_matrix };

std::string_view to_string(SharingMode m);
std::string_view to_string(SeasonalMode m);
std::string_view to_string(InteractionMode m);
SharingMode sharing_mode_from_string(std::string_view s);
SeasonalMode seasonal_mode_from_string(std::string_view s);
InteractionMode interaction_mode_from_string(std::string_view s);

/// Observed multivariate count series, nodes in rows and time in columns.
class CountPanel {
public:
    CountPanel() = default;
    /// Validates: N >= 1, T >= 2, nonnegative counts, unique labels.
    /// Empty `labels` generates "node1".."nodeN".
    CountPanel(CountMatrix counts, std::vector<std::string> labels = {});

    Index n_nodes() const { return counts_.rows(); }
    Index n_times() const { return counts_.cols(); }
    const CountMatrix& counts() const { return counts_; }
    const std::vector<std::string>& labels() const { return labels_; }
    std::int64_t operator()(Index node, Index t) const { return counts_(node, t); }

    /// Columns [begin, end) as a new panel (labels kept).
    CountPanel slice(Index begin, Index end) const;
    /// Matrix of log(y + 1).
    MatrixXd log1p_counts() const;

private:
    CountMatrix counts_;
    std::vector<std::string> labels_;
};

/// Node-level covariates, one row per node.
struct CovariateMatrix {
    MatrixXd values;  // N x K
    std::vector<std::string> names;

    static CovariateMatrix empty(Index n_nodes) { return {MatrixXd(n_nodes, 0), {}}; }
    Index n_covariates() const { return values.cols(); }
    void validate() const;
    /// Index of a named column; throws ConfigError when absent.
    Index column(std::string_view name) const;
    /// Returns a copy with every column centred and scaled to unit variance
    /// across nodes. Constant columns become all-zero.
    CovariateMatrix standardized() const;
};

/// Structural switches selecting one member of the model family.
struct ModelConfig {
    SharingMode alpha_mode = SharingMode::shared;
    SharingMode beta_mode = SharingMode::per_node;
    SeasonalMode eta_mode = SeasonalMode::none;
    int seasonal_lag = 0;
    std::vector<std::string> covariate_names;
    InteractionMode interaction_mode = InteractionMode::latent_projection;

    /// Throws ConfigError when seasonal_lag and eta_mode disagree.
    void validate() const;
    /// Additionally checks the covariate selection against what is available.
    void validate(const CovariateMatrix& available) const;
    /// First time index that enters the likelihood. Earlier columns only
    /// act as regressors.
    Index first_modeled_index() const { return seasonal_lag > 0 ? seasonal_lag : 1; }

    bool operator==(const ModelConfig&) const = default;
};

/// Model parameters. Vector lengths follow the sharing modes of the
/// accompanying ModelConfig: shared blocks have length 1, per-node blocks
/// length N, absent blocks length 0.
struct ParameterSet {
    VectorXd alpha;
    VectorXd beta;
    MatrixXd Z;       // N x 2 in latent_projection mode, 0 x 0 otherwise
    VectorXd eta;
    VectorXd delta;   // one entry per selected covariate
    MatrixXd full_B;  // N x N off-diagonal interactions in full_matrix mode; diagonal ignored

    Index n_nodes() const;
    /// Node-specific value of a possibly shared block.
    static double at(const VectorXd& block, Index i) { return block.size() == 1 ? block(0) : block(i); }
    /// Throws ConfigError/ShapeError/NumericError when shapes or values are invalid.
    void validate(const ModelConfig& config, Index n_nodes) const;

    /// All-zero parameters of the right shape.
    static ParameterSet zeros(const ModelConfig& config, Index n_nodes);

    bool operator==(const ParameterSet& o) const;
};

/// N x N autoregressive matrix; diagonal holds the self effects.
using InteractionMatrix = MatrixXd;

}  // namespace tslpm
