#pragma once

#include <optional>
#include <variant>

#include "tslpm/hmc.hpp"

namespace tslpm {

struct ProcrustesResult {
    Eigen::Matrix2d rotation = Eigen::Matrix2d::Identity();  // O, orthogonal
    double r2 = 0.0;          // sum_i |y_i - O^T x_i|^2 at the optimum
    bool degenerate = false;  // X^T Y == 0; identity returned
};

/// Orthogonal O minimising sum_i |y_i - O^T x_i|^2 with rows x_i of X and y_i
/// of Y. No translation or scaling; reflections allowed. O = U V^T from the
/// SVD X^T Y = U S V^T (the orthogonal polar factor).
ProcrustesResult procrustes_rotation(const MatrixXd& X, const MatrixXd& Y);

/// Rows of X mapped by O: x_i -> O^T x_i, i.e. X * O.
MatrixXd apply_rotation(const MatrixXd& X, const Eigen::Matrix2d& rotation);

/// Latent positions of one flat draw as an N x 2 matrix.
MatrixXd latent_positions(const VectorXd& draw, const FlatLayout& layout);

/// Rotates/reflects the Z block of every draw onto `reference` (N x 2); all
/// other blocks are untouched. Marks the chain aligned.
Chain align_chain(const Chain& chain, const MatrixXd& reference);
/// Reference taken from draw `sample_index` of the chain itself.
Chain align_chain(const Chain& chain, std::size_t sample_index);

/// Posterior mean of Z. Throws StateError for unaligned chains, since
/// averaging arbitrarily rotated configurations is meaningless.
MatrixXd posterior_mean_latent(const Chain& chain);

}  // namespace tslpm
