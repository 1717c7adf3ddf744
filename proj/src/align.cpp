#include "tslpm/align.hpp"

#include <Eigen/SVD>

#include "tslpm/error.hpp"

namespace tslpm {

ProcrustesResult procrustes_rotation(const MatrixXd& X, const MatrixXd& Y) {
    if (X.rows() != Y.rows() || X.cols() != kLatentDim || Y.cols() != kLatentDim)
        throw ShapeError("Procrustes inputs must both be N x 2");
    ProcrustesResult out;
    const Eigen::Matrix2d cross = X.transpose() * Y;
    if (cross.isZero(0.0)) {
        out.degenerate = true;
    } else {
        Eigen::JacobiSVD<Eigen::Matrix2d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
        out.rotation = svd.matrixU() * svd.matrixV().transpose();
    }
    out.r2 = (Y - X * out.rotation).squaredNorm();
    return out;
}

MatrixXd apply_rotation(const MatrixXd& X, const Eigen::Matrix2d& rotation) { return X * rotation; }

MatrixXd latent_positions(const VectorXd& draw, const FlatLayout& layout) {
    const auto* z = layout.find("Z");
    if (!z) throw ConfigError("parameter layout has no latent positions");
    MatrixXd Z(layout.n_nodes(), kLatentDim);
    for (Index i = 0; i < Z.rows(); ++i)
        for (Index k = 0; k < kLatentDim; ++k) Z(i, k) = draw(z->offset + i * kLatentDim + k);
    return Z;
}

Chain align_chain(const Chain& chain, const MatrixXd& reference) {
    if (chain.samples.empty()) throw ConfigError("cannot align an empty chain");
    const auto* z = chain.layout.find("Z");
    if (!z) throw ConfigError("chain has no latent positions to align");
    if (reference.rows() != chain.layout.n_nodes() || reference.cols() != kLatentDim)
        throw ShapeError("reference positions must be " + std::to_string(chain.layout.n_nodes()) + " x 2, got " +
                         std::to_string(reference.rows()) + " x " + std::to_string(reference.cols()));
    Chain out = chain;
    for (auto& draw : out.samples) {
        const MatrixXd Z = latent_positions(draw, chain.layout);
        const MatrixXd aligned = apply_rotation(Z, procrustes_rotation(Z, reference).rotation);
        for (Index i = 0; i < aligned.rows(); ++i)
            for (Index k = 0; k < kLatentDim; ++k) draw(z->offset + i * kLatentDim + k) = aligned(i, k);
    }
    out.aligned = true;
    return out;
}

Chain align_chain(const Chain& chain, std::size_t sample_index) {
    if (sample_index >= chain.samples.size())
        throw IndexError("reference sample " + std::to_string(sample_index) + " outside chain of length " +
                         std::to_string(chain.samples.size()));
    return align_chain(chain, latent_positions(chain.samples[sample_index], chain.layout));
}

MatrixXd posterior_mean_latent(const Chain& chain) {
    if (!chain.aligned)
        throw StateError("latent positions are only identified up to rotation/reflection; align the chain first");
    if (chain.samples.empty()) throw ConfigError("empty chain");
    MatrixXd mean = MatrixXd::Zero(chain.layout.n_nodes(), kLatentDim);
    for (const auto& draw : chain.samples) mean += latent_positions(draw, chain.layout);
    return mean / static_cast<double>(chain.samples.size());
}

}  // namespace tslpm
