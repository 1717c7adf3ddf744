#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tslpm/align.hpp"
#include "tslpm/error.hpp"

using namespace tslpm;

namespace {

MatrixXd random_points(Index n, Rng& rng) {
    MatrixXd X(n, 2);
    for (Index k = 0; k < X.size(); ++k) X.data()[k] = rng.normal();
    return X;
}

Eigen::Matrix2d orthogonal(double th, bool reflect) {
    Eigen::Matrix2d r;
    r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    if (reflect) r.col(1) *= -1.0;
    return r;
}

double misfit(const MatrixXd& X, const MatrixXd& Y, const Eigen::Matrix2d& O) { return (X * O - Y).squaredNorm(); }

// Brute-force oracle: dense angle grid for both orientations, then a
// golden-section refinement around the best cell.
double grid_minimum(const MatrixXd& X, const MatrixXd& Y) {
    double best = 1e300;
    for (bool reflect : {false, true}) {
        const int cells = 20000;
        int arg = 0;
        double cell_best = 1e300;
        for (int k = 0; k < cells; ++k) {
            const double v = misfit(X, Y, orthogonal(2 * M_PI * k / cells, reflect));
            if (v < cell_best) cell_best = v, arg = k;
        }
        double a = 2 * M_PI * (arg - 1) / cells, b = 2 * M_PI * (arg + 1) / cells;
        const double g = (std::sqrt(5.0) - 1) / 2;
        for (int it = 0; it < 100; ++it) {
            const double c = b - g * (b - a), d = a + g * (b - a);
            if (misfit(X, Y, orthogonal(c, reflect)) < misfit(X, Y, orthogonal(d, reflect)))
                b = d;
            else
                a = c;
        }
        best = std::min(best, misfit(X, Y, orthogonal((a + b) / 2, reflect)));
    }
    return best;
}

}  // namespace

TEST_CASE("exact rotations and reflections are recovered") {
    Rng rng(1);
    for (int k = 0; k < 50; ++k) {
        const MatrixXd X = random_points(6, rng);
        const Eigen::Matrix2d R = testing::random_orthogonal(rng);
        const MatrixXd Y = apply_rotation(X, R);
        const ProcrustesResult res = procrustes_rotation(X, Y);
        CHECK(res.r2 < 1e-20);
        CHECK((res.rotation - R).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((res.rotation.transpose() * res.rotation - Eigen::Matrix2d::Identity()).norm() < 1e-12);
    }
}

TEST_CASE("noisy problems agree with a brute-force angle search") {
    Rng rng(2);
    for (int k = 0; k < 20; ++k) {
        const MatrixXd X = random_points(8, rng);
        const MatrixXd Y = apply_rotation(X, testing::random_orthogonal(rng)) + 0.3 * random_points(8, rng);
        const ProcrustesResult res = procrustes_rotation(X, Y);
        CHECK(std::abs(res.r2 - misfit(X, Y, res.rotation)) < 1e-10);
        CHECK(std::abs(res.r2 - grid_minimum(X, Y)) < 1e-6);
    }
}

TEST_CASE("degenerate cross-product returns the identity") {
    MatrixXd X(2, 2), Y(2, 2);
    X << 1, 0, 0, 0;
    Y << 0, 0, 0, 1;
    const ProcrustesResult res = procrustes_rotation(X, Y);
    CHECK(res.degenerate);
    CHECK(res.rotation == Eigen::Matrix2d::Identity());
    CHECK_THROWS(procrustes_rotation(MatrixXd::Zero(3, 2), MatrixXd::Zero(2, 2)));
}

TEST_CASE("aligning a chain preserves every log posterior") {
    const ModelConfig c;
    const ParameterSet p = testing::modest_parameters(c, 4, 3);
    const CountPanel y = simulate_panel(p, c, 40, 4);
    const Posterior post(c, y, CovariateMatrix::empty(4));
    Chain ch;
    ch.config = c;
    ch.layout = post.layout();
    Rng rng(5);
    const VectorXd base = pack(p, c).values;
    for (int s = 0; s < 30; ++s) {
        ParameterSet q = p;
        q.Z = apply_rotation(p.Z, testing::random_orthogonal(rng)) + 0.01 * random_points(4, rng);
        q.beta.array() += 0.01 * rng.normal();
        const VectorXd v = pack(q, c).values;
        ch.samples.push_back(v);
        ch.log_posteriors.push_back(post.evaluate(v, nullptr));
    }
    CHECK_THROWS_AS(posterior_mean_latent(ch), StateError);
    const Chain al = align_chain(ch, p.Z);
    CHECK(al.aligned);
    const auto* z = ch.layout.find("Z");
    for (std::size_t s = 0; s < ch.size(); ++s) {
        const double lp = post.evaluate(al.samples[s], nullptr);
        CHECK(std::abs(lp - ch.log_posteriors[s]) < 1e-10 * std::abs(lp));
        CHECK(al.samples[s].head(z->offset) == ch.samples[s].head(z->offset));
        CHECK((latent_positions(al.samples[s], al.layout) - p.Z).norm() < 0.1);
    }
    CHECK((posterior_mean_latent(al) - p.Z).norm() < 0.05);

    const Chain self = align_chain(ch, std::size_t{3});
    CHECK((latent_positions(self.samples[3], self.layout) - latent_positions(ch.samples[3], ch.layout)).norm() <
          1e-12);
    CHECK_THROWS_AS(align_chain(ch, std::size_t{30}), IndexError);
}
