#pragma once

#include <complex>
#include <vector>

#include "tslpm/types.hpp"

namespace tslpm {

struct GershgorinDisc {
    double center = 0.0;
    double radius = 0.0;
};

struct GershgorinBounds {
    double lower = 0.0;  // min_i (b_ii - r_i)
    double upper = 0.0;  // max_i (b_ii + r_i)
    std::vector<GershgorinDisc> discs;
};

struct StabilityReport {
    double l1_norm = 0.0;  // max absolute column sum
    double gershgorin_lower = 0.0;
    double gershgorin_upper = 0.0;
    std::vector<GershgorinDisc> discs;
    double spectral_radius = 0.0;
    bool satisfies_l1 = false;
    bool satisfies_spectral = false;
    bool satisfies_gershgorin_bound = false;  // -1 < lower and upper < 1
};

/// Row discs D(b_ii, sum_{j != i} |b_ij|) and their real-axis envelope.
GershgorinBounds gershgorin_bounds(const MatrixXd& B);

/// All (possibly complex) eigenvalues of a general real square matrix.
///
/// Balances, reduces to upper Hessenberg form by Householder reflections,
/// then runs Francis double-shift QR with deflation. Throws NumericError if
/// any eigenvalue fails to converge within 60 sweeps.
std::vector<std::complex<double>> eigenvalues(const MatrixXd& A);

/// max |lambda| over the spectrum of B.
double spectral_radius(const MatrixXd& B);

/// Max absolute column sum.
double l1_norm(const MatrixXd& B);

StabilityReport check_stationarity(const MatrixXd& B);

}  // namespace tslpm
