#include "tslpm/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tslpm/error.hpp"

namespace tslpm {

namespace {

void require_square(const MatrixXd& B) {
    if (B.rows() != B.cols())
        throw ShapeError("expected a square matrix, got " + std::to_string(B.rows()) + "x" +
                         std::to_string(B.cols()));
    if (!B.allFinite()) throw NumericError("matrix has non-finite entries");
}

// Similarity scaling by powers of two so row and column norms are comparable.
void balance(MatrixXd& a) {
    constexpr double radix = 2.0;
    constexpr double sqrdx = radix * radix;
    const Index n = a.rows();
    bool done = false;
    while (!done) {
        done = true;
        for (Index i = 0; i < n; ++i) {
            double r = 0.0, c = 0.0;
            for (Index j = 0; j < n; ++j)
                if (j != i) {
                    c += std::abs(a(j, i));
                    r += std::abs(a(i, j));
                }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix;
            double f = 1.0;
            const double s = c + r;
            while (c < g) {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= sqrdx;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                a.row(i) /= f;
                a.col(i) *= f;
            }
        }
    }
}

// Householder reduction to upper Hessenberg form (in place).
void hessenberg(MatrixXd& a) {
    const Index n = a.rows();
    for (Index k = 0; k + 2 < n; ++k) {
        const Index m = n - k - 1;
        VectorXd v = a.col(k).tail(m);
        const double alpha = v.norm();
        if (alpha == 0.0) continue;
        v(0) += v(0) >= 0.0 ? alpha : -alpha;
        const double vnorm = v.norm();
        if (vnorm == 0.0) continue;
        v /= vnorm;
        auto lower = a.bottomRows(m);
        lower -= 2.0 * v * (v.transpose() * lower);
        auto right = a.rightCols(m);
        right -= 2.0 * (right * v) * v.transpose();
        a.col(k).tail(m - 1).setZero();
    }
}

double sign_of(double a, double b) { return b >= 0.0 ? std::abs(a) : -std::abs(a); }

// Francis double-shift QR on an upper Hessenberg matrix. Uses 1-based
// indexing internally to keep the index arithmetic readable.
std::vector<std::complex<double>> hessenberg_qr(MatrixXd& h) {
    constexpr int max_iterations = 60;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const int n = static_cast<int>(h.rows());
    auto a = [&h](int i, int j) -> double& { return h(i - 1, j - 1); };

    std::vector<double> wr(n + 1, 0.0), wi(n + 1, 0.0);
    double anorm = 0.0;
    for (int i = 1; i <= n; ++i)
        for (int j = std::max(i - 1, 1); j <= n; ++j) anorm += std::abs(a(i, j));

    int nn = n;
    double t = 0.0;
    double x = 0, y = 0, z = 0, w = 0, p = 0, q = 0, r = 0, s = 0;
    while (nn >= 1) {
        int its = 0;
        int l = 1;
        do {
            for (l = nn; l >= 2; --l) {
                s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
                if (s == 0.0) s = anorm;
                if (std::abs(a(l, l - 1)) <= eps * s) {
                    a(l, l - 1) = 0.0;
                    break;
                }
            }
            x = a(nn, nn);
            if (l == nn) {  // one root found
                wr[nn] = x + t;
                wi[nn] = 0.0;
                --nn;
            } else {
                y = a(nn - 1, nn - 1);
                w = a(nn, nn - 1) * a(nn - 1, nn);
                if (l == nn - 1) {  // two roots found
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = std::sqrt(std::abs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = p + sign_of(z, p);
                        wr[nn - 1] = wr[nn] = x + z;
                        if (z != 0.0) wr[nn] = x - w / z;
                        wi[nn - 1] = wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn -= 2;
                } else {
                    if (its == max_iterations)
                        throw NumericError("eigenvalue QR iteration did not converge after " +
                                           std::to_string(its) + " iterations");
                    if (its > 0 && its % 10 == 0) {  // exceptional shift
                        t += x;
                        for (int i = 1; i <= nn; ++i) a(i, i) -= x;
                        s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
                        y = x = 0.75 * s;
                        w = -0.4375 * s * s;
                    }
                    ++its;
                    int m = nn - 2;
                    for (; m >= l; --m) {
                        z = a(m, m);
                        r = x - z;
                        s = y - z;
                        p = (r * s - w) / a(m + 1, m) + a(m, m + 1);
                        q = a(m + 1, m + 1) - z - r - s;
                        r = a(m + 2, m + 1);
                        s = std::abs(p) + std::abs(q) + std::abs(r);
                        p /= s;
                        q /= s;
                        r /= s;
                        if (m == l) break;
                        const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
                        const double v =
                            std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) + std::abs(a(m + 1, m + 1)));
                        if (u <= eps * v) break;
                    }
                    for (int i = m + 2; i <= nn; ++i) {
                        a(i, i - 2) = 0.0;
                        if (i != m + 2) a(i, i - 3) = 0.0;
                    }
                    for (int k = m; k <= nn - 1; ++k) {
                        if (k != m) {
                            p = a(k, k - 1);
                            q = a(k + 1, k - 1);
                            r = 0.0;
                            if (k != nn - 1) r = a(k + 2, k - 1);
                            if ((x = std::abs(p) + std::abs(q) + std::abs(r)) != 0.0) {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        if ((s = sign_of(std::sqrt(p * p + q * q + r * r), p)) != 0.0) {
                            if (k == m) {
                                if (l != m) a(k, k - 1) = -a(k, k - 1);
                            } else {
                                a(k, k - 1) = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for (int j = k; j <= nn; ++j) {
                                p = a(k, j) + q * a(k + 1, j);
                                if (k != nn - 1) {
                                    p += r * a(k + 2, j);
                                    a(k + 2, j) -= p * z;
                                }
                                a(k + 1, j) -= p * y;
                                a(k, j) -= p * x;
                            }
                            const int mmin = nn < k + 3 ? nn : k + 3;
                            for (int i = l; i <= mmin; ++i) {
                                p = x * a(i, k) + y * a(i, k + 1);
                                if (k != nn - 1) {
                                    p += z * a(i, k + 2);
                                    a(i, k + 2) -= p * r;
                                }
                                a(i, k + 1) -= p * q;
                                a(i, k) -= p;
                            }
                        }
                    }
                }
            }
        } while (l < nn - 1);
    }

    std::vector<std::complex<double>> out;
    out.reserve(n);
    for (int i = 1; i <= n; ++i) out.emplace_back(wr[i], wi[i]);
    return out;
}

}  // namespace

GershgorinBounds gershgorin_bounds(const MatrixXd& B) {
    require_square(B);
    GershgorinBounds out;
    const Index n = B.rows();
    if (n == 0) return out;
    out.lower = std::numeric_limits<double>::infinity();
    out.upper = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n; ++i) {
        double radius = 0.0;
        for (Index j = 0; j < n; ++j)
            if (j != i) radius += std::abs(B(i, j));
        out.discs.push_back({B(i, i), radius});
        out.lower = std::min(out.lower, B(i, i) - radius);
        out.upper = std::max(out.upper, B(i, i) + radius);
    }
    return out;
}

std::vector<std::complex<double>> eigenvalues(const MatrixXd& A) {
    require_square(A);
    if (A.rows() == 0) return {};
    MatrixXd h = A;
    balance(h);
    hessenberg(h);
    return hessenberg_qr(h);
}

double spectral_radius(const MatrixXd& B) {
    double rho = 0.0;
    for (const auto& ev : eigenvalues(B)) rho = std::max(rho, std::abs(ev));
    return rho;
}

double l1_norm(const MatrixXd& B) {
    require_square(B);
    return B.rows() == 0 ? 0.0 : B.cwiseAbs().colwise().sum().maxCoeff();
}

StabilityReport check_stationarity(const MatrixXd& B) {
    const auto bounds = gershgorin_bounds(B);
    StabilityReport rep;
    rep.l1_norm = l1_norm(B);
    rep.gershgorin_lower = bounds.lower;
    rep.gershgorin_upper = bounds.upper;
    rep.discs = bounds.discs;
    rep.spectral_radius = spectral_radius(B);
    rep.satisfies_l1 = rep.l1_norm < 1.0;
    rep.satisfies_spectral = rep.spectral_radius < 1.0;
    rep.satisfies_gershgorin_bound = -1.0 < rep.gershgorin_lower && rep.gershgorin_upper < 1.0;
    return rep;
}

}  // namespace tslpm
