#include <doctest.h>

#include <boost/math/distributions/poisson.hpp>
#include <map>

#include "tslpm/random.hpp"

using namespace tslpm;

TEST_CASE("streams are deterministic and distinct") {
    Rng a(42), b(42), c(43);
    for (int k = 0; k < 100; ++k) {
        const auto x = a.next();
        CHECK(x == b.next());
        CHECK(x != c.next());
    }
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(5, 9) == derive_seed(5, 9));
}

TEST_CASE("uniform and normal moments") {
    Rng r(7);
    const int n = 200000;
    double su = 0, sn = 0, sn2 = 0;
    double lo = 1, hi = 0;
    for (int k = 0; k < n; ++k) {
        const double u = r.uniform();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        su += u;
        const double z = r.normal();
        sn += z;
        sn2 += z * z;
    }
    CHECK(lo >= 0.0);
    CHECK(hi < 1.0);
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(sn / n) < 0.01);
    CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("below is within range and roughly uniform") {
    Rng r(3);
    std::vector<int> counts(7, 0);
    for (int k = 0; k < 70000; ++k) ++counts[r.below(7)];
    for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("Poisson draws follow the pmf on both sides of the algorithm switch") {
    for (double lambda : {0.0, 0.3, 4.0, 9.99, 10.0, 37.5, 400.0}) {
        Rng r(static_cast<std::uint64_t>(lambda * 100) + 1);
        const int n = 100000;
        std::map<std::int64_t, int> hist;
        double sum = 0;
        for (int k = 0; k < n; ++k) {
            const auto y = r.poisson(lambda);
            REQUIRE(y >= 0);
            ++hist[y];
            sum += static_cast<double>(y);
        }
        if (lambda == 0.0) {
            CHECK(hist.size() == 1);
            continue;
        }
        CHECK(std::abs(sum / n - lambda) < 5 * std::sqrt(lambda / n));
        // Pooled chi-square against the exact pmf, cells with expectation >= 20.
        const boost::math::poisson_distribution<double> d(lambda);
        double chi2 = 0, tail_obs = 0, tail_exp = 0;
        int cells = 0;
        for (std::int64_t y = 0; y < static_cast<std::int64_t>(lambda * 3 + 30); ++y) {
            const double e = n * boost::math::pdf(d, static_cast<double>(y));
            const double o = hist.count(y) ? hist[y] : 0;
            if (e >= 20) {
                chi2 += (o - e) * (o - e) / e;
                ++cells;
            } else {
                tail_obs += o;
                tail_exp += e;
            }
        }
        if (tail_exp >= 20) {
            chi2 += (tail_obs - tail_exp) * (tail_obs - tail_exp) / tail_exp;
            ++cells;
        }
        // Mean + 5 sd of a chi-square with `cells` degrees of freedom.
        CHECK(chi2 < cells + 5 * std::sqrt(2.0 * cells));
    }
}
