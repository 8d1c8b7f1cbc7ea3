// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "tworay/math.hpp"

using namespace tworay;

namespace {

constexpr double kPi = std::numbers::pi;

long double i0_series(long double x) {
    long double term = 1.0L, sum = 1.0L;
    for (int k = 1; k < 400; ++k) {
        term *= (x / 2) * (x / 2) / (static_cast<long double>(k) * k);
        sum += term;
        if (term < 1e-22L * sum) break;
    }
    return sum;
}

long double pochhammer(long double a, int n) {
    long double p = 1.0L;
    for (int i = 0; i < n; ++i) p *= a + i;
    return p;
}

// plain triple sum, no log-space tricks
long double phi2_brute(double b1, double b2, double b3, double c, double x1, double x2, double x3,
                       int terms) {
    long double sum = 0.0L;
    for (int i = 0; i < terms; ++i)
        for (int j = 0; j < terms; ++j)
            for (int k = 0; k < terms; ++k) {
                const int n = i + j + k;
                long double t = pochhammer(b1, i) * pochhammer(b2, j) * pochhammer(b3, k) /
                                pochhammer(c, n);
                t *= std::pow(static_cast<long double>(x1), i) / std::tgamma(static_cast<long double>(i + 1));
                t *= std::pow(static_cast<long double>(x2), j) / std::tgamma(static_cast<long double>(j + 1));
                t *= std::pow(static_cast<long double>(x3), k) / std::tgamma(static_cast<long double>(k + 1));
                if (std::isfinite(static_cast<double>(t))) sum += t;
            }
    return sum;
}

long double kummer_brute(double b, double c, double x) {
    long double term = 1.0L, sum = 1.0L;
    for (int k = 0; k < 500; ++k) {
        term *= (b + k) / (c + k) * x / (k + 1);
        sum += term;
        if (std::abs(term) < 1e-22L) break;
    }
    return sum;
}

}  // namespace

TEST(LogGamma, KnownValues) {
    EXPECT_NEAR(log_gamma(1.0), 0.0, 1e-15);
    EXPECT_NEAR(log_gamma(0.5), 0.5 * std::log(kPi), 1e-13);
    EXPECT_NEAR(log_gamma(10.0), std::log(362880.0), 1e-12);
    EXPECT_THROW(log_gamma(0.0), DomainError);
    EXPECT_THROW(log_gamma(-1.5), DomainError);
}

TEST(LogGamma, Recurrence) {
    for (double x = 0.1; x <= 100.0; x += 0.37)
        EXPECT_NEAR(log_gamma(x + 1.0), log_gamma(x) + std::log(x), 1e-10) << x;
}

TEST(BesselI0, KnownValues) {
    EXPECT_EQ(bessel_i0(0.0), 1.0);
    EXPECT_NEAR(bessel_i0(2.0), static_cast<double>(i0_series(2.0L)), 1e-12);
    EXPECT_NEAR(bessel_i0(2.0), 2.2795853023, 1e-9);
    EXPECT_THROW(bessel_i0(-1.0), DomainError);
}

TEST(BesselI0, LargeArgumentStaysFinite) {
    const double x = 700.0;
    EXPECT_TRUE(std::isfinite(bessel_i0(x)));
    const double asym = 1.0 / std::sqrt(2.0 * kPi * x) * (1.0 + 1.0 / (8.0 * x) + 9.0 / (128.0 * x * x));
    EXPECT_NEAR(bessel_i0e(x) / asym, 1.0, 1e-6);
    EXPECT_TRUE(std::isfinite(bessel_i0e(1e6)));
}

TEST(BesselI0, MatchesSeries) {
    for (double x = 0.0; x <= 20.0; x += 0.25) {
        const double ref = static_cast<double>(i0_series(x));
        EXPECT_NEAR(bessel_i0(x) / ref, 1.0, 1e-10) << x;
    }
}

TEST(BesselI1e, MatchesDerivativeOfI0) {
    for (double x : {0.3, 2.0, 9.0, 16.9, 17.1, 40.0}) {
        const double h = 1e-5 * std::max(1.0, x);
        const double d = (bessel_i0(x + h) - bessel_i0(x - h)) / (2.0 * h);
        EXPECT_NEAR(bessel_i1e(x) * std::exp(x) / d, 1.0, 1e-7) << x;
    }
}

TEST(Phi2, EmptyArguments) {
    auto r = phi2_3(0.7, 2.0, 3.5, 1.5, 0.0, 0.0, 0.0, 1e-12);
    EXPECT_TRUE(r.converged);
    EXPECT_DOUBLE_EQ(r.value, 1.0);
    r = phi2_3(0.0, 0.0, 0.0, 2.0, -1.0, -2.0, -3.0, 1e-12);
    EXPECT_DOUBLE_EQ(r.value, 1.0);
}

TEST(Phi2, MatchesTripleSum) {
    const auto r = phi2_3(1, 1, 1, 1, -0.5, -0.3, -0.2, 1e-13);
    ASSERT_TRUE(r.converged);
    EXPECT_LE(r.tail_bound, 1e-13);
    EXPECT_NEAR(r.value, static_cast<double>(phi2_brute(1, 1, 1, 1, -0.5, -0.3, -0.2, 60)), 1e-12);
}

TEST(Phi2, MethodsAgree) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        const double b1 = 1 + std::floor(4 * u(rng)), b2 = 1 + std::floor(4 * u(rng));
        const double b3 = 1 + std::floor(4 * u(rng)), c = b1 + b2 + b3 + std::floor(3 * u(rng));
        const double x1 = -4 * u(rng), x2 = -4 * u(rng), x3 = -4 * u(rng);
        const auto s = phi2_3(b1, b2, b3, c, x1, x2, x3, 1e-10, {Phi2Method::series});
        const auto q = phi2_3(b1, b2, b3, c, x1, x2, x3, 1e-10, {Phi2Method::residues});
        ASSERT_TRUE(s.converged);
        ASSERT_TRUE(q.converged);
        EXPECT_NEAR(s.value, q.value, 1e-9) << i;
    }
}

TEST(Phi2, SingleArgumentReducesToKummer) {
    for (double x : {-0.5, -2.0, -6.0}) {
        const double ref = static_cast<double>(kummer_brute(2.5, 4.0, x));
        EXPECT_NEAR(phi2_3(2.5, 1.0, 3.0, 4.0, x, 0.0, 0.0, 1e-13).value, ref, 1e-11);
        EXPECT_NEAR(phi2_3(1.0, 2.5, 3.0, 4.0, 0.0, x, 0.0, 1e-13).value, ref, 1e-11);
        EXPECT_NEAR(phi2_3(1.0, 3.0, 2.5, 4.0, 0.0, 0.0, x, 1e-13).value, ref, 1e-11);
    }
}

TEST(Phi2, ReportsNonConvergence) {
    const auto r = phi2_3(3, 2, 4, 5, -400, -300, -350, 1e-14, {Phi2Method::series, 5});
    EXPECT_FALSE(r.converged);
}

TEST(Quadrature, RuleInvariants) {
    for (std::size_t n : {1u, 2u, 7u, 48u, 128u}) {
        const auto rule = gauss_legendre(n, -0.5, 2.0);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_GT(rule.weights[i], 0.0);
            EXPECT_GT(rule.nodes[i], -0.5);
            EXPECT_LT(rule.nodes[i], 2.0);
            sum += rule.weights[i];
        }
        EXPECT_NEAR(sum, 2.5, 1e-12);
    }
}

TEST(Quadrature, ExactForPolynomials) {
    const auto rule = gauss_legendre(10);
    for (int deg = 0; deg < 20; ++deg) {
        double s = 0.0;
        for (std::size_t i = 0; i < rule.size(); ++i) s += rule.weights[i] * std::pow(rule.nodes[i], deg);
        const double exact = deg % 2 ? 0.0 : 2.0 / (deg + 1);
        EXPECT_NEAR(s, exact, 1e-14) << deg;
    }
}

TEST(Integrate, BasicIntegrals) {
    EXPECT_NEAR(integrate_adaptive([](double) { return 1.0; }, 0.0, 1.0, 1e-12), 1.0, 1e-12);
    EXPECT_NEAR(integrate_adaptive([](double x) { return std::sin(x); }, 0.0, kPi, 1e-12), 2.0, 1e-12);
    auto normal = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); };
    EXPECT_NEAR(integrate_adaptive(normal, -8.0, 8.0, 1e-12), std::erf(8.0 / std::sqrt(2.0)), 1e-10);
}

TEST(Integrate, Linear) {
    auto f = [](double x) { return std::exp(-x) * std::cos(3 * x); };
    auto g = [](double x) { return std::sqrt(x) ; };
    const double a = 2.5, b = -1.25;
    const double lhs = integrate_adaptive([&](double x) { return a * f(x) + b * g(x); }, 0.0, 4.0, 1e-11);
    const double rhs = a * integrate_adaptive(f, 0.0, 4.0, 1e-11) + b * integrate_adaptive(g, 0.0, 4.0, 1e-11);
    EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(Integrate, ReportsFailure) {
    auto spiky = [](double x) { return 1.0 / std::sqrt(std::abs(x - 0.3)); };
    try {
        integrate_adaptive(spiky, 0.0, 1.0, 1e-14, {8, 10});
        FAIL() << "expected IntegrationError";
    } catch (const IntegrationError& e) {
        EXPECT_GT(e.residual(), 0.0);
        EXPECT_TRUE(std::isfinite(e.best_estimate()));
    }
}

TEST(GammaJ0, MatchesDirectIntegral) {
    // E[J0(t sqrt(xi))] with xi ~ Gamma(m, 1/m), integrated over xi
    for (double m : {0.3, 1.0, 5.0, 19.0, 45.0}) {
        for (double t : {0.0, 0.7, 3.0, 9.0, 25.0}) {
            auto f = [&](double xi) {
                if (xi <= 0.0) return 0.0;
                const double logp = m * std::log(m) + (m - 1) * std::log(xi) - m * xi - std::lgamma(m);
                return std::exp(logp) * std::cyl_bessel_j(0.0, t * std::sqrt(xi));
            };
            const double top = 1.0 + 40.0 / std::sqrt(m) + 40.0 / m;
            double ref = 0.0;
            if (m < 1.0) {
                ref = integrate_adaptive([&](double u) {  // xi = u^(1/m) removes the singularity
                    const double xi = std::pow(u, 1.0 / m);
                    return u <= 0.0 ? 0.0 : std::exp(m * std::log(m) - m * xi - std::lgamma(m + 1.0)) *
                                                std::cyl_bessel_j(0.0, t * std::sqrt(xi));
                }, 0.0, std::pow(top, m), 1e-12);
            } else {
                ref = integrate_adaptive(f, 0.0, top, 1e-12);
            }
            EXPECT_NEAR(gamma_j0_transform(m, t), ref, 2e-9) << "m=" << m << " t=" << t;
        }
    }
}

TEST(GammaJ0, SequenceMatchesPointwise) {
    for (double m : {0.6, 3.0, 12.0, 50.0}) {
        GammaJ0Sequence seq(m);
        std::vector<double> t;
        for (double v = 0.0; v < 120.0; v += 0.37) t.push_back(v);
        std::vector<double> batch(t.size());
        gamma_j0_transform(m, t, batch);
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double p = gamma_j0_transform(m, t[i]);
            EXPECT_NEAR(seq.next(t[i]), p, 1e-12) << m << ' ' << t[i];
            EXPECT_NEAR(batch[i], p, 1e-12);
        }
    }
}
