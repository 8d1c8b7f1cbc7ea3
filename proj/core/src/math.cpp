// SPDX-License-Identifier: Apache-2.0
#include "tworay/math.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <queue>

#include <boost/math/special_functions/gamma.hpp>

namespace tworay {

QuadratureRule gauss_legendre(std::size_t n, double lo, double hi) {
    if (n == 0) throw DomainError("gauss_legendre: n must be positive");
    if (!(lo < hi)) throw DomainError("gauss_legendre: empty interval");
    QuadratureRule q;
    q.nodes.resize(n);
    q.weights.resize(n);
    q.domain = {lo, hi};
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    const std::size_t m = (n + 1) / 2;
    for (std::size_t i = 0; i < m; ++i) {
        double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (std::size_t j = 1; j <= n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / static_cast<double>(j);
            }
            dp = static_cast<double>(n) * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) {
                // one more derivative at the converged root
                p0 = 1.0;
                p1 = 0.0;
                for (std::size_t j = 1; j <= n; ++j) {
                    const double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / static_cast<double>(j);
                }
                dp = static_cast<double>(n) * (z * p0 - p1) / (z * z - 1.0);
                break;
            }
        }
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        q.nodes[i] = mid - half * z;
        q.nodes[n - 1 - i] = mid + half * z;
        q.weights[i] = half * w;
        q.weights[n - 1 - i] = half * w;
    }
    if (n % 2 == 1) q.nodes[n / 2] = mid;
    return q;
}

const QuadratureRule& gauss_legendre_ref(std::size_t n) {
    static const std::array<QuadratureRule, 129> cache = [] {
        std::array<QuadratureRule, 129> c{};
        for (std::size_t k = 1; k < c.size(); ++k) c[k] = gauss_legendre(k);
        return c;
    }();
    if (n == 0 || n >= cache.size()) throw DomainError("gauss_legendre_ref: order out of range");
    return cache[n];
}

QuadratureRule composite_gauss_legendre(std::span<const double> breaks, std::size_t order) {
    if (breaks.size() < 2) throw DomainError("composite_gauss_legendre: need two breakpoints");
    const QuadratureRule& ref = gauss_legendre_ref(order);
    QuadratureRule q;
    q.domain = {breaks.front(), breaks.back()};
    q.nodes.reserve((breaks.size() - 1) * order);
    q.weights.reserve((breaks.size() - 1) * order);
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        const double a = breaks[p], b = breaks[p + 1];
        if (!(a < b)) throw DomainError("composite_gauss_legendre: breakpoints must increase");
        const double h = 0.5 * (b - a), c = 0.5 * (a + b);
        for (std::size_t i = 0; i < order; ++i) {
            q.nodes.push_back(c + h * ref.nodes[i]);
            q.weights.push_back(h * ref.weights[i]);
        }
    }
    return q;
}

double log_gamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("log_gamma: argument must be positive");
    return boost::math::lgamma(x);
}

namespace {

// Large-argument expansion of e^{-x} I_nu(x) for nu = 0, 1; used for x >= 17 where the
// smallest term is below 1e-14 relative.
double bessel_ie_asymptotic(int nu, double x) {
    const double mu = 4.0 * nu * nu;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 60; ++k) {
        const double odd = 2.0 * k - 1.0;
        const double next = -term * (mu - odd * odd) / (k * 8.0 * x);
        if (std::abs(next) >= std::abs(term)) break;
        term = next;
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return sum / std::sqrt(2.0 * std::numbers::pi * x);
}

constexpr double kBesselSwitch = 17.0;

}  // namespace

double bessel_i0e(double x) {
    if (!(x >= 0.0)) throw DomainError("bessel_i0: argument must be non-negative");
    if (x >= kBesselSwitch) return bessel_ie_asymptotic(0, x);
    const double q = 0.25 * x * x;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 200; ++k) {
        term *= q / (static_cast<double>(k) * k);
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum * std::exp(-x);
}

double bessel_i0(double x) {
    if (!(x >= 0.0)) throw DomainError("bessel_i0: argument must be non-negative");
    if (x < kBesselSwitch) return bessel_i0e(x) * std::exp(x);
    // may overflow to +inf beyond x ~ 713; bessel_i0e stays finite
    return bessel_ie_asymptotic(0, x) * std::exp(x);
}

double bessel_i1e(double x) {
    if (!(x >= 0.0)) throw DomainError("bessel_i1e: argument must be non-negative");
    if (x >= kBesselSwitch) return bessel_ie_asymptotic(1, x);
    const double q = 0.25 * x * x;
    double term = 0.5 * x, sum = term;
    for (int k = 1; k < 200; ++k) {
        term *= q / (static_cast<double>(k) * (k + 1));
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum * std::exp(-x);
}

namespace {

struct Segment {
    double a, b, value, err;
    double left, right;  // panel values of the two halves, reused when splitting
    bool operator<(const Segment& o) const { return err < o.err; }
};

}  // namespace

double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double tol,
                          const AdaptiveOptions& opt) {
    if (!(a < b)) throw DomainError("integrate_adaptive: require a < b");
    if (!(tol > 0.0)) throw DomainError("integrate_adaptive: tol must be positive");
    const QuadratureRule& ref = gauss_legendre_ref(opt.order);
    auto panel = [&](double lo, double hi) {
        const double h = 0.5 * (hi - lo), c = 0.5 * (hi + lo);
        double s = 0.0;
        for (std::size_t i = 0; i < ref.size(); ++i) s += ref.weights[i] * f(c + h * ref.nodes[i]);
        return h * s;
    };
    auto make = [&](double lo, double hi, double whole) {
        const double mid = 0.5 * (lo + hi);
        const double l = panel(lo, mid), r = panel(mid, hi);
        return Segment{lo, hi, l + r, std::abs(l + r - whole), l, r};
    };

    std::priority_queue<Segment> heap;
    heap.push(make(a, b, panel(a, b)));
    double total = heap.top().value, err = heap.top().err;
    std::size_t count = 1;
    while (err > tol) {
        if (count >= opt.max_intervals) {
            throw IntegrationError("integrate_adaptive: subdivision limit reached", total, err);
        }
        const Segment s = heap.top();
        heap.pop();
        const double mid = 0.5 * (s.a + s.b);
        if (!(s.a < mid && mid < s.b)) {
            throw IntegrationError("integrate_adaptive: interval too small to split", total, err);
        }
        const Segment l = make(s.a, mid, s.left), r = make(mid, s.b, s.right);
        total += l.value + r.value - s.value;
        err += l.err + r.err - s.err;
        heap.push(l);
        heap.push(r);
        ++count;
        // running sums drift; refresh them occasionally
        if (count % 64 == 0) {
            auto copy = heap;
            total = 0.0;
            err = 0.0;
            while (!copy.empty()) {
                total += copy.top().value;
                err += copy.top().err;
                copy.pop();
            }
        }
    }
    return total;
}

}  // namespace tworay
