// SPDX-License-Identifier: Apache-2.0
//
// E[J0(t sqrt(xi))] for unit-mean Gamma(m) xi, i.e. M(m, 1, -x) with x = t^2 / (4m).
// Regions (checked against 40-digit references for m in [0.05, 50]):
//   m <= 8 : Kummer-transformed positive series below x = 40 + 12m, asymptotic expansion above
//   m > 8  : direct series below x = 1/4, Taylor marching of the ODE in t up to x = 150,
//            asymptotic expansion above
#include <array>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/sin_pi.hpp>

#include "tworay/math.hpp"

namespace tworay {

namespace {

constexpr double kSmallShape = 8.0;
constexpr double kDirectLimit = 0.25;
constexpr double kAsymLimit = 150.0;

double kummer_limit(double a) { return 40.0 + 12.0 * a; }

double kummer_series(double a, double x) {
    const double b = 1.0 - a;
    double term = 1.0, sum = 1.0;
    for (int k = 0; k < 2000; ++k) {
        term *= (b + k) * x / ((k + 1.0) * (k + 1.0));
        sum += term;
        if (term == 0.0 || (std::abs(term) < 1e-17 * std::abs(sum) && k > x)) break;
    }
    return std::exp(-x) * sum;
}

// M(a,1,-x) and dM/dz at z = -x.
void direct_series(double a, double x, double& value, double& dz) {
    double term = 1.0, s = 1.0, d = 0.0;
    for (int k = 0; k < 2000; ++k) {
        d += term * (a + k) / (k + 1.0);
        term *= (a + k) * (-x) / ((k + 1.0) * (k + 1.0));
        s += term;
        if (std::abs(term) < 1e-18 && k > 3) break;
    }
    value = s;
    dz = d;
}

double asymptotic(double a, double x) {
    auto branch = [x](double p) {
        double term = 1.0, sum = 1.0;
        for (int k = 0; k < 400; ++k) {
            const double next = term * (p + k) * (p + k) / ((k + 1.0) * x);
            if (next == 0.0) break;
            if (std::abs(next) >= std::abs(term)) break;
            term = next;
            sum += term;
            if (std::abs(term) < 1e-17 * std::abs(sum)) break;
        }
        return sum;
    };
    const double lx = std::log(x);
    const double lga = boost::math::lgamma(a);
    double out = 0.0;
    // 1/Gamma(1-a) = Gamma(a) sin(pi a) / pi, zero at integer a
    const double s = boost::math::sin_pi(a);
    if (s != 0.0) out += std::exp(lga - a * lx) * s / std::numbers::pi * branch(a);
    out += std::exp(-x + (a - 1.0) * lx - lga) * branch(1.0 - a);
    return out;
}

// State of y(t) = M(a,1,-t^2/(4a)) marched along y'' + (1/t + t/(2a)) y' + y = 0.
struct Marcher {
    double a;
    double t;
    double y;
    double dy;

    explicit Marcher(double shape) : a(shape) {
        t = std::sqrt(4.0 * a * kDirectLimit);
        double dz;
        direct_series(a, kDirectLimit, y, dz);
        dy = dz * (-t / (2.0 * a));
    }

    void advance_to(double target) {
        std::array<double, 320> c{};
        while (t < target) {
            const double h = std::min({target - t, 1.5, t / 3.0});
            const double t0 = t;
            const double q = t0 * t0 / (2.0 * a);
            c[0] = y;
            c[1] = dy;
            c[2] = -((1.0 + q) * c[1] + t0 * c[0]) / (2.0 * t0);
            double yn = c[0] + c[1] * h + c[2] * h * h;
            double dyn = c[1] + 2.0 * c[2] * h;
            double hp = h * h;  // h^(k+1) at loop entry
            for (std::size_t k = 1; k + 2 < c.size(); ++k) {
                const double kk = static_cast<double>(k);
                const double next = -((kk + 1.0) * (kk + 1.0 + q) * c[k + 1] +
                                      (t0 * kk / a + t0) * c[k] +
                                      ((kk - 1.0) / (2.0 * a) + 1.0) * c[k - 1]) /
                                    (t0 * (kk + 2.0) * (kk + 1.0));
                c[k + 2] = next;
                const double dterm = (kk + 2.0) * next * hp;
                hp *= h;
                const double vterm = next * hp;
                yn += vterm;
                dyn += dterm;
                if (k > 6 && std::abs(vterm) < 1e-19 && std::abs(dterm) < 1e-19 &&
                    std::abs(c[k + 1] * hp / h) < 1e-19)
                    break;
            }
            t = t0 + h;
            y = yn;
            dy = dyn;
        }
    }
};

void check_shape(double m) {
    if (!(m > 0.0) || !std::isfinite(m)) throw DomainError("gamma_j0_transform: m must be positive");
}

}  // namespace

double gamma_j0_transform(double m, double t) {
    check_shape(m);
    t = std::abs(t);
    const double x = t * t / (4.0 * m);
    if (x == 0.0) return 1.0;
    if (m <= kSmallShape) return x < kummer_limit(m) ? kummer_series(m, x) : asymptotic(m, x);
    if (x >= kAsymLimit) return asymptotic(m, x);
    double v, dz;
    if (x <= kDirectLimit) {
        direct_series(m, x, v, dz);
        return v;
    }
    Marcher mr(m);
    mr.advance_to(t);
    return mr.y;
}

void gamma_j0_transform(double m, std::span<const double> t, std::span<double> out) {
    check_shape(m);
    if (out.size() < t.size()) throw DomainError("gamma_j0_transform: output too short");
    if (m <= kSmallShape) {
        const double limit = kummer_limit(m);
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double x = t[i] * t[i] / (4.0 * m);
            out[i] = x == 0.0 ? 1.0 : (x < limit ? kummer_series(m, x) : asymptotic(m, x));
        }
        return;
    }
    Marcher mr(m);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double ti = std::abs(t[i]);
        const double x = ti * ti / (4.0 * m);
        if (x >= kAsymLimit) {
            out[i] = asymptotic(m, x);
        } else if (x <= kDirectLimit) {
            double dz;
            direct_series(m, x, out[i], dz);
        } else {
            if (ti < mr.t) mr = Marcher(m);
            mr.advance_to(ti);
            out[i] = mr.y;
        }
    }
}

struct GammaJ0Sequence::State {
    Marcher marcher;
};

GammaJ0Sequence::GammaJ0Sequence(double m) : m_(m) {
    check_shape(m);
    if (m > kSmallShape) state_ = new State{Marcher(m)};
}

GammaJ0Sequence::~GammaJ0Sequence() { delete state_; }

GammaJ0Sequence::GammaJ0Sequence(GammaJ0Sequence&& o) noexcept : m_(o.m_), state_(o.state_) {
    o.state_ = nullptr;
}

GammaJ0Sequence& GammaJ0Sequence::operator=(GammaJ0Sequence&& o) noexcept {
    if (this != &o) {
        delete state_;
        m_ = o.m_;
        state_ = o.state_;
        o.state_ = nullptr;
    }
    return *this;
}

double GammaJ0Sequence::next(double t) {
    t = std::abs(t);
    const double x = t * t / (4.0 * m_);
    if (x == 0.0) return 1.0;
    if (!state_) return x < kummer_limit(m_) ? kummer_series(m_, x) : asymptotic(m_, x);
    if (x >= kAsymLimit) return asymptotic(m_, x);
    if (x <= kDirectLimit) {
        double v, dz;
        direct_series(m_, x, v, dz);
        return v;
    }
    Marcher& mr = state_->marcher;
    if (t < mr.t) mr = Marcher(m_);
    mr.advance_to(t);
    return mr.y;
}

}  // namespace tworay
