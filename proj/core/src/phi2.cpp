// SPDX-License-Identifier: Apache-2.0
#include <quadmath.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "tworay/math.hpp"

namespace tworay {

namespace {

bool is_integer(double v) { return std::isfinite(v) && v == std::nearbyint(v); }

// Neumaier-compensated accumulator.
struct Accum {
    double sum = 0.0, comp = 0.0;
    void add(double v) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            comp += (sum - t) + v;
        else
            comp += (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

// log|(b)_k x^k / k!| and its sign for k = 0..n-1; zero entries flagged with sign 0.
struct LogSeq {
    std::vector<double> lmag;
    std::vector<int> sign;
};

LogSeq one_variable_terms(double b, double x, int n) {
    LogSeq s;
    s.lmag.assign(n, 0.0);
    s.sign.assign(n, 0);
    s.sign[0] = 1;
    for (int k = 1; k < n; ++k) {
        const double f = (b + k - 1) * x / k;
        if (s.sign[k - 1] == 0 || f == 0.0) {
            s.sign[k] = 0;
            continue;
        }
        s.lmag[k] = s.lmag[k - 1] + std::log(std::abs(f));
        s.sign[k] = f > 0 ? s.sign[k - 1] : -s.sign[k - 1];
    }
    return s;
}

SeriesEvalReport phi2_series(double b1, double b2, double b3, double c, double x1, double x2,
                             double x3, double tol, int budget) {
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const std::array<LogSeq, 3> t = {one_variable_terms(b1, x1, budget),
                                     one_variable_terms(b2, x2, budget),
                                     one_variable_terms(b3, x3, budget)};
    // log|(c)_N| and sign
    std::vector<double> lc(budget, 0.0);
    std::vector<int> sc(budget, 1);
    for (int n = 1; n < budget; ++n) {
        const double f = c + n - 1;
        lc[n] = lc[n - 1] + std::log(std::abs(f));
        sc[n] = f > 0 ? sc[n - 1] : -sc[n - 1];
    }

    SeriesEvalReport rep;
    Accum total;
    double abs_total = 0.0;
    double prev_shell = -1.0;
    int decreasing = 0;
    for (int n = 0; n < budget; ++n) {
        Accum shell;
        double shell_abs = 0.0;
        for (int i = 0; i <= n; ++i) {
            if (t[0].sign[i] == 0) continue;
            for (int j = 0; i + j <= n; ++j) {
                const int k = n - i - j;
                if (t[1].sign[j] == 0 || t[2].sign[k] == 0) continue;
                const double lm = t[0].lmag[i] + t[1].lmag[j] + t[2].lmag[k] - lc[n];
                const double v = std::exp(lm);
                shell.add(t[0].sign[i] * t[1].sign[j] * t[2].sign[k] * sc[n] * v);
                shell_abs += v;
                ++rep.terms_used;
            }
        }
        total.add(shell.value());
        abs_total += shell_abs;
        const double rounding = 4.0 * eps * abs_total;
        if (rounding > tol) {
            // cancellation already exceeds the tolerance; more terms cannot help
            rep.value = total.value();
            rep.tail_bound = rounding;
            rep.converged = false;
            return rep;
        }
        if (shell_abs == 0.0 && prev_shell == 0.0) {
            rep.value = total.value();
            rep.tail_bound = rounding;
            rep.converged = rep.tail_bound <= tol;
            return rep;
        }
        if (prev_shell >= 0.0 && shell_abs < prev_shell) {
            ++decreasing;
        } else {
            decreasing = 0;
        }
        if (decreasing >= 3 && prev_shell > 0.0) {
            const double ratio = shell_abs / prev_shell;
            if (ratio < 0.9) {
                const double tail = shell_abs * ratio / (1.0 - ratio);
                if (tail + rounding <= tol) {
                    rep.value = total.value();
                    rep.tail_bound = tail + rounding;
                    rep.converged = true;
                    return rep;
                }
            }
        }
        prev_shell = shell_abs;
    }
    rep.value = total.value();
    rep.tail_bound = std::numeric_limits<double>::infinity();
    rep.converged = false;
    return rep;
}

using quad = __float128;

quad qabs(quad v) { return v < 0 ? -v : v; }

// Integer b_i and positive integer c: the series equals Gamma(c) times the inverse Laplace
// transform at t = 1 of s^{sum b - c} prod (s - x_i)^{-b_i}, a finite sum of residues.
SeriesEvalReport phi2_residues(double b1, double b2, double b3, double c, double x1, double x2,
                               double x3, double tol) {
    struct Factor {
        double loc;
        long expo;
    };
    std::vector<Factor> factors;
    auto add = [&](double loc, long e) {
        if (e == 0) return;
        for (auto& f : factors) {
            if (f.loc == loc) {
                f.expo += e;
                return;
            }
        }
        factors.push_back({loc, e});
    };
    add(0.0, std::lround(b1 + b2 + b3 - c));
    add(x1, -std::lround(b1));
    add(x2, -std::lround(b2));
    add(x3, -std::lround(b3));

    SeriesEvalReport rep;
    quad total = 0, magnitude = 0;
    std::vector<quad> g, tay;
    for (const auto& pole : factors) {
        if (pole.expo >= 0) continue;
        const long q = -pole.expo;
        g.assign(q, 0);
        g[0] = 1;
        for (const auto& other : factors) {
            if (&other == &pole || other.expo == 0) continue;
            // Taylor coefficients of (p - a + u)^e in u
            const quad d = quad(pole.loc) - quad(other.loc);
            const quad e = quad(other.expo);
            tay.assign(q, 0);
            tay[0] = powq(d, e);
            for (long j = 1; j < q; ++j) tay[j] = tay[j - 1] * (e - quad(j - 1)) / (quad(j) * d);
            for (long i = q - 1; i >= 0; --i) {
                quad s = 0;
                for (long j = 0; j <= i; ++j) s += g[j] * tay[i - j];
                g[i] = s;
            }
            rep.terms_used += q;
        }
        const quad ep = expq(quad(pole.loc));
        quad inv_fact = 1;  // 1/(q-1-j)!
        quad res = 0, res_abs = 0;
        for (long j = q - 1; j >= 0; --j) {
            const quad term = g[j] * inv_fact;
            res += term;
            res_abs += qabs(term);
            inv_fact /= quad(q - j);
        }
        total += ep * res;
        magnitude += ep * res_abs;
    }
    quad gamma_c = 1;
    for (long k = 2; k < std::lround(c); ++k) gamma_c *= quad(k);
    total *= gamma_c;
    magnitude *= gamma_c;

    rep.value = static_cast<double>(total);
    // cancellation among residue terms is the only error source beyond final rounding
    const double rounding =
        static_cast<double>(magnitude * quad(64) * FLT128_EPSILON) +
        std::numeric_limits<double>::epsilon() * std::abs(rep.value);
    rep.tail_bound = rounding;
    rep.converged = std::isfinite(rep.value) && rounding <= tol;
    if (rep.terms_used == 0) rep.terms_used = 1;
    return rep;
}

}  // namespace

SeriesEvalReport phi2_3(double b1, double b2, double b3, double c, double x1, double x2, double x3,
                        double tol, const Phi2Options& opt) {
    if (!(tol > 0.0)) throw DomainError("phi2_3: tol must be positive");
    if (c <= 0.0 && is_integer(c)) throw DomainError("phi2_3: c must not be a non-positive integer");
    for (double v : {b1, b2, b3, c, x1, x2, x3}) {
        if (!std::isfinite(v)) throw DomainError("phi2_3: non-finite argument");
    }
    if (x1 == 0.0 && x2 == 0.0 && x3 == 0.0) return {1.0, 1, true, 0.0};

    const bool integral = is_integer(b1) && is_integer(b2) && is_integer(b3) && is_integer(c) &&
                          c >= 1.0 && c < 170.0;
    Phi2Method method = opt.method;
    if (method == Phi2Method::automatic)
        method = integral ? Phi2Method::residues : Phi2Method::series;
    if (method == Phi2Method::residues) {
        if (!integral)
            throw DomainError("phi2_3: residue evaluation needs integer b and positive integer c");
        return phi2_residues(b1, b2, b3, c, x1, x2, x3, tol);
    }
    return phi2_series(b1, b2, b3, c, x1, x2, x3, tol, std::max(2, opt.max_terms_per_index));
}

}  // namespace tworay
