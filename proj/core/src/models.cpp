// SPDX-License-Identifier: Apache-2.0
#include "tworay/models.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <string>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace tworay {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_whole(double v) { return v == std::nearbyint(v); }

double j0(double x) {
    using namespace boost::math::policies;
    return boost::math::cyl_bessel_j(0, x, make_policy(promote_double<false>()));
}

double gauss(double x, double h) {
    return std::exp(-0.5 * x * x / (h * h)) / (h * std::sqrt(2.0 * kPi));
}

constexpr double kSmoothReach = 9.0;  // Gaussian smoothing support in bandwidths

}  // namespace

double wrap_angle(double a) {
    if (a >= -kPi && a <= kPi) return a;
    double w = std::remainder(a, 2.0 * kPi);
    if (w < -kPi) w += 2.0 * kPi;
    if (w > kPi) w -= 2.0 * kPi;
    return w;
}

void IftrParams::validate() const {
    if (!(k_factor >= 0.0) || !std::isfinite(k_factor)) throw DomainError("K must be >= 0");
    if (!(delta >= 0.0 && delta <= 1.0)) throw DomainError("Delta must lie in [0, 1]");
    if (!(m1 > 0.0) || !std::isfinite(m1)) throw DomainError("m1 must be > 0");
    if (!(m2 > 0.0) || !std::isfinite(m2)) throw DomainError("m2 must be > 0");
    if (!(omega > 0.0) || !std::isfinite(omega)) throw DomainError("Omega must be > 0");
}

void GtrvParams::validate() const {
    if (!(k_factor >= 0.0) || !std::isfinite(k_factor)) throw DomainError("K must be >= 0");
    if (!(delta >= 0.0 && delta <= 1.0)) throw DomainError("Delta must lie in [0, 1]");
    if (!(vm_kappa >= 0.0) || !std::isfinite(vm_kappa)) throw DomainError("kappa must be >= 0");
    if (!(vm_phi >= -kPi && vm_phi <= kPi)) throw DomainError("phi must lie in [-pi, pi]");
    if (!(omega > 0.0) || !std::isfinite(omega)) throw DomainError("Omega must be > 0");
}

void AmplitudePdf::validate() const {
    if (grid.size() != density.size()) throw DomainError("pdf grid and density differ in length");
    if (grid.size() < 2) throw DomainError("pdf needs at least two points");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 0.0) || !std::isfinite(grid[i])) throw DomainError("pdf grid must be >= 0");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw DomainError("pdf grid must increase");
        if (!(density[i] >= 0.0) || !std::isfinite(density[i]))
            throw DomainError("pdf density must be finite and >= 0");
    }
}

PhysicalRays iftr_to_physical(const IftrParams& p) {
    p.validate();
    const double specular = p.omega * p.k_factor / (1.0 + p.k_factor);
    const double s = std::sqrt((1.0 - p.delta) * (1.0 + p.delta));
    PhysicalRays rays;
    rays.v1 = std::sqrt(0.5 * specular * (1.0 + s));
    // 1 - s written without cancellation
    rays.v2 = std::sqrt(0.5 * specular * p.delta * p.delta / (1.0 + s));
    rays.sigma2 = 0.5 * p.omega / (1.0 + p.k_factor);
    return rays;
}

IftrParams physical_to_iftr(const PhysicalRays& rays, double m1, double m2) {
    if (!(rays.v1 >= 0.0 && rays.v2 >= 0.0 && rays.sigma2 >= 0.0))
        throw DomainError("ray amplitudes and sigma2 must be non-negative");
    if (rays.sigma2 == 0.0) throw DomainError("sigma2 = 0 leaves K undefined");
    const double specular = rays.v1 * rays.v1 + rays.v2 * rays.v2;
    IftrParams p;
    p.k_factor = specular / (2.0 * rays.sigma2);
    p.delta = specular > 0.0 ? 2.0 * rays.v1 * rays.v2 / specular : 0.0;
    p.delta = std::min(p.delta, 1.0);
    p.m1 = m1;
    p.m2 = m2;
    p.omega = specular + 2.0 * rays.sigma2;
    p.validate();
    return p;
}

double rician_kernel(double nu, double sigma2, double r) {
    if (r <= 0.0) return 0.0;
    nu = std::abs(nu);
    const double d = r - nu;
    return r / sigma2 * std::exp(-0.5 * d * d / sigma2) * bessel_i0e(r * nu / sigma2);
}

double rician_pdf(double k_r, double sigma2, double r) {
    if (!(k_r >= 0.0)) throw DomainError("rician_pdf: K must be >= 0");
    if (!(sigma2 > 0.0)) throw DomainError("rician_pdf: sigma2 must be > 0");
    if (!(r >= 0.0)) throw DomainError("rician_pdf: r must be >= 0");
    return rician_kernel(std::sqrt(2.0 * sigma2 * k_r), sigma2, r);
}

double von_mises_pdf(double kappa, double phi, double alpha) {
    if (!(kappa >= 0.0)) throw DomainError("von_mises_pdf: kappa must be >= 0");
    return std::exp(kappa * (std::cos(alpha - phi) - 1.0)) / (2.0 * kPi * bessel_i0e(kappa));
}

double von_mises_mean_resultant(double kappa) {
    if (!(kappa >= 0.0)) throw DomainError("kappa must be >= 0");
    if (kappa == 0.0) return 0.0;
    return bessel_i1e(kappa) / bessel_i0e(kappa);
}

// ---------------------------------------------------------------- closed form

namespace {
constexpr double kClosedFormTol = 1e-8;  // absolute, on the density
}

double iftr_pdf_closed(const IftrParams& p, double r) {
    p.validate();
    if (!is_whole(p.m1) || !is_whole(p.m2))
        throw UnsupportedParameters(
            "closed-form IFTR density needs integer m1 and m2; use iftr_pdf_quadrature");
    if (p.m1 > 50.0 || p.m2 > 50.0)
        throw UnsupportedParameters("closed-form IFTR density supports m1, m2 <= 50");
    if (!(r >= 0.0)) throw DomainError("r must be >= 0");
    if (r == 0.0) return 0.0;

    const int m1 = static_cast<int>(p.m1), m2 = static_cast<int>(p.m2);
    const double K = p.k_factor, D = p.delta, W = p.omega;
    const double s = std::sqrt((1.0 - D) * (1.0 + D));
    const double one_minus_s = D * D / (1.0 + s);
    const double A = m1 + 0.5 * K * (1.0 + s);
    const double Dd = 0.5 * m1 * K * one_minus_s + 0.5 * m2 * K * (1.0 + s) + double(m1) * m2;
    const double g = (1.0 + K) * r * r / W;
    const double x1 = -g;
    const double x2 = -m1 * g / A;
    // with Delta = 0 the two poles coincide exactly; keep them bitwise equal
    const double x3 = one_minus_s == 0.0 ? x2 : -double(m1) * m2 * g / Dd;

    const double log_pre = std::log(2.0 * r * (1.0 + K) / W) + m1 * std::log(double(m1)) +
                           m2 * std::log(double(m2)) + (m2 - m1) * std::log(A);
    const double kd = 0.5 * K * D;
    double total = 0.0, err = 0.0;
    for (int n = 0; n < m1; ++n) {
        if (n > 0 && kd == 0.0) break;
        const double log_c = -log_gamma(n + 1.0) + log_gamma(double(m1)) - log_gamma(n + 1.0) -
                             log_gamma(double(m1 - n)) + log_gamma(m2 + double(n)) -
                             log_gamma(double(m2)) + (n > 0 ? 2.0 * n * std::log(kd) : 0.0) -
                             (m2 + n) * std::log(Dd);
        const double scale = std::exp(log_pre + log_c);
        if (scale == 0.0) continue;
        const SeriesEvalReport rep = phi2_3(n + 1.0 - m1, double(m1 - m2), double(m2 + n), 1.0,
                                            x1, x2, x3, kClosedFormTol / scale);
        if (!std::isfinite(rep.value))
            throw EvaluationError("Phi2 evaluation produced a non-finite value", rep.tail_bound);
        total += scale * rep.value;
        err += scale * rep.tail_bound;
    }
    if (err > kClosedFormTol)
        throw EvaluationError("Phi2 evaluation did not reach the requested accuracy", err);
    return std::max(total, 0.0);
}

// ---------------------------------------------------------------- quadrature

namespace {

struct WeightedNodes {
    std::vector<double> a;
    std::vector<double> w;
};

// Nodes for the amplitude V sqrt(xi), xi ~ Gamma(m, 1/m), resolved to the diffuse scale.
WeightedNodes amplitude_rule(double m, double V, double sigma, int level) {
    WeightedNodes out;
    if (V == 0.0) {
        out.a = {0.0};
        out.w = {1.0};
        return out;
    }
    using boost::math::gamma_p_inv;
    using boost::math::gamma_q_inv;
    constexpr double far_tail = 1e-16, near_tail = 1e-9;
    const double refine = std::ldexp(1.0, level);
    const double u_hi = std::sqrt(gamma_q_inv(m, far_tail) / m);
    const double uf_hi = std::sqrt(gamma_q_inv(m, near_tail) / m);
    double u_lo = m >= 1.0 ? std::sqrt(gamma_p_inv(m, far_tail) / m) : 0.0;
    double uf_lo = m >= 1.0 ? std::sqrt(gamma_p_inv(m, near_tail) / m) : 0.0;
    if (m < 2.0) {
        u_lo = 0.0;
        uf_lo = std::min(uf_lo, 0.0);
    }

    const double span_fine = uf_hi - uf_lo;
    double width = 2.0 * sigma / V;
    width = std::min(width, span_fine / 4.0) / refine;
    std::vector<double> breaks;
    auto add_zone = [&](double lo, double hi, int panels) {
        if (!(hi > lo)) return;
        if (breaks.empty()) breaks.push_back(lo);
        for (int i = 1; i <= panels; ++i) breaks.push_back(lo + (hi - lo) * i / panels);
    };
    add_zone(u_lo, uf_lo, static_cast<int>(3 * refine));
    add_zone(uf_lo, uf_hi, std::max(1, static_cast<int>(std::ceil(span_fine / width))));
    add_zone(uf_hi, u_hi, static_cast<int>(3 * refine));

    const QuadratureRule& gl = gauss_legendre_ref(8);
    const double lg = log_gamma(m);
    auto log_density = [&](double u) {
        return std::log(2.0) + m * std::log(m) + (2.0 * m - 1.0) * std::log(u) - m * u * u - lg;
    };
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        const double lo = breaks[p], hi = breaks[p + 1];
        if (p == 0 && lo == 0.0 && m < 1.0) {
            // y = (u/hi)^{2m} removes the u^{2m-1} singularity at the origin
            const double c = std::exp((m - 1.0) * std::log(m) + 2.0 * m * std::log(hi) - lg);
            for (std::size_t i = 0; i < gl.size(); ++i) {
                const double y = 0.5 * (gl.nodes[i] + 1.0);
                const double u = hi * std::pow(y, 0.5 / m);
                out.a.push_back(V * u);
                out.w.push_back(0.5 * gl.weights[i] * c * std::exp(-m * u * u));
            }
            continue;
        }
        const double h = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
        for (std::size_t i = 0; i < gl.size(); ++i) {
            const double u = mid + h * gl.nodes[i];
            out.a.push_back(V * u);
            out.w.push_back(h * gl.weights[i] * std::exp(log_density(u)));
        }
    }
    double total = 0.0;
    for (double w : out.w) total += w;
    for (double& w : out.w) w /= total;
    return out;
}

// Six-point Lagrange weights at offset t in [0,1) for stencil -2..3.
void lagrange6(double t, double* l) {
    const double tm2 = t + 2.0, tm1 = t + 1.0, t0 = t, t1 = t - 1.0, t2 = t - 2.0, t3 = t - 3.0;
    l[0] = -(tm1 * t0 * t1 * t2 * t3) / 120.0;
    l[1] = (tm2 * t0 * t1 * t2 * t3) / 24.0;
    l[2] = -(tm2 * tm1 * t1 * t2 * t3) / 12.0;
    l[3] = (tm2 * tm1 * t0 * t2 * t3) / 12.0;
    l[4] = -(tm2 * tm1 * t0 * t1 * t3) / 24.0;
    l[5] = (tm2 * tm1 * t0 * t1 * t2) / 120.0;
}

constexpr double kKernelReach = 10.0;  // kernel support in units of sigma
constexpr std::size_t kSpectralOrder = 16;
constexpr int kPhaseLevels = 6;
constexpr double kPhasePanel = 0.02;   // finest phase panel, radians
constexpr double kPhaseResolve = 1.0;  // phase panel allowed per sigma / sqrt(specular)

}  // namespace

IftrQuadrature::IftrQuadrature(const IftrParams& p, int level) : params_(p) {
    p.validate();
    if (level < 0 || level > 4) throw DomainError("quadrature level must lie in [0, 4]");
    const PhysicalRays rays = iftr_to_physical(p);
    sigma2_ = rays.sigma2;
    const double sigma = std::sqrt(sigma2_);
    const double refine = std::ldexp(1.0, level);
    h_ = sigma / (12.0 * refine);

    const WeightedNodes r1 = amplitude_rule(p.m1, rays.v1, sigma, level);
    const WeightedNodes r2 = amplitude_rule(p.m2, rays.v2, sigma, level);
    double nu_max = 0.0;
    for (double a : r1.a) nu_max = std::max(nu_max, a);
    double a2_max = 0.0;
    for (double a : r2.a) a2_max = std::max(a2_max, a);
    nu_max += a2_max;

    offset_ = 3;
    w_.assign(static_cast<std::size_t>(nu_max / h_) + 10, 0.0);
    double l[6];
    auto deposit = [&](double nu, double weight) {
        const double x = nu / h_;
        const double fl = std::floor(x);
        lagrange6(x - fl, l);
        const long base = static_cast<long>(fl) + offset_ - 2;
        for (int k = 0; k < 6; ++k) w_[static_cast<std::size_t>(base + k)] += weight * l[k];
        ++nodes_;
    };

    std::vector<std::vector<double>> cos_half_sq(1);
    auto table = [&](std::size_t n) -> const std::vector<double>& {
        if (cos_half_sq.size() <= n) cos_half_sq.resize(n + 1);
        auto& t = cos_half_sq[n];
        if (t.empty()) {
            t.resize(n + 1);
            for (std::size_t k = 0; k <= n; ++k) {
                const double c = std::cos(0.5 * kPi * static_cast<double>(k) / n);
                t[k] = c * c;
            }
        }
        return t;
    };

    for (std::size_t i = 0; i < r1.a.size(); ++i) {
        for (std::size_t j = 0; j < r2.a.size(); ++j) {
            const double a1 = r1.a[i], a2 = r2.a[j];
            const double weight = r1.w[i] * r2.w[j];
            if (weight < 1e-18) continue;
            const double lo = std::min(a1, a2);
            if (lo == 0.0) {
                deposit(a1 + a2, weight);
                continue;
            }
            // trapezoid in the phase difference over [0, pi]; the integrand is even and periodic
            const auto n = static_cast<std::size_t>(std::ceil(refine * (4.0 * lo / sigma + 8.0)));
            const auto& c2 = table(n);
            const double d2 = (a1 - a2) * (a1 - a2), b2 = 4.0 * a1 * a2;
            const double wk = weight / static_cast<double>(n);
            for (std::size_t k = 0; k <= n; ++k) {
                const double nu = std::sqrt(d2 + b2 * c2[k]);
                deposit(nu, (k == 0 || k == n) ? 0.5 * wk : wk);
            }
        }
    }
}

double IftrQuadrature::pdf(double r) const {
    if (!(r >= 0.0)) throw DomainError("r must be >= 0");
    if (r == 0.0) return 0.0;
    const double sigma = std::sqrt(sigma2_);
    const long lo = std::max(0L, static_cast<long>(std::floor((r - kKernelReach * sigma) / h_)) + offset_);
    const long hi = std::min(static_cast<long>(w_.size()) - 1,
                             static_cast<long>(std::ceil((r + kKernelReach * sigma) / h_)) + offset_);
    // lattice points below zero stand for |nu| and fall inside the window whenever lo is 0
    double sum = 0.0;
    for (long j = lo; j <= hi; ++j) {
        const double wj = w_[static_cast<std::size_t>(j)];
        if (wj == 0.0) continue;
        sum += wj * rician_kernel(static_cast<double>(j - offset_) * h_, sigma2_, r);
    }
    return std::max(sum, 0.0);
}

std::vector<double> iftr_pdf_quadrature(const IftrParams& p, std::span<const double> r, double tol) {
    if (!(tol > 0.0)) throw DomainError("tol must be positive");
    for (double v : r)
        if (!(v >= 0.0)) throw DomainError("r must be >= 0");
    auto eval = [&](const IftrQuadrature& q) {
        std::vector<double> f(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) f[i] = q.pdf(r[i]);
        return f;
    };
    std::vector<double> coarse = eval(IftrQuadrature(p, 0));
    double residual = 0.0;
    for (int level = 1; level <= 3; ++level) {
        std::vector<double> fine = eval(IftrQuadrature(p, level));
        residual = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i)
            residual = std::max(residual, std::abs(fine[i] - coarse[i]));
        if (residual <= tol) return fine;
        coarse = std::move(fine);
    }
    throw EvaluationError("IFTR quadrature did not settle within the refinement budget", residual);
}

double iftr_pdf_quadrature(const IftrParams& p, double r, double tol) {
    const double rr[1] = {r};
    return iftr_pdf_quadrature(p, std::span<const double>(rr, 1), tol)[0];
}

// ---------------------------------------------------------------- GTR-V

double gtrv_pdf(const GtrvParams& p, double r, double tol) {
    p.validate();
    if (!(r >= 0.0)) throw DomainError("r must be >= 0");
    if (!(tol > 0.0)) throw DomainError("tol must be positive");
    if (r == 0.0) return 0.0;
    const double sigma2 = 0.5 * p.omega / (1.0 + p.k_factor);
    const double specular = p.omega * p.k_factor / (1.0 + p.k_factor);
    if (p.delta == 0.0) return rician_kernel(std::sqrt(specular), sigma2, r);
    const double i0e = bessel_i0e(p.vm_kappa);
    auto integrand = [&](double alpha) {
        const double nu = std::sqrt(std::max(0.0, specular * (1.0 + p.delta * std::cos(alpha))));
        const double vm =
            std::exp(p.vm_kappa * (std::cos(alpha - p.vm_phi) - 1.0)) / (2.0 * kPi * i0e);
        return rician_kernel(nu, sigma2, r) * vm;
    };
    AdaptiveOptions opt;
    opt.order = 32;
    opt.max_intervals = 4000;
    // split at the von Mises mode and at alpha = 0, pi where the kernel is stationary
    std::vector<double> cuts = {-kPi, 0.0, kPi, p.vm_phi};
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    double total = 0.0;
    const double share = tol / static_cast<double>(cuts.size());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (cuts[i + 1] - cuts[i] < 1e-15) continue;
        total += integrate_adaptive(integrand, cuts[i], cuts[i + 1], share, opt);
    }
    return std::max(total, 0.0);
}

double gtrv_mean_power(const GtrvParams& p) {
    p.validate();
    const double specular = p.omega * p.k_factor / (1.0 + p.k_factor);
    const double sigma2 = 0.5 * p.omega / (1.0 + p.k_factor);
    return specular * (1.0 + p.delta * von_mises_mean_resultant(p.vm_kappa) * std::cos(p.vm_phi)) +
           2.0 * sigma2;
}

// ---------------------------------------------------------------- sampling

std::vector<double> iftr_sample(const IftrParams& p, std::size_t count, std::uint64_t seed) {
    const PhysicalRays rays = iftr_to_physical(p);
    std::mt19937_64 rng(seed);
    std::gamma_distribution<double> g1(p.m1, 1.0 / p.m1), g2(p.m2, 1.0 / p.m2);
    std::uniform_real_distribution<double> phase(-kPi, kPi);
    std::normal_distribution<double> diffuse(0.0, std::sqrt(rays.sigma2));
    std::vector<double> out(count);
    for (auto& r : out) {
        const double a1 = rays.v1 * std::sqrt(g1(rng));
        const double a2 = rays.v2 * std::sqrt(g2(rng));
        const double p1 = phase(rng), p2 = phase(rng);
        const double re = a1 * std::cos(p1) + a2 * std::cos(p2) + diffuse(rng);
        const double im = a1 * std::sin(p1) + a2 * std::sin(p2) + diffuse(rng);
        r = std::hypot(re, im);
    }
    return out;
}

namespace {

// Best-Fisher rejection sampler.
double draw_von_mises(std::mt19937_64& rng, double kappa, double phi) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    if (kappa < 1e-8) return wrap_angle(-kPi + 2.0 * kPi * u01(rng));
    const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
    const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
    const double rr = (1.0 + rho * rho) / (2.0 * rho);
    for (;;) {
        const double u1 = u01(rng), u2 = u01(rng), u3 = u01(rng);
        const double z = std::cos(kPi * u1);
        const double f = (1.0 + rr * z) / (rr + z);
        const double c = kappa * (rr - f);
        if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
            const double theta = (u3 > 0.5 ? 1.0 : -1.0) * std::acos(std::clamp(f, -1.0, 1.0));
            return wrap_angle(theta + phi);
        }
    }
}

}  // namespace

std::vector<double> von_mises_sample(double kappa, double phi, std::size_t count,
                                     std::uint64_t seed) {
    if (!(kappa >= 0.0)) throw DomainError("kappa must be >= 0");
    std::mt19937_64 rng(seed);
    std::vector<double> out(count);
    for (auto& a : out) a = draw_von_mises(rng, kappa, phi);
    return out;
}

std::vector<double> gtrv_sample(const GtrvParams& p, std::size_t count, std::uint64_t seed) {
    p.validate();
    const PhysicalRays rays =
        iftr_to_physical({p.k_factor, p.delta, 1.0, 1.0, p.omega});
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> diffuse(0.0, std::sqrt(rays.sigma2));
    std::vector<double> out(count);
    for (auto& r : out) {
        const double alpha = draw_von_mises(rng, p.vm_kappa, p.vm_phi);
        const double re = rays.v1 + rays.v2 * std::cos(alpha) + diffuse(rng);
        const double im = rays.v2 * std::sin(alpha) + diffuse(rng);
        r = std::hypot(re, im);
    }
    return out;
}

// ---------------------------------------------------------------- fast evaluators

IftrSpectral::IftrSpectral(std::span<const double> grid, const Options& opt)
    : grid_(grid.begin(), grid.end()), omega_(opt.omega) {
    if (grid_.empty()) throw DomainError("IftrSpectral: empty grid");
    if (!(opt.omega > 0.0) || !(opt.k_max > 0.0)) throw DomainError("IftrSpectral: bad options");
    const double r_max = *std::max_element(grid_.begin(), grid_.end());
    r_max_ = r_max;
    // doubled omega gives headroom when callers rescale
    const double root = std::sqrt(2.0 * omega_);
    const double freq = r_max + std::sqrt(2.0) * root;
    const double sigma_min = std::sqrt(0.5 * omega_ / (1.0 + opt.k_max));
    const double rho_max = std::sqrt(2.0 * 40.0) / sigma_min;
    const double panel = 10.0 / freq;
    // geometric grading towards the origin resolves slowly varying Gamma factors
    std::vector<double> breaks = {0.0};
    const double first = std::min(panel, 0.05 / root);
    for (double b = first; b < panel; b *= 2.0) breaks.push_back(b);
    for (double b = panel; b < rho_max + panel; b += panel) breaks.push_back(b);
    const QuadratureRule rule = composite_gauss_legendre(breaks, kSpectralOrder);
    rho_ = rule.nodes;
    rho_end_ = breaks.back();
    weight_.resize(rho_.size());
    for (std::size_t q = 0; q < rho_.size(); ++q) weight_[q] = rule.weights[q] * rho_[q];
    const std::size_t n = rho_.size();
    kernel_.assign(grid_.size() * n, 0.0);
    const double h = opt.bandwidth;
    if (!(h > 0.0)) {
        for (std::size_t k = 0; k < grid_.size(); ++k)
            for (std::size_t q = 0; q < n; ++q)
                kernel_[k * n + q] = grid_[k] * weight_[q] * j0(rho_[q] * grid_[k]);
        return;
    }
    // int_0^inf r J0(rho r) g_h(x - r) dr; it decays like exp(-(rho h)^2 / 2)
    const double rho_cap = std::min(rho_.back(), kSmoothReach / h);
    const std::size_t n_cap = static_cast<std::size_t>(
        std::upper_bound(rho_.begin(), rho_.end(), rho_cap) - rho_.begin());
    const double r_panel = std::min(h, 6.0 / rho_cap);
    // one r rule shared by all grid points so each J0 value is computed once
    const double r_end = r_max + kSmoothReach * h;
    const auto panels = static_cast<std::size_t>(std::ceil(r_end / r_panel));
    std::vector<double> rb(panels + 1);
    for (std::size_t i = 0; i <= panels; ++i)
        rb[i] = r_end * static_cast<double>(i) / static_cast<double>(panels);
    const QuadratureRule rr = composite_gauss_legendre(rb, 12);
    std::vector<double> bessel(n_cap);
    for (std::size_t j = 0; j < rr.size(); ++j) {
        const double r = rr.nodes[j];
        bool used = false;
        for (std::size_t k = 0; k < grid_.size() && !used; ++k)
            used = std::abs(grid_[k] - r) < kSmoothReach * h;
        if (!used) continue;
        for (std::size_t q = 0; q < n_cap; ++q) bessel[q] = j0(rho_[q] * r);
        for (std::size_t k = 0; k < grid_.size(); ++k) {
            if (std::abs(grid_[k] - r) >= kSmoothReach * h) continue;
            const double w = rr.weights[j] * r * gauss(grid_[k] - r, h);
            double* row = kernel_.data() + k * n;
            for (std::size_t q = 0; q < n_cap; ++q) row[q] += w * bessel[q];
        }
    }
    for (std::size_t k = 0; k < grid_.size(); ++k)
        for (std::size_t q = 0; q < n_cap; ++q) kernel_[k * n + q] *= weight_[q];
}

void IftrSpectral::evaluate(const IftrParams& p, std::span<double> out) const {
    p.validate();
    if (out.size() < grid_.size()) throw DomainError("IftrSpectral: output too short");
    if (p.omega > 2.0 * omega_ || p.omega < 0.25 * omega_)
        throw DomainError("IftrSpectral: omega outside the range the grid was built for");
    const PhysicalRays rays = iftr_to_physical(p);
    const double cut = std::sqrt(2.0 * 40.0 / rays.sigma2);
    if (cut > rho_end_ * (1.0 + 1e-12))
        throw DomainError("IftrSpectral: K beyond the resolved range");
    const std::size_t limit = static_cast<std::size_t>(
        std::upper_bound(rho_.begin(), rho_.end(), cut) - rho_.begin());
    // the integrand is dropped once three consecutive panels fall below the floor
    const double floor = 1e-14 / std::sqrt(omega_);
    const std::size_t window = 3 * kSpectralOrder;
    GammaJ0Sequence c1(p.m1), c2(p.m2);
    std::vector<double> psi;
    psi.reserve(limit);
    std::size_t quiet = 0;
    for (std::size_t q = 0; q < limit; ++q) {
        const double rho = rho_[q];
        double v = std::exp(-0.5 * rays.sigma2 * rho * rho) * c1.next(rho * rays.v1);
        if (rays.v2 > 0.0) v *= c2.next(rho * rays.v2);
        psi.push_back(v);
        quiet = std::abs(v) * rho * rho * r_max_ < floor ? quiet + 1 : 0;
        if (quiet >= window && (q + 1) % kSpectralOrder == 0) break;
    }
    const std::size_t n = psi.size();
    for (std::size_t k = 0; k < grid_.size(); ++k) {
        const double* row = kernel_.data() + k * rho_.size();
        double s = 0.0;
        for (std::size_t q = 0; q < n; ++q) s += row[q] * psi[q];
        out[k] = std::max(s, 0.0);
    }
}

std::vector<double> IftrSpectral::evaluate(const IftrParams& p) const {
    std::vector<double> out(grid_.size());
    evaluate(p, out);
    return out;
}

GtrvGridEvaluator::GtrvGridEvaluator(std::span<const double> grid, double kappa, double phi,
                                     double bandwidth)
    : grid_(grid.begin(), grid.end()), bandwidth_(bandwidth) {
    if (!(kappa >= 0.0)) throw DomainError("kappa must be >= 0");
    if (!(bandwidth >= 0.0)) throw DomainError("bandwidth must be >= 0");
    const double i0e = bessel_i0e(kappa);
    // panels over one period around the mode, finer inside the von Mises bulk
    const double bulk = kappa > 0.0 ? std::min(kPi, 8.0 / std::sqrt(kappa)) : kPi;
    for (int level = 0; level < kPhaseLevels; ++level) {
        const double scale = std::ldexp(1.0, level);
        const double coarse = kPhasePanel * scale;
        const double fine = std::min(coarse, bulk / 40.0 * std::min(scale, 4.0));
        std::vector<double> breaks;
        for (double a = -kPi; a < -bulk; a += coarse) breaks.push_back(a);
        for (double a = -bulk; a < bulk; a += fine) breaks.push_back(a);
        for (double a = bulk; a < kPi; a += coarse) breaks.push_back(a);
        breaks.push_back(kPi);
        std::sort(breaks.begin(), breaks.end());
        breaks.erase(std::unique(breaks.begin(), breaks.end(),
                                 [&](double x, double y) { return y - x < 0.25 * fine; }),
                     breaks.end());
        breaks.front() = -kPi;
        breaks.back() = kPi;
        const QuadratureRule rule = composite_gauss_legendre(breaks, 6);
        std::vector<std::pair<double, double>> nodes;
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const double offset = rule.nodes[q];  // relative to the mode
            const double w =
                rule.weights[q] * std::exp(kappa * (std::cos(offset) - 1.0)) / (2.0 * kPi * i0e);
            if (w < 1e-20) continue;
            nodes.emplace_back(std::cos(wrap_angle(offset + phi)), w);
        }
        std::sort(nodes.begin(), nodes.end());
        PhaseRule pr;
        pr.panel = coarse;
        for (const auto& [c, w] : nodes) {
            pr.cos_alpha.push_back(c);
            pr.weight.push_back(w);
        }
        rules_.push_back(std::move(pr));
    }
}

namespace {

// sum_q w_q K(nu_q; sigma2, r) at each r; nu must be ascending
void rician_mixture(std::span<const double> r, double sigma2, std::span<const double> nu,
                    std::span<const double> w, std::span<double> out) {
    const double reach = kKernelReach * std::sqrt(sigma2);
    for (std::size_t k = 0; k < r.size(); ++k) {
        const auto lo = std::lower_bound(nu.begin(), nu.end(), r[k] - reach) - nu.begin();
        const auto hi = std::upper_bound(nu.begin(), nu.end(), r[k] + reach) - nu.begin();
        double s = 0.0;
        for (auto q = lo; q < hi; ++q) s += w[q] * rician_kernel(nu[q], sigma2, r[k]);
        out[k] = s;
    }
}

}  // namespace

void GtrvGridEvaluator::evaluate(double k_factor, double delta, double omega,
                                 std::span<double> out) const {
    if (out.size() < grid_.size()) throw DomainError("GtrvGridEvaluator: output too short");
    const double sigma2 = 0.5 * omega / (1.0 + k_factor);
    const double sigma = std::sqrt(sigma2);
    const double specular = omega * k_factor / (1.0 + k_factor);
    // nu moves by at most sqrt(specular / 2) per radian of phase
    const double allowed = kPhaseResolve * sigma / std::sqrt(specular + sigma2);
    const PhaseRule* rule = &rules_.front();
    for (const auto& pr : rules_)
        if (pr.panel <= allowed) rule = &pr;
    std::vector<double> nu(rule->cos_alpha.size());
    for (std::size_t q = 0; q < nu.size(); ++q)
        nu[q] = std::sqrt(std::max(0.0, specular * (1.0 + delta * rule->cos_alpha[q])));
    std::vector<double> weight = rule->weight;

    // Many phase nodes: spread them onto a nu lattice fine against sigma, as in IftrQuadrature,
    // so each r needs a fixed number of kernel values.
    const double h_nu = sigma / 12.0;
    const auto lattice_span = static_cast<std::size_t>(2.0 * kKernelReach * 12.0);
    if (nu.size() > lattice_span) {
        const long offset = 3;
        std::vector<double> lw(static_cast<std::size_t>(nu.back() / h_nu) + 10, 0.0);
        double l[6];
        for (std::size_t q = 0; q < nu.size(); ++q) {
            const double x = nu[q] / h_nu;
            const double fl = std::floor(x);
            lagrange6(x - fl, l);
            const long base = static_cast<long>(fl) + offset - 2;
            for (int k = 0; k < 6; ++k) lw[static_cast<std::size_t>(base + k)] += weight[q] * l[k];
        }
        nu.resize(lw.size());
        for (std::size_t j = 0; j < lw.size(); ++j) nu[j] = (static_cast<double>(j) - offset) * h_nu;
        weight = std::move(lw);
    }

    if (bandwidth_ == 0.0) {
        rician_mixture(grid_, sigma2, nu, weight, out);
        return;
    }
    // trapezoid convolution on a grid fine enough for both the density and the kernel
    const double h = bandwidth_;
    const double step = std::min(h, sigma) / 3.0;
    const auto [gmin, gmax] = std::minmax_element(grid_.begin(), grid_.end());
    const double a = std::max(0.0, *gmin - kSmoothReach * h);
    const auto count = static_cast<std::size_t>(std::ceil((*gmax + kSmoothReach * h - a) / step)) + 1;
    std::vector<double> fine(count), f(count);
    for (std::size_t j = 0; j < count; ++j) fine[j] = a + step * static_cast<double>(j);
    const double coarse = sigma / 12.0;
    if (coarse > 1.5 * step) {
        // the density is smooth on the scale sigma: evaluate it coarsely, using that it is odd
        // in r, and interpolate
        const long jlo = static_cast<long>(std::floor(a / coarse)) - 3;
        const long jhi = static_cast<long>(std::ceil(fine.back() / coarse)) + 3;
        std::vector<double> rc(static_cast<std::size_t>(jhi - jlo + 1)), fc(rc.size());
        for (std::size_t i = 0; i < rc.size(); ++i) rc[i] = std::abs(static_cast<double>(jlo + static_cast<long>(i)) * coarse);
        rician_mixture(rc, sigma2, nu, weight, fc);
        for (std::size_t i = 0; i < rc.size(); ++i)
            if (jlo + static_cast<long>(i) < 0) fc[i] = -fc[i];
        double l[6];
        for (std::size_t j = 0; j < count; ++j) {
            const double x = fine[j] / coarse;
            const double fl = std::floor(x);
            lagrange6(x - fl, l);
            const long base = static_cast<long>(fl) - 2 - jlo;
            double v = 0.0;
            for (int k = 0; k < 6; ++k) v += l[k] * fc[static_cast<std::size_t>(base + k)];
            f[j] = v;
        }
    } else {
        rician_mixture(fine, sigma2, nu, weight, f);
    }
    // The density is odd in r near the origin (f = c1 r + c3 r^3), so the trapezoid sum
    // there gets the two leading Euler-Maclaurin end corrections.
    double c1 = 0.0, c3 = 0.0;
    if (a == 0.0 && count > 2) {
        c1 = (8.0 * f[1] - f[2]) / (6.0 * step);
        c3 = (f[2] - 2.0 * f[1]) / (6.0 * step * step * step);
    }
    const double s2 = step * step;
    for (std::size_t k = 0; k < grid_.size(); ++k) {
        const double x = grid_[k];
        const auto lo = static_cast<std::size_t>(std::max(0.0, std::ceil((x - kSmoothReach * h - a) / step)));
        const auto hi = std::min(count - 1, static_cast<std::size_t>((x + kSmoothReach * h - a) / step));
        double s = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) {
            const double w = (j == 0 || j == count - 1) ? 0.5 : 1.0;
            s += w * f[j] * gauss(x - fine[j], h);
        }
        s *= step;
        if (c1 != 0.0 || c3 != 0.0) {
            const double g0 = gauss(x, h);
            const double curv = (x * x / (h * h) - 1.0) / (h * h) * g0;  // d2/dr2 of g(x - r) at 0
            const double d1 = c1 * g0;
            const double d3 = 6.0 * c3 * g0 + 3.0 * c1 * curv;
            s += s2 / 12.0 * d1 - s2 * s2 / 720.0 * d3;
        }
        out[k] = s;
    }
}

}  // namespace tworay
