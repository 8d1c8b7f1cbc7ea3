// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tworay {

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Thrown when adaptive integration runs out of subdivisions.
class IntegrationError : public std::runtime_error {
public:
    IntegrationError(const std::string& what, double best_estimate, double residual)
        : std::runtime_error(what), best_(best_estimate), residual_(residual) {}
    double best_estimate() const noexcept { return best_; }
    double residual() const noexcept { return residual_; }

private:
    double best_;
    double residual_;
};

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
    double length() const { return hi - lo; }
};

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    Interval domain;

    std::size_t size() const { return nodes.size(); }
};

// n-point Gauss-Legendre rule on [lo, hi].
QuadratureRule gauss_legendre(std::size_t n, double lo = -1.0, double hi = 1.0);

// Gauss-Legendre of the given order on each panel between consecutive breakpoints.
QuadratureRule composite_gauss_legendre(std::span<const double> breaks, std::size_t order);

// Cached reference rule on [-1, 1]; orders up to 128 are kept.
const QuadratureRule& gauss_legendre_ref(std::size_t n);

double log_gamma(double x);

double bessel_i0(double x);
// e^{-x} I0(x), finite for all x >= 0
double bessel_i0e(double x);
// e^{-x} I1(x)
double bessel_i1e(double x);

struct SeriesEvalReport {
    double value = 0.0;
    long terms_used = 0;
    bool converged = false;
    double tail_bound = 0.0;
};

enum class Phi2Method { automatic, series, residues };

struct Phi2Options {
    Phi2Method method = Phi2Method::automatic;
    int max_terms_per_index = 300;
};

// Three-variable confluent hypergeometric function
//   sum (b1)_i (b2)_j (b3)_k / (c)_{i+j+k} x1^i x2^j x3^k / (i! j! k!).
SeriesEvalReport phi2_3(double b1, double b2, double b3, double c, double x1, double x2, double x3,
                        double tol, const Phi2Options& opt = {});

struct AdaptiveOptions {
    std::size_t order = 64;
    std::size_t max_intervals = 2000;
};

double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double tol,
                          const AdaptiveOptions& opt = {});

// Characteristic function of a unit-mean Gamma(m) variable seen through J0:
// E[J0(t sqrt(xi))] = 1F1(m; 1; -t^2 / (4m)).
double gamma_j0_transform(double m, double t);

// Same quantity on an ascending sequence of t values (shares the marching state).
void gamma_j0_transform(double m, std::span<const double> t_ascending, std::span<double> out);

// Incremental form for callers that decide on the fly how far to go; t must not decrease
// between calls.
class GammaJ0Sequence {
public:
    explicit GammaJ0Sequence(double m);
    ~GammaJ0Sequence();
    GammaJ0Sequence(GammaJ0Sequence&&) noexcept;
    GammaJ0Sequence& operator=(GammaJ0Sequence&&) noexcept;

    double next(double t);

private:
    struct State;
    double m_;
    State* state_ = nullptr;
};

}  // namespace tworay
