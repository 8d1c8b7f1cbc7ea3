// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "tworay/math.hpp"

namespace tworay {

struct IftrParams {
    double k_factor = 0.0;  // linear
    double delta = 0.0;
    double m1 = 1.0;
    double m2 = 1.0;
    double omega = 1.0;

    void validate() const;
};

struct PhysicalRays {
    double v1 = 0.0;
    double v2 = 0.0;
    double sigma2 = 0.0;
};

struct GtrvParams {
    double k_factor = 0.0;
    double delta = 0.0;
    double vm_kappa = 0.0;
    double vm_phi = 0.0;
    double omega = 1.0;

    void validate() const;
};

struct AmplitudePdf {
    std::vector<double> grid;
    std::vector<double> density;
    // mean of r^2 over the samples the estimate came from, when known
    std::optional<double> second_moment;
    // Gaussian kernel width when the density is a kernel estimate
    std::optional<double> bandwidth;

    void validate() const;
};

class UnsupportedParameters : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class EvaluationError : public std::runtime_error {
public:
    EvaluationError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

double wrap_angle(double a);

PhysicalRays iftr_to_physical(const IftrParams& p);
IftrParams physical_to_iftr(const PhysicalRays& rays, double m1, double m2);

double rician_pdf(double k_r, double sigma2, double r);
// Rician density written with the specular amplitude nu directly.
double rician_kernel(double nu, double sigma2, double r);

double von_mises_pdf(double kappa, double phi, double alpha);
// E[cos(alpha - phi)] for the von Mises law, I1(kappa)/I0(kappa)
double von_mises_mean_resultant(double kappa);

// Integer m1, m2 only.
double iftr_pdf_closed(const IftrParams& p, double r);

double iftr_pdf_quadrature(const IftrParams& p, double r, double tol = 1e-8);
std::vector<double> iftr_pdf_quadrature(const IftrParams& p, std::span<const double> r,
                                        double tol = 1e-8);

// Conditional-Rician evaluator for general m: the law of the specular magnitude
// |V1 sqrt(xi1) + V2 sqrt(xi2) e^{j alpha}| is integrated once per parameter set and the
// density is its mixture of Rician kernels.
class IftrQuadrature {
public:
    explicit IftrQuadrature(const IftrParams& p, int level = 0);

    double pdf(double r) const;
    const IftrParams& params() const { return params_; }
    std::size_t node_count() const { return nodes_; }

private:
    IftrParams params_;
    double sigma2_ = 0.0;
    double h_ = 0.0;          // spacing of the nu lattice
    std::vector<double> w_;   // lattice weights, index j <-> nu = (j - offset_) * h_
    long offset_ = 0;
    std::size_t nodes_ = 0;
};

double gtrv_pdf(const GtrvParams& p, double r, double tol = 1e-9);
// Mean of r^2 under GTR-V; differs from omega when the phase law is not uniform.
double gtrv_mean_power(const GtrvParams& p);

std::vector<double> iftr_sample(const IftrParams& p, std::size_t count, std::uint64_t seed);
std::vector<double> von_mises_sample(double kappa, double phi, std::size_t count,
                                     std::uint64_t seed);
std::vector<double> gtrv_sample(const GtrvParams& p, std::size_t count, std::uint64_t seed);

// Fast IFTR evaluator on a fixed amplitude grid through the Hankel-transform form
//   f(r) = r * int rho J0(rho r) exp(-sigma^2 rho^2 / 2) C_m1(rho V1) C_m2(rho V2) d rho,
// C_m(t) = E[J0(t sqrt(xi))]. Built once per grid, then reused across parameter sets.
class IftrSpectral {
public:
    struct Options {
        double k_max = 1000.0;  // smallest diffuse scale the rho grid must resolve
        double omega = 1.0;
        // > 0: densities come out convolved with a Gaussian of this width
        double bandwidth = 0.0;
    };

    IftrSpectral(std::span<const double> grid, const Options& opt);

    // Density on the grid for the given parameters; omega is taken from p.
    void evaluate(const IftrParams& p, std::span<double> out) const;
    std::vector<double> evaluate(const IftrParams& p) const;

    std::size_t rho_count() const { return rho_.size(); }

private:
    std::vector<double> grid_;
    std::vector<double> rho_;
    std::vector<double> weight_;  // rho * w
    std::vector<double> kernel_;  // grid.size() x rho.size(), r J0(rho r) rho w, maybe smoothed in r
    double omega_ = 1.0;
    double r_max_ = 0.0;
    double rho_end_ = 0.0;
};

// GTR-V densities on a fixed grid for fixed von Mises parameters; the phase rule is
// built once and reused across (K, Delta).
class GtrvGridEvaluator {
public:
    // bandwidth > 0 convolves the densities with a Gaussian of that width
    GtrvGridEvaluator(std::span<const double> grid, double kappa, double phi,
                      double bandwidth = 0.0);
    void evaluate(double k_factor, double delta, double omega, std::span<double> out) const;

private:
    // phase nodes sorted by cos(alpha), from finest to coarsest panels
    struct PhaseRule {
        double panel = 0.0;
        std::vector<double> cos_alpha;
        std::vector<double> weight;
    };

    std::vector<double> grid_;
    double bandwidth_ = 0.0;
    std::vector<PhaseRule> rules_;
};

}  // namespace tworay
