// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tworay/channel.hpp"
#include "tworay/models.hpp"

namespace tworay {

struct ObjectiveVector {
    double mse = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
    double ks = 0.0;

    std::array<double, 4> as_array() const { return {mse, rmse, mae, ks}; }
    bool operator==(const ObjectiveVector&) const = default;
};

// Pointwise error metrics on a shared grid.
ObjectiveVector objectives(const AmplitudePdf& f_exp, const AmplitudePdf& f_mod);
ObjectiveVector objectives(std::span<const double> f_exp, std::span<const double> f_mod);

// a is no worse in every metric and better in at least one
bool dominates(const ObjectiveVector& a, const ObjectiveVector& b);

struct Range {
    double lo = 0.0;
    double hi = 1.0;
};

struct SearchBounds {
    Range k{0.0, 1000.0};
    Range delta{0.0, 1.0};
    Range m1{0.05, 50.0};
    Range m2{0.05, 50.0};
};

struct GaSettings {
    std::size_t population = 200;
    std::size_t generations = 400;
    double elite_fraction = 0.05;
    std::size_t stall_window = 100;
    double stall_tolerance = 1e-6;
    double crossover_probability = 0.9;
    double mutation_probability = 0.25;  // per gene
    double crossover_eta = 20.0;
    double mutation_eta = 20.0;
    double gene_resolution = 1e-6;
    unsigned jobs = 1;
};

struct Candidate {
    std::vector<double> genes;
    ObjectiveVector objectives;
};

struct ParetoFront {
    std::vector<Candidate> solutions;
    std::vector<Range> bounds;
    std::size_t generations = 0;
    bool stalled = false;
    // per generation, the smallest value of each metric over the population
    std::vector<std::array<double, 4>> best_history;
};

struct FitResult {
    std::vector<double> selected;
    ObjectiveVector selected_objectives;
    double epsilon_n = 0.0;
    ParetoFront front;
};

// Normalized-metric argmin over the front; ties go to the lexicographically smallest genes.
FitResult select_solution(const ParetoFront& front);
// epsilon_n of every solution, in front order
std::vector<double> epsilon_scores(const ParetoFront& front);

using BatchObjective =
    std::function<void(std::span<const std::vector<double>> genomes, std::span<ObjectiveVector> out)>;

// NSGA-II with simulated binary crossover and polynomial mutation.
ParetoFront nsga2(std::span<const Range> bounds, const BatchObjective& evaluate,
                  const GaSettings& settings, std::uint64_t seed);

class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct IftrFit {
    IftrParams selected;
    FitResult result;
};

// Genes are (K, Delta, m1, m2); omega comes from the empirical second moment.
IftrFit fit_iftr(const AmplitudePdf& f_exp, const GaSettings& ga, std::uint64_t seed,
                 const SearchBounds& bounds = {});

struct VonMisesFit {
    double kappa = 0.0;
    double phi = 0.0;
    double mse = 0.0;
    bool multimodal = false;
};

VonMisesFit fit_von_mises(const CircularPdf& phase_pdf);

struct GtrvFit {
    GtrvParams selected;
    FitResult result;
};

// Genes are (K, Delta); omega per candidate matches the empirical second moment.
GtrvFit fit_gtrv(const AmplitudePdf& f_exp, const VonMisesFit& vm, const GaSettings& ga,
                 std::uint64_t seed, const SearchBounds& bounds = {});

// Mean of r^2: the stored sample moment, else the trapezoid moment of the density.
double pdf_second_moment(const AmplitudePdf& pdf);

}  // namespace tworay
