// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tworay::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;    // bad flags, parameters or input files
inline constexpr int kExitRuntime = 2;  // I/O and unexpected failures
inline constexpr int kExitPartial = 3;  // merge-fit finished but some configurations failed

// Default worker count: TWORAY_JOBS when set, else 1.
unsigned default_jobs();

// Seed for a sub-task, derived from the run seed and a path of indices.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

struct SynthOptions {
    std::string scenario;
    std::uint64_t seed = 0;
    std::string out_dir;
    bool text = false;
};

struct MergeFitOptions {
    std::vector<std::string> inputs;
    std::vector<std::string> scenarios;  // synthesized when no inputs are given
    std::uint64_t seed = 0;
    std::size_t configs = 142;
    std::vector<std::string> only;
    std::string model = "iftr";
    std::size_t population = 200;
    std::size_t generations = 400;
    double elite = 0.05;
    std::size_t stall_window = 100;
    double stall_tolerance = 1e-6;
    std::optional<double> k_min_db;
    double k_max_db = 30.0;
    double m_min = 0.05;
    double m_max = 50.0;
    std::size_t pdf_points = 100;
    std::size_t phase_bins = 64;
    unsigned jobs = 1;
    std::string out_dir;
};

struct EvalOptions {
    std::string model;
    std::optional<double> k_db;
    std::optional<double> k;
    double delta = 0.0;
    double m1 = 1.0;
    double m2 = 1.0;
    double omega = 1.0;
    double kappa = 0.0;
    double phi = 0.0;
    std::optional<double> x_min;
    std::optional<double> x_max;
    std::size_t points = 0;
    std::string out_dir;
};

struct ReportOptions {
    std::string input;  // merge-fit output directory or a results.csv
    std::string out_dir;
};

int cmd_synth(const SynthOptions& o, const std::vector<std::string>& argv);
int cmd_merge_fit(const MergeFitOptions& o, const std::vector<std::string>& argv);
int cmd_eval(const EvalOptions& o, const std::vector<std::string>& argv);
int cmd_report(const ReportOptions& o, const std::vector<std::string>& argv);

}  // namespace tworay::cli
