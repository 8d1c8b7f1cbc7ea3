// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include "commands.hpp"
#include "manifest.hpp"
#include "table.hpp"
#include "tworay/channel.hpp"
#include "tworay/fitting.hpp"

namespace fs = std::filesystem;

namespace tworay::cli {

unsigned default_jobs() {
    if (const char* env = std::getenv("TWORAY_JOBS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
    }
    return 1;
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed),
                                     static_cast<std::uint32_t>(seed >> 32)};
    for (auto p : path) {
        words.push_back(static_cast<std::uint32_t>(p));
        words.push_back(static_cast<std::uint32_t>(p >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

namespace {

struct ScenarioSet {
    std::string name;
    std::vector<ChannelResponse> channels;
};

struct Job {
    std::size_t set = 0;
    std::size_t config_index = 0;
    MergedConfig config;
};

void write_table(const fs::path& path, const CsvRow& header, const std::vector<CsvRow>& rows) {
    std::ofstream out(path);
    write_csv_row(out, header);
    for (const auto& r : rows) write_csv_row(out, r);
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::vector<double> density_on_grid(const AmplitudePdf& emp, const FitRecord& rec,
                                    bool smoothed) {
    std::vector<double> f(emp.grid.size());
    const double bw = smoothed ? emp.bandwidth.value_or(0.0) : 0.0;
    if (rec.model == "iftr") {
        const IftrSpectral model(emp.grid, {std::max(*rec.k_linear, 1.0), *rec.omega, bw});
        model.evaluate({*rec.k_linear, *rec.delta, *rec.m1, *rec.m2, *rec.omega}, f);
    } else {
        const GtrvGridEvaluator model(emp.grid, *rec.kappa, *rec.phi, bw);
        model.evaluate(*rec.k_linear, *rec.delta, *rec.omega, f);
    }
    return f;
}

FitRecord fit_one(const ScenarioSet& set, const Job& job, const MergeFitOptions& o,
                  const fs::path& plot_dir) {
    FitRecord rec;
    rec.scenario = set.name;
    rec.config = job.config.id;
    rec.pair_kind = job.config.pair_kind == PairKind::shared_tx ? "shared_tx" : "shared_rx";
    rec.first = job.config.first.label();
    rec.second = job.config.second.label();
    rec.model = o.model;
    rec.status = "failed";

    const ChannelResponse& h1 = set.channels.at(channel_index(job.config.first));
    const ChannelResponse& h2 = set.channels.at(channel_index(job.config.second));
    const ChannelResponse merged = merge(h1, h2);
    const AmplitudePdf emp = empirical_pdf(merged, o.pdf_points);
    const CircularPdf phase = phase_diff_pdf(h1, h2, o.phase_bins);
    const VonMisesFit vm = fit_von_mises(phase);

    GaSettings ga;
    ga.population = o.population;
    ga.generations = o.generations;
    ga.elite_fraction = o.elite;
    ga.stall_window = o.stall_window;
    ga.stall_tolerance = o.stall_tolerance;
    SearchBounds bounds;
    bounds.k = {o.k_min_db ? std::pow(10.0, *o.k_min_db / 10.0) : 0.0, std::pow(10.0, o.k_max_db / 10.0)};
    bounds.m1 = bounds.m2 = {o.m_min, o.m_max};
    const std::uint64_t seed = derive_seed(o.seed, {job.set, job.config_index});

    FitResult result;
    if (o.model == "iftr") {
        const IftrFit fit = fit_iftr(emp, ga, seed, bounds);
        rec.k_linear = fit.selected.k_factor;
        rec.delta = fit.selected.delta;
        rec.m1 = fit.selected.m1;
        rec.m2 = fit.selected.m2;
        rec.omega = fit.selected.omega;
        result = fit.result;
    } else {
        const GtrvFit fit = fit_gtrv(emp, vm, ga, seed, bounds);
        rec.k_linear = fit.selected.k_factor;
        rec.delta = fit.selected.delta;
        rec.kappa = fit.selected.vm_kappa;
        rec.phi = fit.selected.vm_phi;
        rec.mse_vm = vm.mse;
        rec.omega = fit.selected.omega;
        if (vm.multimodal) rec.message = "phase difference is not unimodal";
        result = fit.result;
    }
    rec.k_db = 10.0 * std::log10(*rec.k_linear);
    rec.mse = result.selected_objectives.mse;
    rec.rmse = result.selected_objectives.rmse;
    rec.mae = result.selected_objectives.mae;
    rec.ks = result.selected_objectives.ks;
    rec.epsilon_n = result.epsilon_n;
    rec.generations = static_cast<double>(result.front.generations);
    rec.status = "ok";

    fs::create_directories(plot_dir);
    const auto fitted = density_on_grid(emp, rec, true);
    const auto model = density_on_grid(emp, rec, false);
    std::vector<CsvRow> rows;
    for (std::size_t i = 0; i < emp.grid.size(); ++i)
        rows.push_back({format_double(emp.grid[i]), format_double(emp.density[i]),
                        format_double(fitted[i]), format_double(model[i])});
    write_table(plot_dir / "pdf.csv", {"r", "empirical", "fitted", "model"}, rows);

    rows.clear();
    for (std::size_t i = 0; i < phase.centers.size(); ++i)
        rows.push_back({format_double(phase.centers[i]), format_double(phase.density[i]),
                        format_double(von_mises_pdf(vm.kappa, vm.phi, phase.centers[i]))});
    write_table(plot_dir / "phase.csv", {"alpha", "empirical", "von_mises"}, rows);

    const DelayProfile profile = cir(merged);
    rows.clear();
    for (std::size_t i = 0; i < profile.delay.size(); ++i)
        rows.push_back({format_double(profile.delay[i]), format_double(profile.magnitude[i])});
    write_table(plot_dir / "cir.csv", {"delay_s", "magnitude"}, rows);
    return rec;
}

std::vector<ScenarioSet> load_sets(const MergeFitOptions& o, Manifest& manifest) {
    std::vector<ScenarioSet> sets;
    for (const auto& path : o.inputs) {
        ScenarioSet s;
        s.channels = read_channel_set(path);
        if (s.channels.size() != kChannelsPerScenario)
            throw std::invalid_argument(path + ": expected " + std::to_string(kChannelsPerScenario) +
                                        " channels, found " + std::to_string(s.channels.size()));
        s.name = s.channels.front().meta.scenario;
        manifest.add_input(path);
        sets.push_back(std::move(s));
    }
    if (o.inputs.empty()) {
        const std::vector<std::string> names =
            o.scenarios.empty() ? std::vector<std::string>{"anechoic", "reverberation", "indoor"}
                                : o.scenarios;
        for (const auto& name : names) {
            const Scenario kind = parse_scenario(name);
            sets.push_back({std::string(to_string(kind)), synth_scenario(kind, o.seed)});
        }
    }
    std::set<std::string> seen;
    for (const auto& s : sets)
        if (!seen.insert(s.name).second)
            throw std::invalid_argument("scenario '" + s.name + "' appears twice");
    return sets;
}

void write_summaries(const fs::path& dir, const std::vector<FitRecord>& records,
                     const std::string& model, Manifest& manifest) {
    fs::create_directories(dir / "summary");
    std::vector<std::string> scenarios;
    for (const auto& r : records)
        if (std::find(scenarios.begin(), scenarios.end(), r.scenario) == scenarios.end())
            scenarios.push_back(r.scenario);

    using Getter = std::optional<double> FitRecord::*;
    std::vector<std::pair<std::string, Getter>> params = {{"k_db", &FitRecord::k_db},
                                                          {"delta", &FitRecord::delta}};
    if (model == "iftr") {
        params.push_back({"m1", &FitRecord::m1});
        params.push_back({"m2", &FitRecord::m2});
    } else {
        params.push_back({"kappa", &FitRecord::kappa});
        params.push_back({"phi", &FitRecord::phi});
    }
    auto column = [&](const std::string& scenario, Getter g) {
        std::vector<double> v;
        for (const auto& r : records)
            if (r.scenario == scenario && r.status == "ok" && (r.*g)) v.push_back(*(r.*g));
        return v;
    };

    std::vector<CsvRow> rows;
    for (const auto& s : scenarios)
        for (const auto& [name, g] : params)
            for (const auto& [v, c] : empirical_cdf(column(s, g)))
                rows.push_back({s, name, format_double(v), format_double(c)});
    write_table(dir / "summary" / "parameter_cdf.csv", {"scenario", "parameter", "value", "cdf"}, rows);
    manifest.add_output(dir / "summary" / "parameter_cdf.csv");

    rows.clear();
    for (const auto& s : scenarios)
        for (const auto& [v, c] : empirical_cdf(column(s, &FitRecord::rmse)))
            rows.push_back({s, model, format_double(v), format_double(c)});
    write_table(dir / "summary" / "rmse_cdf.csv", {"scenario", "model", "value", "cdf"}, rows);
    manifest.add_output(dir / "summary" / "rmse_cdf.csv");
}

}  // namespace

int cmd_merge_fit(const MergeFitOptions& o, const std::vector<std::string>& argv) {
    if (o.model != "iftr" && o.model != "gtrv") {
        std::cerr << "merge-fit: unknown model '" << o.model << "' (iftr, gtrv)\n";
        return kExitInput;
    }
    const fs::path dir(o.out_dir);
    nlohmann::json opts = {
        {"inputs", o.inputs},         {"scenarios", o.scenarios},
        {"seed", o.seed},             {"configs", o.configs},
        {"only", o.only},             {"model", o.model},
        {"population", o.population}, {"generations", o.generations},
        {"elite", o.elite},           {"stall_window", o.stall_window},
        {"stall_tolerance", o.stall_tolerance},
        {"k_min_db", o.k_min_db ? nlohmann::json(*o.k_min_db) : nlohmann::json()},
        {"k_max_db", o.k_max_db},     {"m_min", o.m_min},
        {"m_max", o.m_max},           {"pdf_points", o.pdf_points},
        {"phase_bins", o.phase_bins}};
    Manifest manifest("merge-fit", argv, opts);

    std::vector<ScenarioSet> sets;
    std::vector<Job> jobs;
    try {
        sets = load_sets(o, manifest);
        // the same tag-level configurations are used for every scenario
        const auto configs = sample_configs(o.configs, derive_seed(o.seed, {0xC0F1}));
        for (std::size_t s = 0; s < sets.size(); ++s) {
            const std::set<std::string> wanted(o.only.begin(), o.only.end());
            std::set<std::string> missing = wanted;
            for (std::size_t i = 0; i < configs.size(); ++i) {
                if (!wanted.empty() && !wanted.count(configs[i].id)) continue;
                missing.erase(configs[i].id);
                jobs.push_back({s, i, configs[i]});
            }
            if (!missing.empty())
                throw std::invalid_argument("unknown configuration id '" + *missing.begin() + "'");
        }
    } catch (const std::exception& e) {
        std::cerr << "merge-fit: " << e.what() << '\n';
        return kExitInput;
    }

    std::vector<FitRecord> records(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            const Job& job = jobs[i];
            const ScenarioSet& set = sets[job.set];
            const fs::path plots = dir / "configs" / set.name / job.config.id;
            try {
                records[i] = fit_one(set, job, o, plots);
            } catch (const std::exception& e) {
                FitRecord& r = records[i];
                r.scenario = set.name;
                r.config = job.config.id;
                r.pair_kind = job.config.pair_kind == PairKind::shared_tx ? "shared_tx" : "shared_rx";
                r.first = job.config.first.label();
                r.second = job.config.second.label();
                r.model = o.model;
                r.status = "failed";
                r.message = e.what();
                std::lock_guard lock(log_mutex);
                std::cerr << "merge-fit: " << set.name << '/' << job.config.id << ": " << e.what() << '\n';
            }
        }
    };
    const unsigned n_threads = std::max(1u, std::min<unsigned>(o.jobs, static_cast<unsigned>(jobs.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    fs::create_directories(dir);
    {
        std::ofstream out(dir / "results.csv");
        write_fit_records(out, records);
        if (!out) throw std::runtime_error("cannot write results.csv");
    }
    manifest.add_output(dir / "results.csv");
    write_summaries(dir, records, o.model, manifest);

    std::size_t failed = 0;
    for (const auto& r : records) failed += r.status != "ok";
    const int code = failed ? kExitPartial : kExitOk;
    manifest.set("configurations", records.size());
    manifest.set("plots", "configs/<scenario>/<id>/{pdf,phase,cir}.csv");
    manifest.set("failed", failed);
    manifest.write(dir, code);
    std::cout << records.size() << " configurations fitted, " << failed << " failed\n";
    return code;
}

}  // namespace tworay::cli
