// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "commands.hpp"
#include "manifest.hpp"
#include "table.hpp"

namespace fs = std::filesystem;

namespace tworay::cli {

int cmd_report(const ReportOptions& o, const std::vector<std::string>& argv) {
    fs::path results(o.input);
    if (fs::is_directory(results)) results /= "results.csv";
    std::vector<FitRecord> records;
    try {
        std::ifstream in(results);
        if (!in) throw std::invalid_argument("cannot open " + results.string());
        records = read_fit_records(in);
    } catch (const std::exception& e) {
        std::cerr << "report: " << e.what() << '\n';
        return kExitInput;
    }

    std::vector<std::string> scenarios;
    for (const auto& r : records)
        if (std::find(scenarios.begin(), scenarios.end(), r.scenario) == scenarios.end())
            scenarios.push_back(r.scenario);

    using Getter = std::optional<double> FitRecord::*;
    const std::vector<std::pair<std::string, Getter>> medians = {
        {"median_k_db", &FitRecord::k_db}, {"median_delta", &FitRecord::delta},
        {"median_m1", &FitRecord::m1},     {"median_m2", &FitRecord::m2},
        {"median_kappa", &FitRecord::kappa}, {"median_phi", &FitRecord::phi},
        {"median_rmse", &FitRecord::rmse}};
    CsvRow header = {"scenario", "model", "configs", "ok", "failed", "shared_tx", "shared_rx"};
    for (const auto& m : medians) header.push_back(m.first);

    std::vector<CsvRow> rows;
    for (const auto& s : scenarios) {
        std::size_t n = 0, ok = 0, tx = 0, rx = 0;
        std::string model;
        for (const auto& r : records) {
            if (r.scenario != s) continue;
            ++n;
            ok += r.status == "ok";
            tx += r.pair_kind == "shared_tx";
            rx += r.pair_kind == "shared_rx";
            model = r.model;
        }
        CsvRow row = {s, model, std::to_string(n), std::to_string(ok), std::to_string(n - ok),
                      std::to_string(tx), std::to_string(rx)};
        for (const auto& [name, g] : medians) {
            std::vector<double> v;
            for (const auto& r : records)
                if (r.scenario == s && r.status == "ok" && (r.*g)) v.push_back(*(r.*g));
            row.push_back(v.empty() ? std::string() : format_double(median(v)));
        }
        rows.push_back(std::move(row));
    }

    // human-readable view
    std::printf("%-14s %-5s %7s %5s %6s %9s %9s %8s %8s %11s\n", "scenario", "model", "configs",
                "ok", "failed", "tx/rx", "K [dB]", "Delta", "m1|kappa", "RMSE");
    for (const auto& r : rows) {
        auto num = [](const std::string& s) { return s.empty() ? std::nan("") : parse_double(s); };
        const bool iftr = r[1] == "iftr";
        std::printf("%-14s %-5s %7s %5s %6s %9s %9.2f %8.3f %8.3f %11.4g\n", r[0].c_str(), r[1].c_str(),
                    r[2].c_str(), r[3].c_str(), r[4].c_str(), (r[5] + "/" + r[6]).c_str(), num(r[7]),
                    num(r[8]), num(iftr ? r[9] : r[11]), num(r[13]));
    }

    if (o.out_dir.empty()) return kExitOk;
    const fs::path dir(o.out_dir);
    fs::create_directories(dir);
    Manifest manifest("report", argv, {{"input", o.input}});
    manifest.add_input(results);
    {
        std::ofstream out(dir / "report.csv");
        write_csv_row(out, header);
        for (const auto& r : rows) write_csv_row(out, r);
        if (!out) throw std::runtime_error("cannot write report.csv");
    }
    manifest.add_output(dir / "report.csv");
    manifest.write(dir, kExitOk);
    return kExitOk;
}

}  // namespace tworay::cli
