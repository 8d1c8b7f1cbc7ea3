// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "commands.hpp"
#include "manifest.hpp"
#include "table.hpp"
#include "tworay/models.hpp"

namespace tworay::cli {

namespace {

std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return x;
}

bool whole(double v) { return v == std::nearbyint(v); }

}  // namespace

int cmd_eval(const EvalOptions& o, const std::vector<std::string>& argv) {
    constexpr double pi = std::numbers::pi;
    const bool angular = o.model == "vonmises";
    const double k = o.k_db ? std::pow(10.0, *o.k_db / 10.0) : o.k.value_or(0.0);
    const double lo = o.x_min.value_or(angular ? -pi : 0.0);
    const double hi = o.x_max.value_or(angular ? pi : 3.0);
    const std::size_t n = o.points ? o.points : (angular ? 65 : 61);
    if (!(hi > lo)) {
        std::cerr << "eval: the range must satisfy min < max\n";
        return kExitInput;
    }
    const auto x = linspace(lo, hi, n);

    std::ostringstream table;
    try {
        if (o.model == "iftr") {
            const IftrParams p{k, o.delta, o.m1, o.m2, o.omega};
            p.validate();
            const auto quad = iftr_pdf_quadrature(p, x);
            const bool closed = whole(o.m1) && whole(o.m2);
            write_csv_row(table, closed ? CsvRow{"r", "quadrature", "closed_form"}
                                        : CsvRow{"r", "quadrature"});
            for (std::size_t i = 0; i < n; ++i) {
                CsvRow row{format_double(x[i]), format_double(quad[i])};
                if (closed) {
                    try {
                        row.push_back(format_double(iftr_pdf_closed(p, x[i])));
                    } catch (const EvaluationError&) {
                        row.emplace_back();
                    }
                }
                write_csv_row(table, row);
            }
        } else if (o.model == "gtrv") {
            const GtrvParams p{k, o.delta, o.kappa, o.phi, o.omega};
            p.validate();
            write_csv_row(table, {"r", "density"});
            for (double r : x) write_csv_row(table, {format_double(r), format_double(gtrv_pdf(p, r))});
        } else if (o.model == "rician") {
            if (!(o.omega > 0.0)) throw DomainError("Omega must be > 0");
            const double sigma2 = 0.5 * o.omega / (1.0 + k);
            write_csv_row(table, {"r", "density"});
            for (double r : x)
                write_csv_row(table, {format_double(r), format_double(rician_pdf(k, sigma2, r))});
        } else if (angular) {
            write_csv_row(table, {"alpha", "density"});
            for (double a : x)
                write_csv_row(table, {format_double(a), format_double(von_mises_pdf(o.kappa, o.phi, a))});
        } else {
            std::cerr << "eval: unknown model '" << o.model << "' (iftr, gtrv, rician, vonmises)\n";
            return kExitInput;
        }
    } catch (const DomainError& e) {
        std::cerr << "eval: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        std::cerr << "eval: " << e.what() << '\n';
        return kExitInput;
    }

    if (o.out_dir.empty()) {
        std::cout << table.str();
        return kExitOk;
    }
    const std::filesystem::path dir(o.out_dir);
    std::filesystem::create_directories(dir);
    nlohmann::json opts = {{"model", o.model}, {"k", k},         {"delta", o.delta},
                           {"m1", o.m1},       {"m2", o.m2},     {"omega", o.omega},
                           {"kappa", o.kappa}, {"phi", o.phi},   {"min", lo},
                           {"max", hi},        {"points", n}};
    Manifest manifest("eval", argv, opts);
    const auto path = dir / ("eval_" + o.model + ".csv");
    std::ofstream(path) << table.str();
    manifest.add_output(path);
    manifest.write(dir, kExitOk);
    return kExitOk;
}

}  // namespace tworay::cli
