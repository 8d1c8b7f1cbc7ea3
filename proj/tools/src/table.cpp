// SPDX-License-Identifier: Apache-2.0
#include "table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace tworay::cli {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument("not a number: '" + std::string(s) + "'");
    return v;
}

void write_csv_row(std::ostream& out, const CsvRow& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ',';
        const std::string& f = row[i];
        if (f.find_first_of(",\"\n\r") == std::string::npos) {
            out << f;
            continue;
        }
        out << '"';
        for (char c : f) {
            if (c == '"') out << '"';
            out << c;
        }
        out << '"';
    }
    out << '\n';
}

std::vector<CsvRow> read_csv(std::istream& in) {
    std::vector<CsvRow> rows;
    CsvRow row;
    std::string field;
    bool quoted = false, any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get();
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else if (c != '\r') {
            field += c;
        }
    }
    if (quoted) throw std::invalid_argument("csv: unterminated quoted field");
    if (any) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::optional<double> parse_opt(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return parse_double(s);
}

}  // namespace

const CsvRow& fit_record_header() {
    static const CsvRow header = {
        "scenario", "config", "pair_kind", "first",  "second", "model",   "status",
        "k_db",     "k_linear", "delta",   "m1",     "m2",     "kappa",   "phi",
        "mse_vm",   "omega",  "mse",       "rmse",   "mae",    "ks",      "epsilon_n",
        "generations", "message"};
    return header;
}

void write_fit_records(std::ostream& out, std::span<const FitRecord> records) {
    write_csv_row(out, fit_record_header());
    for (const auto& r : records) {
        write_csv_row(out, {r.scenario, r.config, r.pair_kind, r.first, r.second, r.model,
                            r.status, opt(r.k_db), opt(r.k_linear), opt(r.delta), opt(r.m1),
                            opt(r.m2), opt(r.kappa), opt(r.phi), opt(r.mse_vm), opt(r.omega),
                            opt(r.mse), opt(r.rmse), opt(r.mae), opt(r.ks), opt(r.epsilon_n),
                            opt(r.generations), r.message});
    }
}

std::vector<FitRecord> read_fit_records(std::istream& in) {
    const auto rows = read_csv(in);
    if (rows.empty() || rows.front() != fit_record_header())
        throw std::invalid_argument("results table: unexpected header");
    std::vector<FitRecord> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const CsvRow& f = rows[i];
        if (f.size() != fit_record_header().size())
            throw std::invalid_argument("results table: row " + std::to_string(i) + " has " +
                                        std::to_string(f.size()) + " fields");
        FitRecord r;
        r.scenario = f[0];
        r.config = f[1];
        r.pair_kind = f[2];
        r.first = f[3];
        r.second = f[4];
        r.model = f[5];
        r.status = f[6];
        r.k_db = parse_opt(f[7]);
        r.k_linear = parse_opt(f[8]);
        r.delta = parse_opt(f[9]);
        r.m1 = parse_opt(f[10]);
        r.m2 = parse_opt(f[11]);
        r.kappa = parse_opt(f[12]);
        r.phi = parse_opt(f[13]);
        r.mse_vm = parse_opt(f[14]);
        r.omega = parse_opt(f[15]);
        r.mse = parse_opt(f[16]);
        r.rmse = parse_opt(f[17]);
        r.mae = parse_opt(f[18]);
        r.ks = parse_opt(f[19]);
        r.epsilon_n = parse_opt(f[20]);
        r.generations = parse_opt(f[21]);
        r.message = f[22];
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> values) {
    std::erase_if(values, [](double v) { return !std::isfinite(v); });
    std::sort(values.begin(), values.end());
    std::vector<std::pair<double, double>> out;
    const double n = static_cast<double>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        out.emplace_back(values[i], static_cast<double>(i + 1) / n);
    return out;
}

double median(std::vector<double> values) {
    std::erase_if(values, [](double v) { return !std::isfinite(v); });
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace tworay::cli
