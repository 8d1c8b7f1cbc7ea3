// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tworay::cli {

// Shortest form that still carries 17 significant digits, so values round-trip.
std::string format_double(double v);
double parse_double(std::string_view s);  // throws std::invalid_argument

using CsvRow = std::vector<std::string>;

void write_csv_row(std::ostream& out, const CsvRow& row);
// RFC 4180 subset: quoted fields may hold commas, quotes ("") and newlines.
std::vector<CsvRow> read_csv(std::istream& in);

// One merge-fit configuration. Columns that do not apply to the model stay empty.
struct FitRecord {
    std::string scenario;
    std::string config;
    std::string pair_kind;
    std::string first;
    std::string second;
    std::string model;
    std::string status;  // "ok" or "failed"
    std::optional<double> k_db;
    std::optional<double> k_linear;
    std::optional<double> delta;
    std::optional<double> m1;
    std::optional<double> m2;
    std::optional<double> kappa;
    std::optional<double> phi;
    std::optional<double> mse_vm;
    std::optional<double> omega;
    std::optional<double> mse;
    std::optional<double> rmse;
    std::optional<double> mae;
    std::optional<double> ks;
    std::optional<double> epsilon_n;
    std::optional<double> generations;
    std::string message;

    bool operator==(const FitRecord&) const = default;
};

const CsvRow& fit_record_header();
void write_fit_records(std::ostream& out, std::span<const FitRecord> records);
std::vector<FitRecord> read_fit_records(std::istream& in);

// Empirical CDF rows (value, i / n) of the finite entries.
std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> values);
double median(std::vector<double> values);  // NaN when empty

}  // namespace tworay::cli
