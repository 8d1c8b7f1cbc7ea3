// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tworay::cli {

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);
std::string utc_timestamp();

// manifest.json in the output directory. Only "started"/"finished" vary between
// identical runs; the config digest covers the effective options.
class Manifest {
public:
    Manifest(std::string command, std::vector<std::string> argv, nlohmann::json options);

    void add_input(const std::filesystem::path& p);
    void add_output(const std::filesystem::path& p);
    void set(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }
    void write(const std::filesystem::path& dir, int exit_code);

private:
    std::string command_;
    std::vector<std::string> argv_;
    nlohmann::json options_;
    nlohmann::json extra_ = nlohmann::json::object();
    std::string started_;
    std::vector<std::filesystem::path> inputs_;
    std::vector<std::filesystem::path> outputs_;
};

}  // namespace tworay::cli
