// SPDX-License-Identifier: Apache-2.0
#include "manifest.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include <openssl/evp.h>

namespace tworay::cli {

namespace {

std::string to_hex(const unsigned char* d, unsigned n) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (unsigned i = 0; i < n; ++i) {
        s += digits[d[i] >> 4];
        s += digits[d[i] & 15];
    }
    return s;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
        throw std::runtime_error("sha256 failed");
    return to_hex(md, len);
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return sha256_hex(std::string(std::istreambuf_iterator<char>(in), {}));
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Manifest::Manifest(std::string command, std::vector<std::string> argv, nlohmann::json options)
    : command_(std::move(command)), argv_(std::move(argv)), options_(std::move(options)),
      started_(utc_timestamp()) {}

void Manifest::add_input(const std::filesystem::path& p) { inputs_.push_back(p); }
void Manifest::add_output(const std::filesystem::path& p) { outputs_.push_back(p); }

void Manifest::write(const std::filesystem::path& dir, int exit_code) {
    nlohmann::json j;
    j["command"] = command_;
    j["argv"] = argv_;
    j["tool_version"] = TWORAY_VERSION;
    j["seed"] = options_.value("seed", nlohmann::json());
    j["options"] = options_;
    j["config_digest"] = sha256_hex(options_.dump());
    j["started"] = started_;
    j["finished"] = utc_timestamp();
    j["exit_code"] = exit_code;
    auto files = [&](const std::vector<std::filesystem::path>& list) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& p : list) {
            nlohmann::json e;
            e["path"] = p.lexically_relative(dir).empty() ? p.string()
                                                          : p.lexically_relative(dir).string();
            if (std::filesystem::is_regular_file(p)) e["sha256"] = sha256_file(p);
            arr.push_back(std::move(e));
        }
        return arr;
    };
    j["inputs"] = files(inputs_);
    j["outputs"] = files(outputs_);
    for (auto& [k, v] : extra_.items()) j[k] = v;
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "manifest.json");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
}

}  // namespace tworay::cli
