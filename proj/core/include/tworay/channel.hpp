// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tworay/models.hpp"

namespace tworay {

struct FrequencyGrid {
    double f_start = 24.25e9;
    double f_step = 5e6;
    std::size_t n_points = 651;

    double frequency(std::size_t i) const { return f_start + f_step * static_cast<double>(i); }
    bool operator==(const FrequencyGrid&) const = default;
};

enum class Scenario { anechoic, reverberation, indoor };

std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view name);  // throws std::invalid_argument

inline constexpr int kArraySide = 11;
inline constexpr double kArrayPitch = 0.04;  // metres
inline constexpr std::size_t kChannelsPerScenario = 1089;

// Receiver array position and transmitter orientation tags (-1, 0, 1).
struct ChannelKey {
    int row = 0;
    int col = 0;
    int az_tag = 0;
    int roll_tag = 0;

    bool operator==(const ChannelKey&) const = default;
    std::string label() const;  // e.g. "r3c7a-1p0"
};

// Index of a key inside a synthesized scenario set.
std::size_t channel_index(const ChannelKey& key);

struct ChannelMeta {
    std::string scenario;
    ChannelKey key;
    // power the synthesizer aimed for: sum of specular powers plus diffuse variance
    double configured_power = 0.0;
    std::vector<std::string> parents;  // empty for synthesized channels
};

struct ChannelResponse {
    FrequencyGrid grid;
    std::vector<std::complex<double>> h;
    ChannelMeta meta;
};

struct RaySpec {
    double amplitude = 0.0;
    double delay = 0.0;
    double phase0 = 0.0;
    std::array<double, 3> direction{0.0, 1.0, 0.0};
};

// Scenario preset; the defaults of make_preset() are synthetic stand-ins for the chambers.
struct ScenarioPreset {
    Scenario kind = Scenario::anechoic;
    double tx_distance = 1.6;                // metres, direct or folded path to the array centre
    std::vector<double> azimuth_deg{-30.0, 0.0, 30.0};  // angle for tags -1, 0, 1
    std::vector<double> roll_deg{-30.0, 0.0, 30.0};
    double pattern_exponent = 32.0;          // power gain cos^n, -20 dB at 30 degrees
    double ray0_azimuth_deg = 0.0;           // departure angle of the first ray
    int rays_min = 1, rays_max = 1;
    double ray_db_min = 0.0, ray_db_max = 0.0;  // power of ray k > 0 relative to ray 0
    double extra_path_min = 0.0, extra_path_max = 0.0;  // metres added for rays k > 0
    double spread_deg = 0.0;                 // departure angle spread of rays k > 0
    double diffuse_db_min = 30.0, diffuse_db_max = 30.0;  // diffuse power below specular
};

ScenarioPreset make_preset(Scenario kind);

std::vector<ChannelResponse> synth_scenario(Scenario kind, std::uint64_t seed);
std::vector<ChannelResponse> synth_scenario(const ScenarioPreset& preset, std::uint64_t seed,
                                            const FrequencyGrid& grid = {});

// H(f) = sum_k a_k exp(-j 2 pi f tau_k + j theta_k) on the grid.
std::vector<std::complex<double>> rays_response(std::span<const RaySpec> rays,
                                                const FrequencyGrid& grid);

class ConstraintError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Pointwise sum; channels must share either the Tx orientation or the Rx position.
ChannelResponse merge(const ChannelResponse& h1, const ChannelResponse& h2);

enum class PairKind { shared_tx, shared_rx };

struct MergedConfig {
    std::string id;
    PairKind pair_kind = PairKind::shared_tx;
    ChannelKey first;
    ChannelKey second;
};

std::string config_label(std::size_t index);  // A..Z, AA, AB, ...

// Default 142 draws with 131 shared-Tx and 11 shared-Rx entries; other counts keep the ratio.
std::vector<MergedConfig> sample_configs(std::size_t count, std::uint64_t seed);

// Gaussian KDE (Silverman bandwidth) on [0, 1.05 max] with n_points grid entries.
AmplitudePdf kde_pdf(std::span<const double> samples, std::size_t n_points = 100);
AmplitudePdf empirical_pdf(const ChannelResponse& h, std::size_t n_points = 100);

struct CircularPdf {
    std::vector<double> centers;  // bin centres on [-pi, pi]
    std::vector<double> density;
    double bin_width = 0.0;
};

CircularPdf phase_diff_pdf(const ChannelResponse& h1, const ChannelResponse& h2,
                           std::size_t n_bins = 64);
CircularPdf circular_histogram(std::span<const double> angles, std::size_t n_bins);

enum class Window { none, hann };

struct DelayProfile {
    std::vector<double> delay;      // seconds
    std::vector<double> magnitude;  // |IDFT|
};

DelayProfile cir(const ChannelResponse& h, Window window = Window::hann);

// Binary channel-set container (little-endian):
//   magic "TWRYCHS1", u32 version, u32 scenario length, scenario bytes,
//   f64 f_start, f64 f_step, u64 n_points, u64 n_channels, then per channel
//   i32 row, col, az_tag, roll_tag, f64 configured_power, 2*n_points f64 (re, im interleaved).
void write_channel_set(std::ostream& out, std::span<const ChannelResponse> set);
std::vector<ChannelResponse> read_channel_set(std::istream& in);
void write_channel_set(const std::string& path, std::span<const ChannelResponse> set);
std::vector<ChannelResponse> read_channel_set(const std::string& path);

}  // namespace tworay
