// SPDX-License-Identifier: Apache-2.0
#include "tworay/channel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>
#include <random>
#include <stdexcept>

namespace tworay {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLight = 299792458.0;
constexpr double kHornGain = 100.0;  // 20 dBi at each end, amplitude product

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double deg(double d) { return d * kPi / 180.0; }

double pattern(double offset_rad, double exponent) {
    const double c = std::cos(offset_rad);
    return c > 0.0 ? std::pow(c, 0.5 * exponent) : 0.0;
}

}  // namespace

std::string_view to_string(Scenario s) {
    switch (s) {
        case Scenario::anechoic: return "anechoic";
        case Scenario::reverberation: return "reverberation";
        case Scenario::indoor: return "indoor";
    }
    return "unknown";
}

Scenario parse_scenario(std::string_view name) {
    if (name == "anechoic") return Scenario::anechoic;
    if (name == "reverberation") return Scenario::reverberation;
    if (name == "indoor") return Scenario::indoor;
    throw std::invalid_argument("unknown scenario '" + std::string(name) +
                                "' (expected anechoic, reverberation or indoor)");
}

std::string ChannelKey::label() const {
    return "r" + std::to_string(row) + "c" + std::to_string(col) + "a" + std::to_string(az_tag) +
           "p" + std::to_string(roll_tag);
}

std::size_t channel_index(const ChannelKey& key) {
    if (key.row < 0 || key.row >= kArraySide || key.col < 0 || key.col >= kArraySide ||
        std::abs(key.az_tag) > 1 || std::abs(key.roll_tag) > 1)
        throw std::out_of_range("channel key outside the 11x11 array or tag range");
    const auto orient = static_cast<std::size_t>((key.az_tag + 1) * 3 + (key.roll_tag + 1));
    return orient * kArraySide * kArraySide + static_cast<std::size_t>(key.row * kArraySide + key.col);
}

ScenarioPreset make_preset(Scenario kind) {
    ScenarioPreset p;
    p.kind = kind;
    switch (kind) {
        case Scenario::anechoic:
            // absorber-covered mounting posts leave a few weak reflections
            p.rays_min = 2;
            p.rays_max = 3;
            p.ray_db_min = -22.0;
            p.ray_db_max = -16.0;
            p.extra_path_min = 0.3;
            p.extra_path_max = 1.5;
            p.spread_deg = 20.0;
            p.diffuse_db_min = 18.0;
            p.diffuse_db_max = 24.0;
            break;
        case Scenario::reverberation:
            p.tx_distance = 6.0;
            p.rays_min = 4;
            p.rays_max = 7;
            p.ray_db_min = -4.0;
            p.ray_db_max = 0.0;
            p.extra_path_min = 0.5;
            p.extra_path_max = 9.0;
            p.spread_deg = 12.0;
            p.diffuse_db_min = 10.0;
            p.diffuse_db_max = 15.0;
            break;
        case Scenario::indoor:
            p.tx_distance = 4.0;
            p.azimuth_deg = {-30.0, -15.0, 0.0};
            p.ray0_azimuth_deg = -15.0;
            p.rays_min = 3;
            p.rays_max = 6;
            p.ray_db_min = -10.0;
            p.ray_db_max = -3.0;
            p.extra_path_min = 0.5;
            p.extra_path_max = 6.0;
            p.spread_deg = 40.0;
            p.diffuse_db_min = 12.0;
            p.diffuse_db_max = 18.0;
            break;
    }
    return p;
}

std::vector<std::complex<double>> rays_response(std::span<const RaySpec> rays,
                                                const FrequencyGrid& grid) {
    std::vector<std::complex<double>> h(grid.n_points);
    for (const RaySpec& ray : rays) {
        // rotate by a fixed step instead of calling exp per point; renormalize now and then
        const std::complex<double> step = std::polar(1.0, -2.0 * kPi * grid.f_step * ray.delay);
        std::complex<double> ph = std::polar(ray.amplitude, ray.phase0 - 2.0 * kPi * grid.f_start * ray.delay);
        for (std::size_t i = 0; i < grid.n_points; ++i) {
            if (i % 64 == 0)
                ph = std::polar(ray.amplitude, ray.phase0 - 2.0 * kPi * grid.frequency(i) * ray.delay);
            h[i] += ph;
            ph *= step;
        }
    }
    return h;
}

std::vector<ChannelResponse> synth_scenario(Scenario kind, std::uint64_t seed) {
    return synth_scenario(make_preset(kind), seed);
}

std::vector<ChannelResponse> synth_scenario(const ScenarioPreset& preset, std::uint64_t seed,
                                            const FrequencyGrid& grid) {
    if (preset.azimuth_deg.size() != 3 || preset.roll_deg.size() != 3)
        throw std::invalid_argument("preset needs three azimuth and three roll angles");
    if (preset.rays_min < 1 || preset.rays_max < preset.rays_min)
        throw std::invalid_argument("preset ray count range is empty");

    struct ImageSource {
        std::array<double, 3> pos;
        double azimuth;   // departure angle at the Tx, radians
        double roll;      // polarization rotation picked up on the way
        double amplitude; // at the array centre, before antenna gains
        double phase;
    };
    std::mt19937_64 rng(splitmix64(seed ^ static_cast<std::uint64_t>(preset.kind)));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
    const int n_rays = preset.rays_min + static_cast<int>(u01(rng) * (preset.rays_max - preset.rays_min + 1));
    const double lambda = kLight / grid.frequency(grid.n_points / 2);
    std::vector<ImageSource> sources;
    for (int k = 0; k < std::min(n_rays, preset.rays_max); ++k) {
        ImageSource s;
        const double path = k == 0 ? preset.tx_distance
                                   : preset.tx_distance + uniform(preset.extra_path_min, preset.extra_path_max);
        s.azimuth = deg(preset.ray0_azimuth_deg) +
                    (k == 0 ? 0.0 : deg(uniform(-preset.spread_deg, preset.spread_deg)));
        s.roll = k == 0 ? 0.0 : deg(uniform(-preset.spread_deg, preset.spread_deg));
        const double elevation = k == 0 ? 0.0 : deg(uniform(-10.0, 10.0));
        s.pos = {path * std::sin(s.azimuth) * std::cos(elevation), path * std::cos(s.azimuth) * std::cos(elevation),
                 path * std::sin(elevation)};
        const double rel_db = k == 0 ? 0.0 : uniform(preset.ray_db_min, preset.ray_db_max);
        s.amplitude = kHornGain * lambda / (4.0 * kPi * path) * std::pow(10.0, rel_db / 20.0);
        s.phase = uniform(-kPi, kPi);
        sources.push_back(s);
    }

    std::vector<ChannelResponse> out(kChannelsPerScenario);
    std::vector<RaySpec> rays(sources.size());
    for (int az = -1; az <= 1; ++az) {
        for (int roll = -1; roll <= 1; ++roll) {
            for (int row = 0; row < kArraySide; ++row) {
                for (int col = 0; col < kArraySide; ++col) {
                    const ChannelKey key{row, col, az, roll};
                    const std::size_t idx = channel_index(key);
                    const std::array<double, 3> rx = {(col - kArraySide / 2) * kArrayPitch, 0.0,
                                                      (row - kArraySide / 2) * kArrayPitch};
                    double specular = 0.0;
                    for (std::size_t k = 0; k < sources.size(); ++k) {
                        const auto& s = sources[k];
                        const double dx = s.pos[0] - rx[0], dy = s.pos[1] - rx[1], dz = s.pos[2] - rx[2];
                        const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
                        const double gain =
                            pattern(deg(preset.azimuth_deg[az + 1]) - s.azimuth, preset.pattern_exponent) *
                            pattern(deg(preset.roll_deg[roll + 1]) - s.roll, preset.pattern_exponent);
                        rays[k].amplitude = s.amplitude * gain;
                        rays[k].delay = dist / kLight;
                        rays[k].phase0 = s.phase;
                        rays[k].direction = {-dx / dist, -dy / dist, -dz / dist};
                        specular += rays[k].amplitude * rays[k].amplitude;
                    }
                    ChannelResponse& ch = out[idx];
                    ch.grid = grid;
                    ch.h = rays_response(rays, grid);
                    std::mt19937_64 local(splitmix64(seed * 0x100000001b3ULL + idx + 1));
                    std::uniform_real_distribution<double> lu(0.0, 1.0);
                    const double below =
                        preset.diffuse_db_min + (preset.diffuse_db_max - preset.diffuse_db_min) * lu(local);
                    const double diffuse = specular * std::pow(10.0, -below / 10.0);
                    std::normal_distribution<double> noise(0.0, std::sqrt(0.5 * diffuse));
                    for (auto& v : ch.h) {
                        const double re = noise(local);
                        const double im = noise(local);
                        v += std::complex<double>(re, im);
                    }
                    ch.meta.scenario = std::string(to_string(preset.kind));
                    ch.meta.key = key;
                    ch.meta.configured_power = specular + diffuse;
                }
            }
        }
    }
    return out;
}

ChannelResponse merge(const ChannelResponse& h1, const ChannelResponse& h2) {
    if (!(h1.grid == h2.grid) || h1.h.size() != h2.h.size())
        throw ConstraintError("merge: frequency grids differ");
    const ChannelKey& a = h1.meta.key;
    const ChannelKey& b = h2.meta.key;
    const bool shared_tx = a.az_tag == b.az_tag && a.roll_tag == b.roll_tag;
    const bool shared_rx = a.row == b.row && a.col == b.col;
    if (!shared_tx && !shared_rx)
        throw ConstraintError("merge: channels share neither the Tx orientation nor the Rx position (" +
                              a.label() + ", " + b.label() + ")");
    if (h1.meta.scenario != h2.meta.scenario)
        throw ConstraintError("merge: channels come from different scenarios");
    ChannelResponse out;
    out.grid = h1.grid;
    out.h.resize(h1.h.size());
    for (std::size_t i = 0; i < out.h.size(); ++i) out.h[i] = h1.h[i] + h2.h[i];
    out.meta.scenario = h1.meta.scenario;
    out.meta.key = a;
    out.meta.configured_power = h1.meta.configured_power + h2.meta.configured_power;
    auto parents_of = [](const ChannelResponse& h) {
        return h.meta.parents.empty() ? std::vector<std::string>{h.meta.key.label()} : h.meta.parents;
    };
    out.meta.parents = parents_of(h1);
    for (auto& p : parents_of(h2)) out.meta.parents.push_back(std::move(p));
    return out;
}

std::string config_label(std::size_t index) {
    std::string s;
    ++index;
    while (index > 0) {
        --index;
        s.insert(s.begin(), static_cast<char>('A' + index % 26));
        index /= 26;
    }
    return s;
}

std::vector<MergedConfig> sample_configs(std::size_t count, std::uint64_t seed) {
    if (count == 0) throw std::invalid_argument("sample_configs: count must be >= 1");
    const auto n_rx = static_cast<std::size_t>(std::llround(static_cast<double>(count) * 11.0 / 142.0));
    const std::size_t n_tx = count - n_rx;
    std::mt19937_64 rng(splitmix64(seed));

    struct Pair {
        int p, q;
        double dist;
    };
    std::vector<Pair> pairs;
    const int cells = kArraySide * kArraySide;
    for (int p = 0; p < cells; ++p)
        for (int q = p + 1; q < cells; ++q)
            pairs.push_back({p, q, std::hypot(p / kArraySide - q / kArraySide, p % kArraySide - q % kArraySide)});
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.dist < y.dist; });

    std::vector<MergedConfig> configs;
    configs.reserve(count);
    std::uniform_int_distribution<int> tag(-1, 1);
    std::uniform_int_distribution<int> coin(0, 1);
    // one pair per equal-count distance stratum keeps the distance law close to the all-pairs law
    for (std::size_t s = 0; s < n_tx; ++s) {
        const std::size_t lo = s * pairs.size() / n_tx, hi = (s + 1) * pairs.size() / n_tx;
        std::uniform_int_distribution<std::size_t> pick(lo, hi - 1);
        const Pair& pr = pairs[pick(rng)];
        const int az = tag(rng), roll = tag(rng);
        MergedConfig c;
        c.pair_kind = PairKind::shared_tx;
        c.first = {pr.p / kArraySide, pr.p % kArraySide, az, roll};
        c.second = {pr.q / kArraySide, pr.q % kArraySide, az, roll};
        if (coin(rng)) std::swap(c.first, c.second);
        configs.push_back(c);
    }
    std::uniform_int_distribution<int> cell(0, cells - 1);
    for (std::size_t s = 0; s < n_rx; ++s) {
        const int p = cell(rng);
        int a1 = tag(rng), r1 = tag(rng), a2 = a1, r2 = r1;
        // cycle through: new pointing only, new polarization only, both new
        const int type = static_cast<int>(s % 3);
        auto other = [&](int t) {
            int v;
            do v = tag(rng);
            while (v == t);
            return v;
        };
        if (type == 0 || type == 2) a2 = other(a1);
        if (type == 1 || type == 2) r2 = other(r1);
        MergedConfig c;
        c.pair_kind = PairKind::shared_rx;
        c.first = {p / kArraySide, p % kArraySide, a1, r1};
        c.second = {p / kArraySide, p % kArraySide, a2, r2};
        configs.push_back(c);
    }
    std::shuffle(configs.begin(), configs.end(), rng);
    for (std::size_t i = 0; i < configs.size(); ++i) configs[i].id = config_label(i);
    return configs;
}

AmplitudePdf kde_pdf(std::span<const double> samples, std::size_t n_points) {
    if (n_points < 10) throw std::invalid_argument("kde_pdf: n_points must be >= 10");
    if (samples.size() < 30) throw std::invalid_argument("kde_pdf: at least 30 samples are needed");
    std::vector<double> x(samples.begin(), samples.end());
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double mean = 0.0, m2 = 0.0;
    for (double v : x) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("kde_pdf: samples must be finite and >= 0");
        mean += v;
        m2 += v * v;
    }
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= n - 1.0;
    auto quantile = [&](double q) {
        const double pos = q * (n - 1.0);
        const auto i = static_cast<std::size_t>(pos);
        const double t = pos - static_cast<double>(i);
        return i + 1 < x.size() ? x[i] * (1.0 - t) + x[i + 1] * t : x[i];
    };
    const double iqr = quantile(0.75) - quantile(0.25);
    double spread = std::sqrt(var);
    if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
    double bw = 0.9 * spread * std::pow(n, -0.2);
    const double top = x.back();
    if (top <= 0.0) throw std::invalid_argument("kde_pdf: all samples are zero");
    const double step = 1.05 * top / static_cast<double>(n_points - 1);
    // a degenerate sample still needs a kernel that the grid can see
    bw = std::max(bw, 0.5 * step);

    AmplitudePdf pdf;
    pdf.grid.resize(n_points);
    pdf.density.resize(n_points);
    pdf.second_moment = m2 / n;
    pdf.bandwidth = bw;
    const double norm = 1.0 / (n * bw * std::sqrt(2.0 * kPi));
    for (std::size_t i = 0; i < n_points; ++i) {
        const double g = step * static_cast<double>(i);
        pdf.grid[i] = g;
        auto lo = std::lower_bound(x.begin(), x.end(), g - 9.0 * bw);
        auto hi = std::upper_bound(lo, x.end(), g + 9.0 * bw);
        double s = 0.0;
        for (auto it = lo; it != hi; ++it) {
            const double z = (g - *it) / bw;
            s += std::exp(-0.5 * z * z);
        }
        pdf.density[i] = s * norm;
    }
    return pdf;
}

AmplitudePdf empirical_pdf(const ChannelResponse& h, std::size_t n_points) {
    std::vector<double> mag(h.h.size());
    for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(h.h[i]);
    return kde_pdf(mag, n_points);
}

CircularPdf circular_histogram(std::span<const double> angles, std::size_t n_bins) {
    if (n_bins < 2) throw std::invalid_argument("circular_histogram: need at least 2 bins");
    if (angles.empty()) throw std::invalid_argument("circular_histogram: no samples");
    CircularPdf out;
    out.bin_width = 2.0 * kPi / static_cast<double>(n_bins);
    out.centers.resize(n_bins);
    out.density.assign(n_bins, 0.0);
    for (std::size_t b = 0; b < n_bins; ++b)
        out.centers[b] = -kPi + (static_cast<double>(b) + 0.5) * out.bin_width;
    for (double a : angles) {
        const double w = wrap_angle(a);
        auto b = static_cast<std::size_t>((w + kPi) / out.bin_width);
        if (b >= n_bins) b = n_bins - 1;
        out.density[b] += 1.0;
    }
    const double scale = 1.0 / (static_cast<double>(angles.size()) * out.bin_width);
    for (double& d : out.density) d *= scale;
    return out;
}

CircularPdf phase_diff_pdf(const ChannelResponse& h1, const ChannelResponse& h2, std::size_t n_bins) {
    if (!(h1.grid == h2.grid) || h1.h.size() != h2.h.size())
        throw std::invalid_argument("phase_diff_pdf: frequency grids differ");
    std::vector<double> diff(h1.h.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = std::arg(h2.h[i] * std::conj(h1.h[i]));
    return circular_histogram(diff, n_bins);
}

namespace {
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

DelayProfile cir(const ChannelResponse& h, Window window) {
    const std::size_t n = h.h.size();
    if (n == 0) throw std::invalid_argument("cir: empty channel");
    fftw_complex* buf = fftw_alloc_complex(n);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    double wsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double w = 1.0;
        if (window == Window::hann && n > 1)
            w = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n - 1)));
        wsum += w;
        buf[i][0] = h.h[i].real() * w;
        buf[i][1] = h.h[i].imag() * w;
    }
    fftw_execute(plan);
    // without a window this is the plain 1/N inverse DFT; with one, the coherent gain is undone
    const double scale = window == Window::none ? 1.0 / static_cast<double>(n) : 1.0 / wsum;
    DelayProfile out;
    out.delay.resize(n);
    out.magnitude.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        out.delay[k] = static_cast<double>(k) / (static_cast<double>(n) * h.grid.f_step);
        out.magnitude[k] = std::hypot(buf[k][0], buf[k][1]) * scale;
    }
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(buf);
    return out;
}

// ---------------------------------------------------------------- channel-set files

namespace {

static_assert(std::endian::native == std::endian::little, "channel-set I/O assumes a little-endian host");

constexpr char kMagic[8] = {'T', 'W', 'R', 'Y', 'C', 'H', 'S', '1'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("channel set: truncated input");
    return v;
}

}  // namespace

void write_channel_set(std::ostream& out, std::span<const ChannelResponse> set) {
    if (set.empty()) throw std::invalid_argument("channel set: nothing to write");
    const FrequencyGrid& grid = set.front().grid;
    const std::string& scenario = set.front().meta.scenario;
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(scenario.size()));
    out.write(scenario.data(), static_cast<std::streamsize>(scenario.size()));
    put<double>(out, grid.f_start);
    put<double>(out, grid.f_step);
    put<std::uint64_t>(out, grid.n_points);
    put<std::uint64_t>(out, set.size());
    for (const ChannelResponse& ch : set) {
        if (!(ch.grid == grid) || ch.h.size() != grid.n_points)
            throw std::invalid_argument("channel set: channels must share one frequency grid");
        put<std::int32_t>(out, ch.meta.key.row);
        put<std::int32_t>(out, ch.meta.key.col);
        put<std::int32_t>(out, ch.meta.key.az_tag);
        put<std::int32_t>(out, ch.meta.key.roll_tag);
        put<double>(out, ch.meta.configured_power);
        out.write(reinterpret_cast<const char*>(ch.h.data()),
                  static_cast<std::streamsize>(ch.h.size() * sizeof(std::complex<double>)));
    }
    if (!out) throw std::runtime_error("channel set: write failed");
}

std::vector<ChannelResponse> read_channel_set(std::istream& in) {
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw std::runtime_error("channel set: bad magic");
    if (get<std::uint32_t>(in) != kVersion) throw std::runtime_error("channel set: unsupported version");
    const auto len = get<std::uint32_t>(in);
    if (len > 256) throw std::runtime_error("channel set: scenario name too long");
    std::string scenario(len, '\0');
    in.read(scenario.data(), len);
    FrequencyGrid grid;
    grid.f_start = get<double>(in);
    grid.f_step = get<double>(in);
    grid.n_points = get<std::uint64_t>(in);
    const auto count = get<std::uint64_t>(in);
    if (grid.n_points == 0 || grid.n_points > (1u << 24) || count > (1u << 24))
        throw std::runtime_error("channel set: implausible sizes");
    std::vector<ChannelResponse> set(count);
    for (auto& ch : set) {
        ch.grid = grid;
        ch.meta.scenario = scenario;
        ch.meta.key.row = get<std::int32_t>(in);
        ch.meta.key.col = get<std::int32_t>(in);
        ch.meta.key.az_tag = get<std::int32_t>(in);
        ch.meta.key.roll_tag = get<std::int32_t>(in);
        ch.meta.configured_power = get<double>(in);
        ch.h.resize(grid.n_points);
        in.read(reinterpret_cast<char*>(ch.h.data()),
                static_cast<std::streamsize>(ch.h.size() * sizeof(std::complex<double>)));
        if (!in) throw std::runtime_error("channel set: truncated input");
    }
    return set;
}

void write_channel_set(const std::string& path, std::span<const ChannelResponse> set) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_channel_set(out, set);
}

std::vector<ChannelResponse> read_channel_set(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_channel_set(in);
}

}  // namespace tworay
