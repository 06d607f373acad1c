// SPDX-License-Identifier: Apache-2.0
//
// cirad: compressive illumination radar simulation and sparse recovery
// Copyright (C) 2026 The cirad authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef CIRAD_CONFIG_HPP
#define CIRAD_CONFIG_HPP

#include "errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace cirad
{

/// Pulse length used when none is given (65.86 MHz chirp over 100 m swath).
inline constexpr double default_pulse_tau = 6.86e-5;
inline constexpr double speed_of_light = 299792458.0;

/// User-facing parameters. Optional fields are derived by `build_config`:
///   unambiguous_tu -> N / B
///   n_samples_M    -> N (no compression)
///   pulse_tau      -> alias_p * N / B if alias_p is given, else 6.86e-5 s
///   rx_spacing_dR  -> 0.5 * N_T
///   alias_p        -> smallest integer >= round(tau / t_u) coprime with M
struct RawParameters
{
    double bandwidth_B = 500e6;
    std::optional<double> pulse_tau;
    std::optional<double> unambiguous_tu;
    double carrier_fc = 10e9;
    long long n_range_bins_N = 334;
    std::optional<long long> n_samples_M;
    long long n_tx_NT = 1;
    long long n_rx_NR = 1;
    long long tones_per_tx_Nc = 1;
    double tx_spacing_dT = 0.5;
    std::optional<double> rx_spacing_dR;
    std::optional<long long> alias_p;
    std::uint64_t rng_seed = 0;
};

/// Validated system parameters. All fields are resolved; the struct is a
/// plain value and is treated as immutable once built.
struct SystemConfig
{
    double bandwidth_B = 0;
    double pulse_tau = 0;
    double unambiguous_tu = 0;
    double carrier_fc = 0;
    std::size_t n_range_bins_N = 0;
    std::size_t n_samples_M = 0;
    std::size_t n_tx_NT = 0;
    std::size_t n_rx_NR = 0;
    std::size_t tones_per_tx_Nc = 0;
    double tx_spacing_dT = 0.5;
    double rx_spacing_dR = 0.5;
    std::size_t alias_p = 1;
    std::uint64_t rng_seed = 0;

    // derived
    double beta = 0;          // chirp bandwidth B*M/N
    double sampling_rate = 0; // beta * t_u / tau

    std::size_t n_angles() const noexcept { return n_tx_NT * n_rx_NR; }
    std::size_t rows() const noexcept { return n_rx_NR * n_samples_M; }
    std::size_t cols() const noexcept { return n_range_bins_N * n_angles(); }
    bool siso() const noexcept { return n_angles() == 1; }
    /// Upper end of the open delay domain, in range bins.
    double delay_extent_bins() const noexcept { return bandwidth_B * unambiguous_tu; }

    RawParameters raw() const
    {
        RawParameters r;
        r.bandwidth_B = bandwidth_B;
        r.pulse_tau = pulse_tau;
        r.unambiguous_tu = unambiguous_tu;
        r.carrier_fc = carrier_fc;
        r.n_range_bins_N = static_cast<long long>(n_range_bins_N);
        r.n_samples_M = static_cast<long long>(n_samples_M);
        r.n_tx_NT = static_cast<long long>(n_tx_NT);
        r.n_rx_NR = static_cast<long long>(n_rx_NR);
        r.tones_per_tx_Nc = static_cast<long long>(tones_per_tx_Nc);
        r.tx_spacing_dT = tx_spacing_dT;
        r.rx_spacing_dR = rx_spacing_dR;
        r.alias_p = static_cast<long long>(alias_p);
        r.rng_seed = rng_seed;
        return r;
    }

    friend bool operator==(const SystemConfig&, const SystemConfig&) = default;
};

namespace detail
{

inline void require_positive(double v, const char* what)
{
    if (!(v > 0.0) || !std::isfinite(v))
        throw RangeError(std::string(what) + " must be positive and finite");
}

inline void require_positive(long long v, const char* what)
{
    if (v <= 0)
        throw RangeError(std::string(what) + " must be a positive integer");
}

} // namespace detail

/// Smallest integer >= start that shares no factor with m.
inline std::size_t smallest_coprime_at_least(std::size_t start, std::size_t m)
{
    std::size_t p = std::max<std::size_t>(start, 1);
    while (std::gcd(p, m) != 1)
        ++p;
    return p;
}

/// Tolerance on |N - B*t_u|. The published table pairs N = 334 with
/// B*t_u = 330, so a bare +-2 bin window is widened to 2 % of B*t_u.
inline double bin_count_tolerance(double b_tu) { return std::max(2.0, 0.02 * b_tu); }

inline SystemConfig build_config(const RawParameters& raw)
{
    using detail::require_positive;
    require_positive(raw.bandwidth_B, "bandwidth_B");
    require_positive(raw.n_range_bins_N, "n_range_bins_N");
    require_positive(raw.n_tx_NT, "n_tx_NT");
    require_positive(raw.n_rx_NR, "n_rx_NR");
    require_positive(raw.tones_per_tx_Nc, "tones_per_tx_Nc");
    require_positive(raw.tx_spacing_dT, "tx_spacing_dT");
    if (!(raw.carrier_fc >= 0.0))
        throw RangeError("carrier_fc must be non-negative");
    if (raw.n_samples_M)
        require_positive(*raw.n_samples_M, "n_samples_M");
    if (raw.alias_p)
        require_positive(*raw.alias_p, "alias_p");
    if (raw.unambiguous_tu)
        require_positive(*raw.unambiguous_tu, "unambiguous_tu");
    if (raw.pulse_tau)
        require_positive(*raw.pulse_tau, "pulse_tau");
    if (raw.rx_spacing_dR)
        require_positive(*raw.rx_spacing_dR, "rx_spacing_dR");

    SystemConfig c;
    c.bandwidth_B = raw.bandwidth_B;
    c.carrier_fc = raw.carrier_fc;
    c.n_range_bins_N = static_cast<std::size_t>(raw.n_range_bins_N);
    c.n_samples_M = static_cast<std::size_t>(raw.n_samples_M.value_or(raw.n_range_bins_N));
    c.n_tx_NT = static_cast<std::size_t>(raw.n_tx_NT);
    c.n_rx_NR = static_cast<std::size_t>(raw.n_rx_NR);
    c.tones_per_tx_Nc = static_cast<std::size_t>(raw.tones_per_tx_Nc);
    c.tx_spacing_dT = raw.tx_spacing_dT;
    c.rx_spacing_dR = raw.rx_spacing_dR.value_or(0.5 * static_cast<double>(raw.n_tx_NT));
    c.rng_seed = raw.rng_seed;

    const double n = static_cast<double>(c.n_range_bins_N);
    c.unambiguous_tu = raw.unambiguous_tu.value_or(n / c.bandwidth_B);
    if (raw.pulse_tau)
        c.pulse_tau = *raw.pulse_tau;
    else if (raw.alias_p)
        c.pulse_tau = static_cast<double>(*raw.alias_p) * n / c.bandwidth_B;
    else
        c.pulse_tau = default_pulse_tau;

    const double b_tu = c.bandwidth_B * c.unambiguous_tu;
    if (std::abs(n - b_tu) > bin_count_tolerance(b_tu))
        throw ConsistencyError("n_range_bins_N = " + std::to_string(c.n_range_bins_N) +
                               " is inconsistent with B*t_u = " + std::to_string(b_tu));
    if (c.n_samples_M > c.n_range_bins_N)
        throw ConsistencyError("n_samples_M must not exceed n_range_bins_N (M <= N)");
    if (c.tones_per_tx_Nc * c.n_tx_NT > c.n_range_bins_N)
        throw ConsistencyError("tones_per_tx_Nc * n_tx_NT must not exceed n_range_bins_N");
    const std::size_t n_theta = c.n_angles();
    if (n_theta != 1 && n_theta % 2 != 0)
        throw ConsistencyError("n_tx_NT * n_rx_NR must be even (or 1 for a single channel)");

    if (raw.alias_p) {
        c.alias_p = static_cast<std::size_t>(*raw.alias_p);
    } else {
        const double ratio = std::round(c.pulse_tau / c.unambiguous_tu);
        c.alias_p = smallest_coprime_at_least(static_cast<std::size_t>(std::max(1.0, ratio)),
                                              c.n_samples_M);
    }
    if (std::gcd(c.alias_p, c.n_samples_M) != 1)
        throw ConsistencyError("gcd(alias_p, n_samples_M) = " +
                               std::to_string(std::gcd(c.alias_p, c.n_samples_M)) +
                               " but alias_p must be coprime with M");

    c.beta = c.bandwidth_B * static_cast<double>(c.n_samples_M) / n;
    c.sampling_rate = c.beta * c.unambiguous_tu / c.pulse_tau;
    if (!(c.beta <= c.bandwidth_B) || !(c.sampling_rate > 0.0))
        throw ConsistencyError("derived chirp bandwidth or sampling rate out of range");
    return c;
}

/// Discretized delay and angle axes.
struct Grids
{
    std::vector<double> delay_bins; // seconds, m / B
    std::vector<double> angle_bins; // cos(theta), 2v / (N_T N_R)
};

/// cos(theta) of angle bin `index` (0-based, i.e. v = index - N_theta/2).
/// A single-channel system has one bin at broadside.
inline double angle_bin(const SystemConfig& c, std::size_t index)
{
    const auto n_theta = static_cast<long long>(c.n_angles());
    if (n_theta == 1)
        return 0.0;
    const long long v = static_cast<long long>(index) - n_theta / 2;
    return 2.0 * static_cast<double>(v) / static_cast<double>(n_theta);
}

inline Grids make_grids(const SystemConfig& c)
{
    Grids g;
    g.delay_bins.resize(c.n_range_bins_N);
    for (std::size_t m = 0; m < c.n_range_bins_N; ++m)
        g.delay_bins[m] = static_cast<double>(m) / c.bandwidth_B;
    g.angle_bins.resize(c.n_angles());
    for (std::size_t v = 0; v < c.n_angles(); ++v)
        g.angle_bins[v] = angle_bin(c, v);
    return g;
}

// ---------------------------------------------------------------------------
// key = value text format

namespace detail
{

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& value)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size())
            throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw FormatError("'" + key + "' expects a number, got '" + value + "'");
    }
}

inline long long parse_count(const std::string& key, const std::string& value)
{
    long long out = 0;
    const auto* first = value.data();
    const auto* last = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec == std::errc() && ptr == last)
        return out;
    // accept integral floating spellings such as 1e3 or 43.0
    const double d = parse_double(key, value);
    if (std::floor(d) != d || std::abs(d) > 9.0e15)
        throw RangeError("'" + key + "' must be an integral count, got '" + value + "'");
    return static_cast<long long>(d);
}

inline std::string format_double(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace detail

/// Field names accepted in config files and `--override` flags.
inline const std::vector<std::string>& config_keys()
{
    static const std::vector<std::string> keys = {
        "bandwidth_B",   "pulse_tau",       "unambiguous_tu", "carrier_fc",
        "n_range_bins_N", "n_samples_M",    "n_tx_NT",        "n_rx_NR",
        "tones_per_tx_Nc", "tx_spacing_dT", "rx_spacing_dR",  "alias_p",
        "rng_seed"};
    return keys;
}

inline bool is_config_key(const std::string& key)
{
    const auto& k = config_keys();
    return std::find(k.begin(), k.end(), key) != k.end();
}

/// Applies one `key = value` assignment. Unknown keys raise FormatError.
inline void apply_setting(RawParameters& raw, const std::string& key, const std::string& value)
{
    using detail::parse_count;
    using detail::parse_double;
    if (key == "bandwidth_B")
        raw.bandwidth_B = parse_double(key, value);
    else if (key == "pulse_tau")
        raw.pulse_tau = parse_double(key, value);
    else if (key == "unambiguous_tu")
        raw.unambiguous_tu = parse_double(key, value);
    else if (key == "carrier_fc")
        raw.carrier_fc = parse_double(key, value);
    else if (key == "n_range_bins_N")
        raw.n_range_bins_N = parse_count(key, value);
    else if (key == "n_samples_M")
        raw.n_samples_M = parse_count(key, value);
    else if (key == "n_tx_NT")
        raw.n_tx_NT = parse_count(key, value);
    else if (key == "n_rx_NR")
        raw.n_rx_NR = parse_count(key, value);
    else if (key == "tones_per_tx_Nc")
        raw.tones_per_tx_Nc = parse_count(key, value);
    else if (key == "tx_spacing_dT")
        raw.tx_spacing_dT = parse_double(key, value);
    else if (key == "rx_spacing_dR")
        raw.rx_spacing_dR = parse_double(key, value);
    else if (key == "alias_p")
        raw.alias_p = parse_count(key, value);
    else if (key == "rng_seed")
        raw.rng_seed = static_cast<std::uint64_t>(parse_count(key, value));
    else
        throw FormatError("unknown configuration key '" + key + "'");
}

/// Parses `key = value` lines; `#` starts a comment. Later lines win.
inline RawParameters parse_config_text(const std::string& text, RawParameters raw = {})
{
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        const std::string body = detail::trim(line);
        if (body.empty())
            continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw FormatError("line " + std::to_string(lineno) + ": expected key = value");
        apply_setting(raw, detail::trim(body.substr(0, eq)), detail::trim(body.substr(eq + 1)));
    }
    return raw;
}

inline RawParameters load_config_file(const std::string& path, RawParameters raw = {})
{
    std::ifstream f(path);
    if (!f)
        throw FormatError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), raw);
}

/// Fully resolved key-value form; parsing it back reproduces the config.
inline std::string to_config_text(const SystemConfig& c)
{
    using detail::format_double;
    std::ostringstream os;
    os << "bandwidth_B = " << format_double(c.bandwidth_B) << '\n'
       << "pulse_tau = " << format_double(c.pulse_tau) << '\n'
       << "unambiguous_tu = " << format_double(c.unambiguous_tu) << '\n'
       << "carrier_fc = " << format_double(c.carrier_fc) << '\n'
       << "n_range_bins_N = " << c.n_range_bins_N << '\n'
       << "n_samples_M = " << c.n_samples_M << '\n'
       << "n_tx_NT = " << c.n_tx_NT << '\n'
       << "n_rx_NR = " << c.n_rx_NR << '\n'
       << "tones_per_tx_Nc = " << c.tones_per_tx_Nc << '\n'
       << "tx_spacing_dT = " << format_double(c.tx_spacing_dT) << '\n'
       << "rx_spacing_dR = " << format_double(c.rx_spacing_dR) << '\n'
       << "alias_p = " << c.alias_p << '\n'
       << "rng_seed = " << c.rng_seed << '\n';
    return os.str();
}

inline nlohmann::json to_json(const SystemConfig& c)
{
    return nlohmann::json{
        {"bandwidth_B", c.bandwidth_B},       {"pulse_tau", c.pulse_tau},
        {"unambiguous_tu", c.unambiguous_tu}, {"carrier_fc", c.carrier_fc},
        {"n_range_bins_N", c.n_range_bins_N}, {"n_samples_M", c.n_samples_M},
        {"n_tx_NT", c.n_tx_NT},               {"n_rx_NR", c.n_rx_NR},
        {"tones_per_tx_Nc", c.tones_per_tx_Nc}, {"tx_spacing_dT", c.tx_spacing_dT},
        {"rx_spacing_dR", c.rx_spacing_dR},   {"alias_p", c.alias_p},
        {"rng_seed", c.rng_seed},             {"beta", c.beta},
        {"sampling_rate", c.sampling_rate}};
}

inline SystemConfig config_from_json(const nlohmann::json& j)
{
    try {
        RawParameters r;
        r.bandwidth_B = j.at("bandwidth_B").get<double>();
        r.pulse_tau = j.at("pulse_tau").get<double>();
        r.unambiguous_tu = j.at("unambiguous_tu").get<double>();
        r.carrier_fc = j.at("carrier_fc").get<double>();
        r.n_range_bins_N = j.at("n_range_bins_N").get<long long>();
        r.n_samples_M = j.at("n_samples_M").get<long long>();
        r.n_tx_NT = j.at("n_tx_NT").get<long long>();
        r.n_rx_NR = j.at("n_rx_NR").get<long long>();
        r.tones_per_tx_Nc = j.at("tones_per_tx_Nc").get<long long>();
        r.tx_spacing_dT = j.at("tx_spacing_dT").get<double>();
        r.rx_spacing_dR = j.at("rx_spacing_dR").get<double>();
        r.alias_p = j.at("alias_p").get<long long>();
        r.rng_seed = j.at("rng_seed").get<std::uint64_t>();
        return build_config(r);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed config snapshot: ") + e.what());
    }
}

} // namespace cirad

#endif // CIRAD_CONFIG_HPP
