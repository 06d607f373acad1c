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

#ifndef CIRAD_SCENE_HPP
#define CIRAD_SCENE_HPP

#include "config.hpp"
#include "random.hpp"
#include "sensing.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace cirad
{

enum class AmplitudeKind
{
    unit,             // |x| = 1
    complex_gaussian, // x ~ CN(0, 1)
    floor             // |x| = fixed magnitude
};

struct AmplitudeModel
{
    AmplitudeKind kind = AmplitudeKind::unit;
    double magnitude = 1.0; // used by `floor`
};

/// Minimum amplitude under which the LASSO support guarantee applies:
/// 8 / sqrt(1 - eps) * sigma * sqrt(2 log(N N_R N_T)).
inline double theorem_amplitude_floor(const SystemConfig& c, double sigma, double eps)
{
    if (!(eps >= 0.0 && eps < 1.0))
        throw RangeError("eps must lie in [0, 1)");
    const double n = static_cast<double>(c.n_range_bins_N * c.n_rx_NR * c.n_tx_NT);
    return 8.0 / std::sqrt(1.0 - eps) * sigma * std::sqrt(2.0 * std::log(n));
}

inline cplx draw_amplitude(const AmplitudeModel& model, Rng& rng)
{
    switch (model.kind) {
    case AmplitudeKind::unit:
        return std::polar(1.0, uniform_phase(rng));
    case AmplitudeKind::floor:
        return std::polar(model.magnitude, uniform_phase(rng));
    case AmplitudeKind::complex_gaussian:
        for (;;) {
            const cplx x = complex_normal(rng, 1.0);
            if (x != cplx{})
                return x;
        }
    }
    throw RangeError("unknown amplitude model");
}

struct GridScene
{
    std::size_t n = 0;                // N * N_theta
    std::vector<std::size_t> support; // sorted, unique
    std::vector<cplx> amplitudes;

    Vec as_vector() const
    {
        Vec x = Vec::Zero(static_cast<Index>(n));
        for (std::size_t i = 0; i < support.size(); ++i)
            x(static_cast<Index>(support[i])) = amplitudes[i];
        return x;
    }

    friend bool operator==(const GridScene&, const GridScene&) = default;
};

/// K columns drawn uniformly without replacement (partial Fisher-Yates).
inline GridScene draw_grid_scene(const SystemConfig& c, std::size_t k, const AmplitudeModel& amp,
                                 Rng& rng)
{
    const std::size_t n = c.cols();
    if (k > n)
        throw CardinalityError("K = " + std::to_string(k) + " exceeds the " + std::to_string(n) +
                               " grid cells");
    if (amp.kind == AmplitudeKind::floor && !(amp.magnitude > 0.0))
        throw RangeError("amplitude floor must be positive");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(perm[i], perm[pick(rng)]);
    }
    GridScene s;
    s.n = n;
    s.support.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(s.support.begin(), s.support.end());
    s.amplitudes.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
        s.amplitudes.push_back(draw_amplitude(amp, rng));
    return s;
}

struct ContinuumScene
{
    std::vector<Target> targets;

    double l1() const
    {
        double s = 0.0;
        for (const auto& t : targets)
            s += std::abs(t.amplitude);
        return s;
    }

    friend bool operator==(const ContinuumScene&, const ContinuumScene&) = default;
};

/// Delay separation must exceed 2/B; angle separation (MIMO only) must be at
/// least 2/N_theta.
inline bool separated(const SystemConfig& c, const Target& a, const Target& b)
{
    if (!(std::abs(a.delay - b.delay) > 2.0 / c.bandwidth_B))
        return false;
    if (!c.siso() && !(std::abs(a.angle - b.angle) >= 2.0 / static_cast<double>(c.n_angles())))
        return false;
    return true;
}

inline bool well_separated(const SystemConfig& c, const ContinuumScene& s)
{
    for (std::size_t i = 0; i < s.targets.size(); ++i)
        for (std::size_t j = i + 1; j < s.targets.size(); ++j)
            if (!separated(c, s.targets[i], s.targets[j]))
                return false;
    return true;
}

inline ContinuumScene draw_continuum_scene(const SystemConfig& c, std::size_t k, Rng& rng,
                                           const AmplitudeModel& amp = {},
                                           std::size_t max_attempts = 10000)
{
    if (static_cast<double>(k) * 2.0 / c.bandwidth_B >= c.unambiguous_tu)
        throw PackingError("K targets cannot be separated by 2/B inside the delay interval");
    ContinuumScene s;
    std::size_t attempts = 0;
    while (s.targets.size() < k) {
        if (attempts++ >= max_attempts)
            throw PackingError("rejection sampling gave up after " + std::to_string(max_attempts) +
                               " attempts with " + std::to_string(s.targets.size()) + " of " +
                               std::to_string(k) + " targets placed");
        Target t;
        t.delay = uniform01(rng) * c.unambiguous_tu;
        t.angle = c.siso() ? 0.0 : 2.0 * uniform01(rng) - 1.0;
        if (!(t.delay > 0.0) || !(t.angle > -1.0))
            continue;
        if (std::all_of(s.targets.begin(), s.targets.end(),
                        [&](const Target& o) { return separated(c, t, o); }))
            s.targets.push_back(t);
    }
    for (auto& t : s.targets)
        t.amplitude = draw_amplitude(amp, rng);
    return s;
}

// JSON: complex numbers as [re, im]

inline nlohmann::json to_json(cplx z) { return nlohmann::json::array({z.real(), z.imag()}); }
inline cplx cplx_from_json(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

inline nlohmann::json to_json(const GridScene& s)
{
    nlohmann::json amps = nlohmann::json::array();
    for (cplx a : s.amplitudes)
        amps.push_back(to_json(a));
    return {{"kind", "grid"}, {"n", s.n}, {"support", s.support}, {"amplitudes", amps}};
}

inline GridScene grid_scene_from_json(const nlohmann::json& j)
{
    GridScene s;
    s.n = j.at("n").get<std::size_t>();
    s.support = j.at("support").get<std::vector<std::size_t>>();
    for (const auto& a : j.at("amplitudes"))
        s.amplitudes.push_back(cplx_from_json(a));
    if (s.amplitudes.size() != s.support.size())
        throw FormatError("grid scene record has mismatched support and amplitudes");
    return s;
}

inline nlohmann::json to_json(const ContinuumScene& s)
{
    nlohmann::json ts = nlohmann::json::array();
    for (const auto& t : s.targets)
        ts.push_back({t.delay, t.angle, t.amplitude.real(), t.amplitude.imag()});
    return {{"kind", "continuum"}, {"targets", ts}};
}

inline ContinuumScene continuum_scene_from_json(const nlohmann::json& j)
{
    ContinuumScene s;
    for (const auto& t : j.at("targets"))
        s.targets.push_back({t.at(0).get<double>(), t.at(1).get<double>(),
                             {t.at(2).get<double>(), t.at(3).get<double>()}});
    return s;
}

} // namespace cirad

#endif // CIRAD_SCENE_HPP
