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

#ifndef CIRAD_ILLUMINATION_HPP
#define CIRAD_ILLUMINATION_HPP

#include "config.hpp"
#include "random.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

namespace cirad
{

/// Maps a tone index to the transmitter that radiates it.
using TxRule = std::function<std::size_t(std::size_t tone, std::size_t n_tx)>;

/// Round-robin rule, xi(i) = i mod N_T.
inline std::size_t round_robin(std::size_t tone, std::size_t n_tx) { return tone % n_tx; }

inline std::size_t assign_transmitters(std::size_t tone, const SystemConfig& c)
{
    if (tone >= c.n_range_bins_N)
        throw IndexError("tone index " + std::to_string(tone) + " outside [0, N)");
    return round_robin(tone, c.n_tx_NT);
}

/// One realization of the random waveform: which of the N tones modulate the
/// chirp, their phases, and which transmitter carries each.
struct ToneAssignment
{
    std::vector<std::uint8_t> selected;
    std::vector<double> phases;
    std::vector<cplx> coeffs;
    std::vector<std::size_t> tx_map;
    std::size_t expected_count = 0;

    std::size_t size() const noexcept { return coeffs.size(); }
    std::size_t count() const
    {
        return static_cast<std::size_t>(std::accumulate(selected.begin(), selected.end(), 0));
    }
    std::vector<std::size_t> active() const
    {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < selected.size(); ++i)
            if (selected[i])
                idx.push_back(i);
        return idx;
    }

    friend bool operator==(const ToneAssignment&, const ToneAssignment&) = default;
};

enum class SelectionMode
{
    bernoulli,  // independent Bernoulli(N_c N_T / N) per tone
    fixed_count // exactly N_c N_T tones, uniformly chosen
};

/// Builds an assignment from explicit selections and phases.
inline ToneAssignment make_tones(const SystemConfig& c, std::vector<std::uint8_t> selected,
                                 std::vector<double> phases, const TxRule& rule = round_robin)
{
    const std::size_t n = c.n_range_bins_N;
    if (selected.size() != n || phases.size() != n)
        throw ShapeError("tone selection and phase vectors must have length N");
    ToneAssignment t;
    t.selected = std::move(selected);
    t.phases = std::move(phases);
    t.coeffs.resize(n);
    t.tx_map.resize(n);
    t.expected_count = c.tones_per_tx_Nc * c.n_tx_NT;
    for (std::size_t i = 0; i < n; ++i) {
        t.coeffs[i] = t.selected[i] ? std::polar(1.0, t.phases[i]) : cplx{};
        t.tx_map[i] = rule(i, c.n_tx_NT);
        if (t.tx_map[i] >= c.n_tx_NT)
            throw IndexError("transmitter rule returned an index outside [0, N_T)");
    }
    return t;
}

/// Every tone on with zero phase; the deterministic skeleton used in tests.
inline ToneAssignment all_tones(const SystemConfig& c)
{
    return make_tones(c, std::vector<std::uint8_t>(c.n_range_bins_N, 1),
                      std::vector<double>(c.n_range_bins_N, 0.0));
}

inline ToneAssignment draw_tones(const SystemConfig& c, Rng& rng,
                                 SelectionMode mode = SelectionMode::bernoulli,
                                 const TxRule& rule = round_robin)
{
    const std::size_t n = c.n_range_bins_N;
    const std::size_t want = c.tones_per_tx_Nc * c.n_tx_NT;
    if (want > n)
        throw ProbabilityError("selection probability N_c N_T / N exceeds one");

    std::vector<std::uint8_t> selected(n, 0);
    std::vector<double> phases(n);
    if (mode == SelectionMode::bernoulli) {
        std::bernoulli_distribution coin(static_cast<double>(want) / static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i) {
            selected[i] = coin(rng) ? 1 : 0;
            phases[i] = uniform_phase(rng);
        }
    } else {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t k = 0; k < want; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, n - 1);
            std::swap(perm[k], perm[pick(rng)]);
            selected[perm[k]] = 1;
        }
        for (auto& ph : phases)
            ph = uniform_phase(rng);
    }
    return make_tones(c, std::move(selected), std::move(phases), rule);
}

/// Provenance form: selected indices with their phases.
inline nlohmann::json to_json(const ToneAssignment& t)
{
    nlohmann::json idx = nlohmann::json::array();
    nlohmann::json ph = nlohmann::json::array();
    for (std::size_t i : t.active()) {
        idx.push_back(i);
        ph.push_back(t.phases[i]);
    }
    return {{"n", t.size()}, {"selected", idx}, {"phases", ph}};
}

/// Inverse of `to_json` under round-robin assignment. Phases of unselected
/// tones carry no information and come back as zero.
inline ToneAssignment tones_from_json(const SystemConfig& c, const nlohmann::json& j)
{
    const std::size_t n = c.n_range_bins_N;
    if (j.at("n").get<std::size_t>() != n)
        throw ShapeError("tone record length does not match N");
    std::vector<std::uint8_t> sel(n, 0);
    std::vector<double> ph(n, 0.0);
    const auto& idx = j.at("selected");
    const auto& phs = j.at("phases");
    if (idx.size() != phs.size())
        throw FormatError("tone record has mismatched index and phase lists");
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto i = idx[k].get<std::size_t>();
        if (i >= n)
            throw IndexError("tone index in record out of range");
        sel[i] = 1;
        ph[i] = phs[k].get<double>();
    }
    return make_tones(c, std::move(sel), std::move(ph));
}

} // namespace cirad

#endif // CIRAD_ILLUMINATION_HPP
