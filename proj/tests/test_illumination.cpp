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

#include <cirad/illumination.hpp>

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

using namespace cirad;

namespace
{

SystemConfig make(long long n, long long nc, long long nt = 1, long long nr = 1)
{
    RawParameters r;
    r.n_range_bins_N = n;
    r.tones_per_tx_Nc = nc;
    r.n_tx_NT = nt;
    r.n_rx_NR = nr;
    return build_config(r);
}

} // namespace

TEST_CASE("selection probability one selects every tone", "[illumination]")
{
    const auto c = make(16, 8, 2, 1);
    Rng rng = make_stream(1, Stream::tones);
    const auto t = draw_tones(c, rng);
    CHECK(t.count() == 16);
    for (std::size_t i = 0; i < t.size(); ++i)
        CHECK(std::abs(std::abs(t.coeffs[i]) - 1.0) < 1e-15);
}

TEST_CASE("coefficients vanish exactly on unselected tones", "[illumination][property]")
{
    const auto c = make(334, 20);
    Rng rng = make_stream(5, Stream::tones);
    for (int rep = 0; rep < 50; ++rep) {
        const auto t = draw_tones(c, rng);
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (t.selected[i]) {
                CHECK(std::abs(std::abs(t.coeffs[i]) - 1.0) < 1e-15);
                CHECK(t.phases[i] >= 0.0);
                CHECK(t.phases[i] < 2 * std::numbers::pi);
            } else {
                CHECK(t.coeffs[i] == cplx{});
            }
        }
    }
}

TEST_CASE("mean selected count matches N_c N_T", "[illumination][statistical]")
{
    const auto c = make(334, 20);
    Rng rng = make_stream(2024, Stream::tones);
    double total = 0.0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i)
        total += static_cast<double>(draw_tones(c, rng).count());
    // binomial sd sqrt(334 q (1-q)) ~ 4.3, so the mean of 10^4 draws has sd ~ 0.04
    CHECK(std::abs(total / draws - 20.0) < 0.5);
}

TEST_CASE("per-tone selection frequency converges to the Bernoulli rate", "[illumination][statistical]")
{
    const auto c = make(40, 5, 2, 1); // q = 10/40
    Rng rng = make_stream(77, Stream::tones);
    std::vector<int> hits(40, 0);
    const int draws = 20000;
    for (int d = 0; d < draws; ++d) {
        const auto t = draw_tones(c, rng);
        for (std::size_t i = 0; i < 40; ++i)
            hits[i] += t.selected[i];
    }
    const double q = 0.25, sd = std::sqrt(q * (1 - q) / draws);
    for (int h : hits)
        CHECK(std::abs(h / static_cast<double>(draws) - q) < 5 * sd);
}

TEST_CASE("phases are uniform on the circle", "[illumination][statistical]")
{
    const auto c = make(64, 64);
    Rng rng = make_stream(9, Stream::tones);
    const int bins = 16;
    std::vector<double> counts(bins, 0.0);
    int total = 0;
    for (int d = 0; d < 500; ++d) {
        const auto t = draw_tones(c, rng);
        for (double ph : t.phases) {
            counts[static_cast<int>(ph / (2 * std::numbers::pi) * bins)] += 1;
            ++total;
        }
    }
    double chi2 = 0.0;
    const double expect = static_cast<double>(total) / bins;
    for (double o : counts)
        chi2 += (o - expect) * (o - expect) / expect;
    // 15 degrees of freedom; the 0.999 quantile is 37.7
    CHECK(chi2 < 37.7);
}

TEST_CASE("same seed gives an identical assignment", "[illumination]")
{
    const auto c = make(334, 20);
    Rng a = make_stream(42, Stream::tones), b = make_stream(42, Stream::tones);
    CHECK(draw_tones(c, a) == draw_tones(c, b));
}

TEST_CASE("fixed-count mode selects exactly N_c N_T tones", "[illumination]")
{
    const auto c = make(128, 10, 2, 2);
    Rng rng = make_stream(3, Stream::tones);
    for (int i = 0; i < 20; ++i)
        CHECK(draw_tones(c, rng, SelectionMode::fixed_count).count() == 20);
}

TEST_CASE("round-robin transmitter rule", "[illumination]")
{
    const auto c = make(128, 4, 4, 1);
    CHECK(assign_transmitters(0, c) == 0);
    CHECK(assign_transmitters(7, c) == 3);
    CHECK_THROWS_AS(assign_transmitters(128, c), IndexError);

    const auto c2 = make(334, 4, 4, 1);
    std::vector<int> per_tx(4, 0);
    for (std::size_t i = 0; i < 334; ++i)
        ++per_tx[assign_transmitters(i, c2)];
    const auto [lo, hi] = std::minmax_element(per_tx.begin(), per_tx.end());
    CHECK(*hi - *lo <= 1);

    Rng a = make_stream(1, Stream::tones), b = make_stream(2, Stream::tones);
    CHECK(draw_tones(c, a).tx_map == draw_tones(c, b).tx_map);
}

TEST_CASE("custom transmitter rules are honoured", "[illumination]")
{
    const auto c = make(16, 2, 2, 1);
    auto blocks = [](std::size_t i, std::size_t) { return i < 8 ? std::size_t{0} : std::size_t{1}; };
    Rng rng = make_stream(1, Stream::tones);
    const auto t = draw_tones(c, rng, SelectionMode::bernoulli, blocks);
    CHECK(t.tx_map[7] == 0);
    CHECK(t.tx_map[8] == 1);
    auto bad = [](std::size_t, std::size_t) { return std::size_t{5}; };
    CHECK_THROWS_AS(draw_tones(c, rng, SelectionMode::bernoulli, bad), IndexError);
}

TEST_CASE("tone assignment survives a JSON round trip", "[illumination]")
{
    const auto c = make(334, 20);
    Rng rng = make_stream(11, Stream::tones);
    const auto t = draw_tones(c, rng);
    const auto back = tones_from_json(c, nlohmann::json::parse(to_json(t).dump()));
    CHECK(back.selected == t.selected);
    CHECK(back.coeffs == t.coeffs);
}

TEST_CASE("selection probability above one is rejected", "[illumination]")
{
    auto c = make(16, 2);
    c.tones_per_tx_Nc = 17; // bypasses build_config on purpose
    Rng rng = make_stream(1, Stream::tones);
    CHECK_THROWS_AS(draw_tones(c, rng), ProbabilityError);
}
