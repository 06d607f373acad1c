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

#include <cirad/metrics.hpp>

#include <catch_amalgamated.hpp>

#include <limits>

using namespace cirad;

namespace
{

// Mann-Whitney statistic: P(score_pos > score_neg) + 0.5 P(tie)
double pairwise_auc(const std::vector<double>& s, const std::vector<bool>& lab)
{
    double num = 0, den = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (lab[i] && !lab[j]) {
                den += 1;
                num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            }
    return num / den;
}

SystemConfig siso()
{
    RawParameters r;
    r.n_range_bins_N = 64;
    r.n_samples_M = 21;
    r.tones_per_tx_Nc = 5;
    return build_config(r);
}

} // namespace

TEST_CASE("reconstruction error", "[metrics]")
{
    const Vec x = (Vec(2) << cplx(3, 0), cplx(0, 4)).finished();
    CHECK(reconstruction_error(x, x) == 0.0);
    CHECK(reconstruction_error(Vec::Zero(2), x) == Catch::Approx(1.0));
    CHECK(reconstruction_error(Vec::Zero(2), Vec::Zero(2)) == 0.0);
}

TEST_CASE("ROC on a perfect estimate", "[metrics]")
{
    Vec x = Vec::Zero(50);
    x(3) = 0.2;
    x(17) = cplx(0, -4);
    x(40) = 1.0;
    const auto roc = roc_curve(x, {3, 17, 40});
    CHECK(roc.auc == 1.0);
    for (std::size_t k = 1; k < roc.points.size(); ++k) {
        CHECK(roc.points[k].pd >= roc.points[k - 1].pd);
        CHECK(roc.points[k].pfa >= roc.points[k - 1].pfa);
    }
    CHECK(roc.points.front().pd == 0.0);
    CHECK(roc.points.back().pfa == 1.0);
    CHECK_THROWS_AS(roc_curve(x, {}), EmptyTruthError);
    CHECK_THROWS_AS(roc_curve(x, {50}), IndexError);
}

TEST_CASE("ROC threshold at zero", "[metrics]")
{
    const std::vector<double> s{0.5, 0.1, 2.0, 0.3};
    const std::vector<bool> lab{true, false, false, true};
    const auto p = roc_point(s, lab, 0.0);
    CHECK(p.pd == 1.0);
    CHECK(p.pfa == 1.0);
    const auto q = roc_point(s, lab, 0.4);
    CHECK(q.pd == 0.5);
    CHECK(q.pfa == 0.5);
}

TEST_CASE("AUC matches the pairwise oracle", "[metrics][property]")
{
    Rng rng(12);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 5 + rng() % 40;
        std::vector<double> s(n);
        std::vector<bool> lab(n);
        for (std::size_t i = 0; i < n; ++i) {
            // coarse rounding forces ties
            s[i] = std::round(10 * uniform01(rng)) / 10;
            lab[i] = uniform01(rng) < 0.3;
        }
        lab[0] = true;
        lab[1] = false;
        CHECK(std::abs(roc_curve(s, lab).auc - pairwise_auc(s, lab)) < 1e-12);
    }
}

TEST_CASE("AUC of pure noise is about one half", "[metrics][statistical]")
{
    Rng rng(5);
    std::vector<double> aucs;
    for (int rep = 0; rep < 200; ++rep) {
        Vec x(100);
        for (auto& e : x)
            e = complex_normal(rng);
        aucs.push_back(roc_curve(x, {1, 5, 9, 22, 40, 41, 60, 77, 80, 99}).auc);
    }
    double mean = 0;
    for (double a : aucs) {
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
        mean += a / static_cast<double>(aucs.size());
    }
    CHECK(std::abs(mean - 0.5) < 0.05);
}

TEST_CASE("off-grid metrics", "[metrics]")
{
    const auto c = siso();
    const double bin = 1.0 / c.bandwidth_B;
    ContinuumScene truth;
    truth.targets = {{10.3 * bin, 0, cplx(1, 0)}, {30.1 * bin, 0, cplx(0, -2)}, {50.7 * bin, 0, cplx(0.5, 0.5)}};

    SECTION("identity")
    {
        const auto m = offgrid_metrics(truth.targets, truth, c);
        CHECK(m.m1 == 0.0);
        CHECK(m.m2 == 0.0);
        CHECK(m.m3 == 0.0);
        CHECK(m.all_found);
    }
    SECTION("one spurious atom")
    {
        auto est = truth.targets;
        est.push_back({20.0 * bin, 0, std::polar(0.7, 1.0)});
        const auto m = offgrid_metrics(est, truth, c);
        CHECK(m.m1 == Catch::Approx(0.7).epsilon(1e-14));
        CHECK(m.m2 == 0.0);
    }
    SECTION("perturbed estimates against a direct evaluation")
    {
        const std::vector<Target> est{{10.35 * bin, 0, cplx(0.9, 0.1)}, {10.25 * bin, 0, cplx(0.05, 0)},
                                      {30.0 * bin, 0, cplx(0, -1.8)}, {44.0 * bin, 0, cplx(0.3, 0)},
                                      {50.7 * bin, 0, cplx(0.1, 0.1)}};
        // hand evaluation in range units: bin width is c/(2B), radius 0.2 bins
        const double w = speed_of_light / (2.0 * c.bandwidth_B);
        const double e1 = 0.05 * w, e2 = 0.05 * w, e3 = 0.1 * w;
        const double m1 = 0.3;
        const double m2 = std::abs(cplx(0.9, 0.1)) * e1 * e1 + 0.05 * e2 * e2 + 1.8 * e3 * e3;
        const double m3 = std::max({std::abs(cplx(1, 0) - cplx(0.95, 0.1)), std::abs(cplx(0, -0.2)),
                                    std::abs(cplx(0.4, 0.4))});
        const auto m = offgrid_metrics(est, truth, c);
        CHECK(m.m1 == Catch::Approx(m1).epsilon(1e-12));
        CHECK(m.m2 == Catch::Approx(m2).epsilon(1e-9));
        CHECK(m.m3 == Catch::Approx(m3).epsilon(1e-12));
        CHECK(m.all_found);
    }
    SECTION("missing target")
    {
        const std::vector<Target> est{truth.targets[0], truth.targets[1]};
        const auto m = offgrid_metrics(est, truth, c);
        CHECK_FALSE(m.all_found);
        CHECK(m.m3 == Catch::Approx(std::abs(cplx(0.5, 0.5))));
    }
    CHECK_THROWS_AS(offgrid_metrics({}, ContinuumScene{}, c), EmptyTruthError);
}

TEST_CASE("performance profile", "[metrics]")
{
    SECTION("single system")
    {
        const auto p = performance_profile({{0.3}, {2.0}, {0.0}}, {1.0});
        CHECK(p[0][0] == 1.0);
    }
    SECTION("large eta")
    {
        const auto p = performance_profile({{1, 2, 30}, {5, 0.1, 1}}, {1e6});
        for (const auto& r : p)
            CHECK(r[0] == 1.0);
    }
    SECTION("hand table")
    {
        // rows are realizations, columns systems
        const std::vector<std::vector<double>> t{{1, 2, 4}, {3, 3, 1}, {2, 1, 2}, {5, 10, 6}};
        const auto p = performance_profile(t, {1.0, 2.0, 3.0});
        // eta = 1: winners s0 {p0, p3}, s1 {p2}, s2 {p1}
        CHECK(p[0][0] == 0.5);
        CHECK(p[1][0] == 0.25);
        CHECK(p[2][0] == 0.25);
        // eta = 2: s0 {p0, p2, p3}, s1 {p0, p2, p3 (10 > 10? no, 10 <= 10)}, s2 {p1, p2, p3}
        CHECK(p[0][1] == 0.75);
        CHECK(p[1][1] == 0.75);
        CHECK(p[2][1] == 0.75);
        // eta = 3: s0 adds p1, s1 adds p1, s2 still misses p0 (4 > 3)
        CHECK(p[0][2] == 1.0);
        CHECK(p[1][2] == 1.0);
        CHECK(p[2][2] == 0.75);
    }
    CHECK_THROWS_AS(performance_profile({{1, 2}, {3}}, {1.0}), MissingCellError);
    CHECK_THROWS_AS(performance_profile({{1, std::numeric_limits<double>::quiet_NaN()}}, {1.0}),
                    MissingCellError);
}

TEST_CASE("Wilson interval", "[metrics]")
{
    const auto [lo, hi] = wilson_interval(45, 50);
    CHECK(lo == Catch::Approx(0.7864).margin(1e-4));
    CHECK(hi == Catch::Approx(0.9565).margin(1e-4));
    const auto [a, b] = wilson_interval(0, 10);
    CHECK(a == 0.0);
    CHECK(b < 0.31);
}
