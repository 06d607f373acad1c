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

#include <cirad/adcg.hpp>
#include <cirad/metrics.hpp>
#include <cirad/scene.hpp>

#include <catch_amalgamated.hpp>

using namespace cirad;

namespace
{

SystemConfig make(long long n, long long m, long long nc, long long nt = 1, long long nr = 1)
{
    RawParameters r;
    r.n_range_bins_N = n;
    r.n_samples_M = m;
    r.tones_per_tx_Nc = nc;
    r.n_tx_NT = nt;
    r.n_rx_NR = nr;
    return build_config(r);
}

ToneAssignment tones(const SystemConfig& c, std::uint64_t seed)
{
    Rng rng = make_stream(seed, Stream::tones);
    return draw_tones(c, rng);
}

double loss(const AtomEvaluator& atoms, const std::vector<Target>& s, const Vec& y)
{
    Vec r = -y;
    for (const auto& t : s)
        r += t.amplitude * atoms.value(t.delay, t.angle);
    return 0.5 * r.squaredNorm();
}

} // namespace

TEST_CASE("selection recovers a planted atom", "[adcg]")
{
    SECTION("single channel")
    {
        const auto c = make(128, 43, 10);
        const AtomEvaluator atoms(c, tones(c, 1));
        const Adcg solver(atoms, {});
        Rng rng(2);
        for (int i = 0; i < 10; ++i) {
            const double d = (3 + 120 * uniform01(rng)) / c.bandwidth_B;
            const auto [ds, as] = solver.select_atom(atoms.value(d, 0.0));
            CHECK(std::abs(ds - d) * c.bandwidth_B < 0.05);
            CHECK(as == 0.0);
        }
    }
    SECTION("MIMO")
    {
        const auto c = make(32, 12, 3, 2, 2);
        const AtomEvaluator atoms(c, tones(c, 3));
        const Adcg solver(atoms, {});
        Rng rng(4);
        for (int i = 0; i < 10; ++i) {
            const double d = (2 + 28 * uniform01(rng)) / c.bandwidth_B;
            const double th = 1.8 * uniform01(rng) - 0.9;
            const auto [ds, as] = solver.select_atom(atoms.value(d, th));
            CHECK(std::abs(ds - d) * c.bandwidth_B < 0.05);
            CHECK(std::abs(as - th) < 0.05 * 2.0 / 4.0);
        }
    }
}

TEST_CASE("selection on a vanishing residual is refused", "[adcg]")
{
    const auto c = make(64, 21, 5);
    const AtomEvaluator atoms(c, tones(c, 1));
    const Adcg solver(atoms, {});
    CHECK_THROWS_AS(solver.select_atom(Vec::Zero(21)), DegenerateResidualError);
    CHECK_THROWS_AS(solver.select_atom(Vec::Constant(21, 1e-3), 1.0), DegenerateResidualError);
}

TEST_CASE("grid-only selection matches the column scan", "[adcg][property]")
{
    const auto c = make(64, 21, 5, 2, 2);
    const auto t = tones(c, 7);
    const AtomEvaluator atoms(c, t);
    const auto op = assemble_matrix(c, t);
    AdcgConfig cfg;
    cfg.grid_only = true;
    cfg.refine = false;
    cfg.normalized_selection = false;
    cfg.K_max = 1;
    const Adcg solver(atoms, cfg);
    Rng rng(9);
    for (int rep = 0; rep < 10; ++rep) {
        Vec y(op.rows());
        for (auto& e : y)
            e = complex_normal(rng);
        // scan interior columns: m >= 1 and cos(theta) > -1
        const Vec corr = op.matrix.adjoint() * y;
        Index best = -1;
        double val = -1;
        for (std::size_t v = 1; v < c.n_angles(); ++v)
            for (std::size_t m = 1; m < c.n_range_bins_N; ++m) {
                const Index i = static_cast<Index>(v * c.n_range_bins_N + m);
                if (std::abs(corr(i)) > val) {
                    val = std::abs(corr(i));
                    best = i;
                }
            }
        const auto est = solver.run(y);
        REQUIRE(!est.selection_history.empty());
        const auto& first = est.selection_history.front();
        const auto m = static_cast<Index>(std::llround(first.delay * c.bandwidth_B));
        const auto v = static_cast<Index>(std::llround((first.angle + 1.0) / 0.5));
        CHECK(v * 64 + m == best);
    }
}

TEST_CASE("weight refit", "[adcg]")
{
    const auto c = make(64, 21, 5);
    const AtomEvaluator atoms(c, tones(c, 4));
    const std::vector<Target> s{{10.2 / c.bandwidth_B, 0, {}}, {30.7 / c.bandwidth_B, 0, {}},
                                {50.1 / c.bandwidth_B, 0, {}}};
    const Vec x_true = (Vec(3) << cplx(1, 0.5), cplx(-0.3, 0.8), cplx(0, -2)).finished();
    Vec y = Vec::Zero(21);
    for (int k = 0; k < 3; ++k)
        y += x_true(k) * atoms.value(s[static_cast<std::size_t>(k)].delay, 0.0);

    const double inf = std::numeric_limits<double>::infinity();
    CHECK((refit_weights(atoms, s, y, inf) - x_true).norm() < 1e-10);
    CHECK(refit_weights(atoms, s, y, 0.0).isZero(0.0));

    // one atom, y = c Psi with |c| > tau: the answer is tau c / |c|
    const Vec psi = atoms.value(s[0].delay, 0.0);
    const cplx cc(3.0, -4.0);
    const Vec w = refit_weights(atoms, {s[0]}, Vec(cc * psi), 2.0);
    CHECK(std::abs(w(0) - 2.0 * cc / 5.0) < 1e-9);

    // constrained solution sits on the ball and beats any feasible perturbation
    const Vec wc = refit_weights(atoms, s, y, 1.5);
    CHECK(std::abs(wc.cwiseAbs().sum() - 1.5) < 1e-9);
    Mat m(21, 3);
    for (int k = 0; k < 3; ++k)
        m.col(k) = atoms.value(s[static_cast<std::size_t>(k)].delay, 0.0);
    Rng rng(3);
    const double f0 = (m * wc - y).squaredNorm();
    for (int i = 0; i < 200; ++i) {
        Vec p = wc;
        for (auto& e : p)
            e += complex_normal(rng, 1e-4);
        p = project_l1_ball(p, 1.5);
        CHECK((m * p - y).squaredNorm() >= f0 - 1e-9);
    }
}

TEST_CASE("l1 magnitude projection", "[adcg]")
{
    Eigen::VectorXd a(4);
    a << 3.0, 1.0, 0.5, 0.0;
    const Eigen::VectorXd p = project_l1_magnitudes(a, 2.0);
    // closed form: subtract theta = 1 from entries above it
    CHECK((p - Eigen::Vector4d(2.0, 0.0, 0.0, 0.0)).norm() < 1e-15);
    const Eigen::VectorXd q = project_l1_magnitudes(a, 3.0);
    CHECK((q - Eigen::Vector4d(2.5, 0.5, 0.0, 0.0)).norm() < 1e-15);
    CHECK(project_l1_magnitudes(a, 10.0) == a);
    const Vec z = (Vec(2) << cplx(0, 3), cplx(-1, 0)).finished();
    const Vec pz = project_l1_ball(z, 2.0);
    CHECK(std::abs(pz(0) - cplx(0, 2)) < 1e-15);
    CHECK(pz(1) == cplx{});
}

TEST_CASE("support refinement", "[adcg]")
{
    const auto c = make(128, 43, 10);
    const AtomEvaluator atoms(c, tones(c, 5));
    const Adcg solver(atoms, {});
    const double d0 = 40.37 / c.bandwidth_B;
    const Vec y = cplx(0.8, -0.6) * atoms.value(d0, 0.0);

    SECTION("stationary at the planted optimum")
    {
        const std::vector<Target> at{{d0, 0.0, cplx(0.8, -0.6)}};
        const auto out = solver.refine_support(at, y);
        CHECK(std::abs(out[0].delay - d0) * c.bandwidth_B < 1e-10);
    }
    SECTION("mislocated atom moves downhill")
    {
        const std::vector<Target> off{{d0 + 0.3 / c.bandwidth_B, 0.0, cplx(0.8, -0.6)}};
        // landscape scan: the loss is lower toward the truth
        const double l_off = loss(atoms, off, y);
        const std::vector<Target> nearer{{d0 + 0.2 / c.bandwidth_B, 0.0, cplx(0.8, -0.6)}};
        REQUIRE(loss(atoms, nearer, y) < l_off);
        const auto out = solver.refine_support(off, y);
        CHECK(loss(atoms, out, y) < l_off);
        CHECK(std::abs(out[0].delay - d0) < std::abs(off[0].delay - d0));
    }
    SECTION("never accepts a loss increase")
    {
        Rng rng(6);
        for (int i = 0; i < 30; ++i) {
            std::vector<Target> s;
            Vec yy = Vec::Zero(43);
            for (int k = 0; k < 3; ++k) {
                const double d = (5 + 115 * uniform01(rng)) / c.bandwidth_B;
                const cplx a = complex_normal(rng);
                yy += a * atoms.value(d, 0.0);
                s.push_back({d + (uniform01(rng) - 0.5) / c.bandwidth_B, 0.0, a});
            }
            for (auto& e : yy)
                e += complex_normal(rng, 0.01);
            const auto out = solver.refine_support(s, yy);
            CHECK(loss(atoms, out, yy) <= loss(atoms, s, yy));
            for (const auto& t : out)
                CHECK(atoms.in_domain(t.delay, t.angle));
        }
    }
}

TEST_CASE("ADCG end to end", "[adcg]")
{
    const auto c = make(128, 43, 10);
    const AtomEvaluator atoms(c, tones(c, 8));

    SECTION("empty measurement")
    {
        const auto est = run_adcg(Vec::Zero(43), atoms, {});
        CHECK(est.atoms.empty());
        CHECK(est.iterations == 0);
    }
    SECTION("one noiseless target")
    {
        Rng rng(1);
        for (int i = 0; i < 10; ++i) {
            const double d = (2 + 124 * uniform01(rng)) / c.bandwidth_B;
            const cplx a = std::polar(1.0 + uniform01(rng), uniform_phase(rng));
            const Vec y = a * atoms.value(d, 0.0);
            const auto est = run_adcg(y, atoms, {});
            REQUIRE(est.atoms.size() >= 1);
            // strongest atom
            const auto it = std::max_element(est.atoms.begin(), est.atoms.end(),
                [](const Target& p, const Target& q) { return std::abs(p.amplitude) < std::abs(q.amplitude); });
            CHECK(std::abs(it->delay - d) * c.bandwidth_B < 0.05);
            CHECK(std::abs(it->amplitude - a) < 1e-3 * std::abs(a));
        }
    }
    SECTION("invariants on noisy multi-target scenes")
    {
        Rng rng = make_stream(3, Stream::scene);
        Rng noise = make_stream(3, Stream::noise);
        for (int i = 0; i < 5; ++i) {
            const auto scene = draw_continuum_scene(c, 4, rng);
            const auto meas = synthesize(atoms, scene.targets, 0.02, noise);
            AdcgConfig cfg;
            cfg.abs_tol = 0.02 * std::sqrt(43.0 + 3.0 * std::sqrt(43.0));
            const auto est = run_adcg(meas.y, atoms, cfg);
            for (std::size_t k = 1; k < est.loss_trace.size(); ++k)
                CHECK(est.loss_trace[k] <= est.loss_trace[k - 1]);
            double peak = 0;
            for (const auto& t : est.atoms)
                peak = std::max(peak, std::abs(t.amplitude));
            for (std::size_t k = 0; k < est.atoms.size(); ++k) {
                CHECK(atoms.in_domain(est.atoms[k].delay, est.atoms[k].angle));
                CHECK(std::abs(est.atoms[k].amplitude) > cfg.prune_rel * peak);
                for (std::size_t j = k + 1; j < est.atoms.size(); ++j)
                    CHECK(std::abs(est.atoms[k].delay - est.atoms[j].delay) * c.bandwidth_B >= cfg.merge_tol);
            }
            CHECK(offgrid_metrics(est.atoms, scene, c).all_found);
        }
    }
}

TEST_CASE("five separated targets at 12 dB", "[adcg][statistical]")
{
    const auto c = make(334, 111, 20);
    int good = 0;
    const int trials = 10;
    for (int t = 0; t < trials; ++t) {
        const std::uint64_t seed = derive_seed(77, static_cast<std::uint64_t>(t));
        const AtomEvaluator atoms(c, tones(c, seed));
        Rng srng = make_stream(seed, Stream::scene), nrng = make_stream(seed, Stream::noise);
        const auto scene = draw_continuum_scene(c, 5, srng);
        Vec clean = Vec::Zero(111);
        for (const auto& tg : scene.targets)
            clean += tg.amplitude * atoms.value(tg.delay, tg.angle);
        const double sigma = sigma_for_snr(clean, 12.0);
        const auto meas = synthesize(atoms, scene.targets, sigma, nrng);
        AdcgConfig cfg;
        cfg.abs_tol = sigma * std::sqrt(111.0 + 3.0 * std::sqrt(111.0));
        const auto est = run_adcg(meas.y, atoms, cfg);
        const auto m = offgrid_metrics(est.atoms, scene, c);
        good += (m.all_found && m.m1 < 0.05 * scene.l1()) ? 1 : 0;
    }
    CHECK(good >= 8);
}
