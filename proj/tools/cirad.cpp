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

// cirad command-line tool: matrix diagnostics, single-shot recovery and
// Monte Carlo sweeps. Exit status 0 on success, 1 on domain errors, 2 on
// usage errors.

#include <cirad/cirad.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cirad;

namespace
{

struct Options
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    std::string out = "cirad_out";
    std::string experiment;
    std::vector<std::string> overrides;
    std::string record;
    std::string input;
    std::size_t k = 5;
    double snr_db = 12.0;
    bool offgrid = false;
    bool noiseless = false;
    std::string selection = "bernoulli";
    std::optional<double> lambda;
    std::string dump_matrix;
};

std::pair<std::string, std::string> split_override(const std::string& kv)
{
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
        throw CLI::ValidationError("--override", "expected key=value, got '" + kv + "'");
    return {cirad::detail::trim(kv.substr(0, eq)), cirad::detail::trim(kv.substr(eq + 1))};
}

/// Config file first, then overrides: flags win.
SystemConfig load_system(const Options& o)
{
    RawParameters raw;
    if (!o.config.empty())
        raw = load_config_file(o.config);
    for (const auto& kv : o.overrides) {
        const auto [k, v] = split_override(kv);
        apply_setting(raw, k, v);
    }
    return build_config(raw);
}

std::uint64_t seed_of(const Options& o, const SystemConfig& c) { return o.seed ? *o.seed : c.rng_seed; }

SelectionMode selection_of(const Options& o)
{
    if (o.selection == "bernoulli")
        return SelectionMode::bernoulli;
    if (o.selection == "fixed_count")
        return SelectionMode::fixed_count;
    throw CLI::ValidationError("--selection", "expected bernoulli or fixed_count");
}

fs::path out_dir(const Options& o, const std::string& sub)
{
    const fs::path p = fs::path(o.out) / sub;
    fs::create_directories(p);
    return p;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

json manifest(const std::string& command, const SystemConfig& c, std::uint64_t seed, const json& files)
{
    const std::string text = to_config_text(c);
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(text.data(), text.size())));
    return {{"command", command}, {"revision", CIRAD_REVISION}, {"seed", seed},
            {"config_hash", hash}, {"config", to_json(c)}, {"files", files}};
}

// A measurement bundle written by `synth` and read by the solvers.
struct Bundle
{
    SystemConfig config;
    ToneAssignment tones;
    std::optional<GridScene> grid;
    std::optional<ContinuumScene> continuum;
    Vec y;
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

json bundle_json(const Bundle& b)
{
    json y = json::array();
    for (const auto& v : b.y)
        y.push_back(to_json(v));
    json j = {{"config", to_json(b.config)}, {"tones", to_json(b.tones)}, {"y", y},
              {"noise_sigma", b.sigma}, {"seed", b.seed}};
    if (b.grid)
        j["scene"] = {{"kind", "grid"}, {"data", to_json(*b.grid)}};
    else
        j["scene"] = {{"kind", "continuum"}, {"data", to_json(*b.continuum)}};
    return j;
}

Bundle bundle_from_file(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw FormatError("cannot open measurement '" + path + "'");
    try {
        const json j = json::parse(f);
        Bundle b;
        b.config = config_from_json(j.at("config"));
        b.tones = tones_from_json(b.config, j.at("tones"));
        const auto& y = j.at("y");
        b.y.resize(static_cast<Index>(y.size()));
        for (std::size_t i = 0; i < y.size(); ++i)
            b.y(static_cast<Index>(i)) = cplx_from_json(y[i]);
        b.sigma = j.at("noise_sigma").get<double>();
        b.seed = j.at("seed").get<std::uint64_t>();
        if (j.at("scene").at("kind") == "grid")
            b.grid = grid_scene_from_json(j.at("scene").at("data"));
        else
            b.continuum = continuum_scene_from_json(j.at("scene").at("data"));
        return b;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed measurement file: ") + e.what());
    }
}

Bundle synthesize_bundle(const Options& o, bool offgrid)
{
    Bundle b;
    b.config = load_system(o);
    b.seed = seed_of(o, b.config);
    Rng tr = make_stream(b.seed, Stream::tones);
    b.tones = draw_tones(b.config, tr, selection_of(o));
    Rng sr = make_stream(b.seed, Stream::scene);
    Rng nr = make_stream(b.seed, Stream::noise);
    const AtomEvaluator atoms(b.config, b.tones);
    Vec clean;
    if (offgrid) {
        b.continuum = draw_continuum_scene(b.config, o.k, sr);
        clean = Vec::Zero(atoms.size());
        for (const auto& t : b.continuum->targets)
            clean += t.amplitude * atoms.value(t.delay, t.angle);
    } else {
        b.grid = draw_grid_scene(b.config, o.k, {}, sr);
        clean = assemble_matrix(b.config, b.tones).matrix * b.grid->as_vector();
    }
    b.sigma = o.noiseless ? 0.0 : sigma_for_snr(clean, o.snr_db);
    b.y = finish_measurement(clean, b.sigma, nr).y;
    return b;
}

Bundle obtain_bundle(const Options& o, bool offgrid)
{
    if (o.input.empty())
        return synthesize_bundle(o, offgrid);
    Bundle b = bundle_from_file(o.input);
    if (offgrid != b.continuum.has_value())
        throw FormatError(std::string("measurement holds a ") + (offgrid ? "grid" : "continuum") +
                          " scene; use the matching solver");
    return b;
}

int cmd_diagnose(const Options& o)
{
    const SystemConfig c = load_system(o);
    const std::uint64_t seed = seed_of(o, c);
    Rng tr = make_stream(seed, Stream::tones);
    const ToneAssignment t = draw_tones(c, tr, selection_of(o));
    const auto op = assemble_matrix(c, t);
    const auto rep = make_report(op.matrix, "multitone", seed, c.n_range_bins_N, c.n_samples_M,
                                 c.tones_per_tx_Nc, c.n_tx_NT, c.n_rx_NR);
    const std::string csv = report_csv_header() + "\n" + report_csv_row(rep) + "\n";
    std::cout << csv;
    const fs::path dir = out_dir(o, "diagnose");
    write_text(dir / "report.csv", csv);
    write_json(dir / "tones.json", to_json(t));
    json files = {"report.csv", "tones.json"};
    if (!o.dump_matrix.empty()) {
        dump_matrix_binary(op.matrix, (dir / o.dump_matrix).string());
        files.push_back(o.dump_matrix);
    }
    json m = manifest("diagnose", c, seed, files);
    m["fingerprint"] = fingerprint(c, t);
    write_json(dir / "manifest.json", m);
    return 0;
}

int cmd_synth(const Options& o)
{
    const Bundle b = synthesize_bundle(o, o.offgrid);
    const fs::path dir = out_dir(o, "synth");
    write_json(dir / "measurement.json", bundle_json(b));
    write_json(dir / "manifest.json", manifest("synth", b.config, b.seed, {"measurement.json"}));
    std::cout << "rows " << b.y.size() << ", noise sigma " << cirad::detail::format_double(b.sigma) << ", written to "
              << (dir / "measurement.json").string() << "\n";
    return 0;
}

int cmd_solve_grid(const Options& o)
{
    const Bundle b = obtain_bundle(o, false);
    const auto op = assemble_matrix(b.config, b.tones);
    LassoConfig cfg;
    cfg.sigma = b.sigma;
    if (o.lambda)
        cfg.lambda = *o.lambda;
    else if (b.sigma == 0.0)
        cfg.lambda = 1e-6 * (op.matrix.adjoint() * b.y).cwiseAbs().maxCoeff();
    cfg.continuation = b.sigma == 0.0 ? 6 : 0;
    cfg.max_iters = 20000;
    cfg.debias = true;
    RecoveryResult res;
    try {
        res = solve_lasso(op.matrix, b.y, cfg);
    } catch (const RankError&) {
        cfg.debias = false;
        res = solve_lasso(op.matrix, b.y, cfg);
    }
    const Vec x = b.grid->as_vector();
    const auto roc = roc_curve(res.estimate, b.grid->support);
    json metrics = {{"rec_error", reconstruction_error(res.estimate, x)},
                    {"auc", roc.auc},
                    {"iterations", res.iterations},
                    {"converged", res.converged},
                    {"lambda", res.lambda},
                    {"debiased", cfg.debias}};
    const fs::path dir = out_dir(o, "solve-grid");
    json est = json::array();
    for (std::size_t i : res.detected_support)
        est.push_back({{"index", i}, {"value", to_json(res.estimate(static_cast<Index>(i)))}});
    write_json(dir / "result.json", {{"metrics", metrics}, {"detected", est}, {"truth", to_json(*b.grid)}});
    std::ofstream trace(dir / "trace.csv");
    write_trace_csv(trace, res);
    write_json(dir / "manifest.json", manifest("solve-grid", b.config, b.seed, {"result.json", "trace.csv"}));
    std::cout << metrics.dump() << "\n";
    return 0;
}

int cmd_solve_offgrid(const Options& o)
{
    const Bundle b = obtain_bundle(o, true);
    const AtomEvaluator atoms(b.config, b.tones);
    const double rows = static_cast<double>(b.y.size());
    AdcgConfig cfg;
    cfg.abs_tol = b.sigma * std::sqrt(rows + 3.0 * std::sqrt(rows));
    cfg.tau_l1 = 2.0 * b.continuum->l1();
    const auto est = run_adcg(b.y, atoms, cfg);
    const auto m = offgrid_metrics(est.atoms, *b.continuum, b.config);
    json metrics = {{"m1", m.m1}, {"m2", m.m2}, {"m3", m.m3}, {"all_found", m.all_found},
                    {"n_atoms", est.atoms.size()}, {"iterations", est.iterations},
                    {"residual_norm", est.residual_norm}};
    json at = json::array();
    for (const auto& t : est.atoms)
        at.push_back({{"delay", t.delay}, {"angle", t.angle}, {"amplitude", to_json(t.amplitude)}});
    const fs::path dir = out_dir(o, "solve-offgrid");
    write_json(dir / "result.json", {{"metrics", metrics}, {"atoms", at}, {"truth", to_json(*b.continuum)}});
    write_json(dir / "manifest.json", manifest("solve-offgrid", b.config, b.seed, {"result.json"}));
    std::cout << metrics.dump() << "\n";
    return 0;
}

int cmd_sweep(const Options& o)
{
    if (o.experiment.empty())
        throw CLI::RequiredError("--experiment");
    ExperimentSpec spec = default_spec(parse_experiment(o.experiment));
    if (!o.config.empty()) {
        std::ifstream f(o.config);
        if (!f)
            throw FormatError("cannot open config file '" + o.config + "'");
        std::stringstream ss;
        ss << f.rdbuf();
        apply_spec_text(spec, ss.str());
    }
    for (const auto& kv : o.overrides) {
        const auto [k, v] = split_override(kv);
        apply_spec_setting(spec, k, v);
    }
    if (o.seed)
        spec.master_seed = *o.seed;
    spec.jobs = o.jobs;
    const auto res = run_sweep(spec, o.out);
    std::cout << res.aggregate_csv;
    return 0;
}

int cmd_replay(const Options& o)
{
    std::ifstream f(o.record);
    if (!f)
        throw FormatError("cannot open record '" + o.record + "'");
    json rec;
    try {
        rec = json::parse(f);
    } catch (const json::exception& e) {
        throw FormatError(std::string("record is not valid JSON: ") + e.what());
    }
    const auto r = replay_record(rec);
    std::cout << r.replayed.dump() << "\nreplay identical\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"cirad: compressive illumination radar simulation and sparse recovery"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* s, bool with_config_required) {
        auto* c = s->add_option("--config", o.config, "system configuration file (key = value lines)");
        if (with_config_required)
            c->check(CLI::ExistingFile);
        s->add_option("--seed", o.seed, "master seed for every random stream");
        s->add_option("--out", o.out, "output directory")->capture_default_str();
        s->add_option("--override", o.overrides, "key=value setting, repeatable; wins over the config file");
        s->add_option("--selection", o.selection, "tone selection: bernoulli or fixed_count")
            ->capture_default_str();
    };
    auto scene_opts = [&](CLI::App* s) {
        s->add_option("--K", o.k, "number of targets")->capture_default_str();
        s->add_option("--snr-db", o.snr_db, "measurement SNR in dB")->capture_default_str();
        s->add_flag("--noiseless", o.noiseless, "no measurement noise");
    };

    auto* diagnose = app.add_subcommand("diagnose", "coherence, operator norm and column norms of one draw");
    common(diagnose, true);
    diagnose->add_option("--dump-matrix", o.dump_matrix, "also write the dense matrix (binary) under this name");

    auto* synth = app.add_subcommand("synth", "draw a scene and write its measurement");
    common(synth, true);
    scene_opts(synth);
    synth->add_flag("--offgrid", o.offgrid, "continuous delays and angles instead of grid points");

    auto* grid = app.add_subcommand("solve-grid", "LASSO recovery on the range-angle grid");
    common(grid, true);
    scene_opts(grid);
    grid->add_option("--input", o.input, "measurement.json written by synth")->check(CLI::ExistingFile);
    grid->add_option("--lambda", o.lambda, "l1 weight (default: auto rule)");

    auto* offgrid = app.add_subcommand("solve-offgrid", "ADCG recovery over continuous delay and angle");
    common(offgrid, true);
    scene_opts(offgrid);
    offgrid->add_option("--input", o.input, "measurement.json written by synth")->check(CLI::ExistingFile);

    auto* sweep = app.add_subcommand("sweep", "Monte Carlo experiment sweep");
    common(sweep, true);
    sweep->add_option("--experiment", o.experiment, "experiment name")->required();
    sweep->add_option("--jobs", o.jobs, "worker threads; 1 is the sequential reference")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    auto* replay = app.add_subcommand("replay", "re-run a trial record and compare its metrics");
    replay->add_option("--record", o.record, "trial_NNNN.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (diagnose->parsed())
            return cmd_diagnose(o);
        if (synth->parsed())
            return cmd_synth(o);
        if (grid->parsed())
            return cmd_solve_grid(o);
        if (offgrid->parsed())
            return cmd_solve_offgrid(o);
        if (sweep->parsed())
            return cmd_sweep(o);
        if (replay->parsed())
            return cmd_replay(o);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.name() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << app.help();
    return 2;
}
