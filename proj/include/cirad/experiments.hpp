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

#ifndef CIRAD_EXPERIMENTS_HPP
#define CIRAD_EXPERIMENTS_HPP

#include "adcg.hpp"
#include "config.hpp"
#include "diagnostics.hpp"
#include "errors.hpp"
#include "illumination.hpp"
#include "lasso.hpp"
#include "metrics.hpp"
#include "random.hpp"
#include "scene.hpp"
#include "sensing.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#ifndef CIRAD_REVISION
#define CIRAD_REVISION "unknown"
#endif

namespace cirad
{

enum class ExperimentKind
{
    coherence_sweep,
    phase_transition_noiseless,
    auc_vs_snr,
    auc_vs_undersampling,
    mimo_roc,
    rip_auc_map,
    offgrid_profile
};

inline const std::vector<std::pair<ExperimentKind, std::string>>& experiment_names()
{
    static const std::vector<std::pair<ExperimentKind, std::string>> names = {
        {ExperimentKind::coherence_sweep, "coherence_sweep"},
        {ExperimentKind::phase_transition_noiseless, "phase_transition_noiseless"},
        {ExperimentKind::auc_vs_snr, "auc_vs_snr"},
        {ExperimentKind::auc_vs_undersampling, "auc_vs_undersampling"},
        {ExperimentKind::mimo_roc, "mimo_roc"},
        {ExperimentKind::rip_auc_map, "rip_auc_map"},
        {ExperimentKind::offgrid_profile, "offgrid_profile"}};
    return names;
}

inline std::string to_string(ExperimentKind k)
{
    for (const auto& [kind, name] : experiment_names())
        if (kind == k)
            return name;
    return "unknown";
}

inline ExperimentKind parse_experiment(const std::string& name)
{
    for (const auto& [kind, n] : experiment_names())
        if (n == name)
            return kind;
    throw SpecError("unknown experiment '" + name + "'");
}

/// One swept parameter. Recognised names:
///   N_c, N, M, N_T, N_R  system sizes
///   m_ratio              M = round(m_ratio N)
///   K                    number of targets
///   k_ratio              K = ceil(k_ratio M)
///   snr_db               measurement SNR
struct Axis
{
    std::string name;
    std::vector<double> values;
};

inline const std::vector<std::string>& axis_names()
{
    static const std::vector<std::string> names = {"N_c", "N", "M", "N_T", "N_R",
                                                   "m_ratio", "K", "k_ratio", "snr_db"};
    return names;
}

struct ExperimentSpec
{
    ExperimentKind kind = ExperimentKind::coherence_sweep;
    RawParameters base;
    std::vector<Axis> axes; // cartesian product, first axis varies slowest
    std::size_t trials = 50;
    std::uint64_t master_seed = 0;
    std::size_t jobs = 1;

    std::size_t k = 5;       // targets when no K axis is swept
    double snr_db = 12.0;    // when no snr_db axis is swept
    AmplitudeKind amplitude = AmplitudeKind::unit;
    SelectionMode selection = SelectionMode::fixed_count;
    bool toeplitz = false;   // replace the multitone operator by a Gaussian Toeplitz baseline

    // solver settings
    double lambda_scale = 1.0;   // noisy runs: lambda = scale * auto rule
    double bp_lambda_rel = 1e-6; // noiseless runs: lambda = rel * ||A* y||_inf
    int continuation = 6;
    int max_iters = 20000;
    double tau_scale = 2.0;      // off-grid l1 budget = tau_scale * sum |x_k|

    std::vector<double> etas = {1.0, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0, 100.0};
};

/// Default sweep for each experiment, at desk scale.
inline ExperimentSpec default_spec(ExperimentKind kind)
{
    ExperimentSpec s;
    s.kind = kind;
    s.base.n_range_bins_N = 334;
    s.base.tones_per_tx_Nc = 20;
    switch (kind) {
    case ExperimentKind::coherence_sweep:
        s.axes = {{"N_c", {1, 10, 20}}, {"m_ratio", {0.3}}};
        break;
    case ExperimentKind::phase_transition_noiseless:
        s.axes = {{"m_ratio", {0.5}}, {"k_ratio", {0.05, 0.5}}};
        break;
    case ExperimentKind::auc_vs_snr:
        s.amplitude = AmplitudeKind::complex_gaussian;
        s.lambda_scale = 0.25;
        s.axes = {{"m_ratio", {0.5}}, {"snr_db", {0, 10, 20, 30}}, {"k_ratio", {0.05, 0.1, 0.2}}};
        break;
    case ExperimentKind::auc_vs_undersampling:
        s.amplitude = AmplitudeKind::complex_gaussian;
        s.lambda_scale = 0.25;
        s.snr_db = 20.0;
        s.axes = {{"m_ratio", {0.2, 0.3, 0.5}}, {"k_ratio", {0.05, 0.1, 0.2}}};
        break;
    case ExperimentKind::mimo_roc:
    case ExperimentKind::rip_auc_map:
        s.base.n_range_bins_N = 128;
        s.base.n_samples_M = 43;
        s.base.n_tx_NT = 4;
        s.base.n_rx_NR = 4;
        s.base.tones_per_tx_Nc = 5;
        s.amplitude = AmplitudeKind::complex_gaussian;
        s.lambda_scale = 0.25;
        s.k = 10;
        s.trials = 30;
        if (kind == ExperimentKind::mimo_roc)
            s.axes = {{"N_c", {1, 3, 5}}};
        else
            s.axes = {{"snr_db", {0, 6, 12, 18}}, {"K", {5, 10, 20}}};
        break;
    case ExperimentKind::offgrid_profile:
        s.base.n_samples_M = 111;
        s.k = 20;
        s.axes = {{"N_c", {1, 10, 20}}};
        break;
    }
    return s;
}

inline bool is_noiseless(ExperimentKind k)
{
    return k == ExperimentKind::coherence_sweep || k == ExperimentKind::phase_transition_noiseless;
}

/// Per-trial success rule; empty for the coherence sweep.
inline std::optional<std::pair<std::string, double>> success_rule(ExperimentKind k)
{
    switch (k) {
    case ExperimentKind::phase_transition_noiseless:
        return std::pair<std::string, double>{"rec_error<", 1e-5};
    case ExperimentKind::auc_vs_snr:
    case ExperimentKind::auc_vs_undersampling:
        return std::pair<std::string, double>{"auc>", 0.99};
    case ExperimentKind::mimo_roc:
    case ExperimentKind::rip_auc_map:
        return std::pair<std::string, double>{"auc>", 0.95};
    case ExperimentKind::offgrid_profile:
        return std::pair<std::string, double>{"all_found&m1<0.05l1", 0.05};
    default:
        return std::nullopt;
    }
}

/// Metrics summarised in the aggregate table.
inline std::vector<std::string> summary_metrics(ExperimentKind k)
{
    switch (k) {
    case ExperimentKind::coherence_sweep:
        return {"mu", "mu_baseline", "opnorm", "min_colnorm2", "max_colnorm2"};
    case ExperimentKind::phase_transition_noiseless:
        return {"rec_error", "iterations"};
    case ExperimentKind::offgrid_profile:
        return {"m1", "m2", "m3", "n_atoms"};
    default:
        return {"auc", "rec_error"};
    }
}

// ---------------------------------------------------------------------------
// Spec parsing

namespace detail
{

inline std::vector<double> parse_list(const std::string& key, const std::string& value)
{
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        if (!t.empty())
            out.push_back(parse_double(key, t));
    }
    return out;
}

} // namespace detail

/// Names accepted by `apply_spec_setting` besides the system config keys.
inline const std::vector<std::string>& spec_keys()
{
    static const std::vector<std::string> keys = {
        "experiment", "trials", "seed", "jobs", "K", "snr_db", "amplitude", "selection",
        "system", "lambda_scale", "bp_lambda_rel", "continuation", "max_iters", "tau_scale",
        "etas", "sweep.<axis>"};
    return keys;
}

/// Applies a `key = value` setting to a spec. System config keys go to the
/// base parameters; `sweep.<axis> = v1, v2, ...` replaces or adds an axis and
/// an empty list removes it.
inline void apply_spec_setting(ExperimentSpec& s, const std::string& key, const std::string& value)
{
    using detail::parse_count;
    using detail::parse_double;
    if (is_config_key(key)) {
        apply_setting(s.base, key, value);
        return;
    }
    if (key.rfind("sweep.", 0) == 0) {
        const std::string name = key.substr(6);
        const auto& names = axis_names();
        if (std::find(names.begin(), names.end(), name) == names.end())
            throw SpecError("unknown sweep axis '" + name + "'");
        auto values = detail::parse_list(key, value);
        auto it = std::find_if(s.axes.begin(), s.axes.end(), [&](const Axis& a) { return a.name == name; });
        if (values.empty()) {
            if (it != s.axes.end())
                s.axes.erase(it);
        } else if (it != s.axes.end()) {
            it->values = std::move(values);
        } else {
            s.axes.push_back({name, std::move(values)});
        }
        return;
    }
    if (key == "experiment") {
        s.kind = parse_experiment(value);
    } else if (key == "trials") {
        const long long t = parse_count(key, value);
        if (t < 0)
            throw SpecError("trial count must be non-negative");
        s.trials = static_cast<std::size_t>(t);
    } else if (key == "seed") {
        s.master_seed = static_cast<std::uint64_t>(parse_count(key, value));
    } else if (key == "jobs") {
        const long long j = parse_count(key, value);
        if (j < 1)
            throw SpecError("jobs must be at least 1");
        s.jobs = static_cast<std::size_t>(j);
    } else if (key == "K") {
        const long long k = parse_count(key, value);
        if (k < 1)
            throw SpecError("K must be positive");
        s.k = static_cast<std::size_t>(k);
    } else if (key == "snr_db") {
        s.snr_db = parse_double(key, value);
    } else if (key == "amplitude") {
        if (value == "unit")
            s.amplitude = AmplitudeKind::unit;
        else if (value == "complex_gaussian")
            s.amplitude = AmplitudeKind::complex_gaussian;
        else
            throw SpecError("amplitude must be unit or complex_gaussian");
    } else if (key == "selection") {
        if (value == "bernoulli")
            s.selection = SelectionMode::bernoulli;
        else if (value == "fixed_count")
            s.selection = SelectionMode::fixed_count;
        else
            throw SpecError("selection must be bernoulli or fixed_count");
    } else if (key == "system") {
        if (value == "multitone")
            s.toeplitz = false;
        else if (value == "toeplitz")
            s.toeplitz = true;
        else
            throw SpecError("system must be multitone or toeplitz");
    } else if (key == "lambda_scale") {
        s.lambda_scale = parse_double(key, value);
    } else if (key == "bp_lambda_rel") {
        s.bp_lambda_rel = parse_double(key, value);
    } else if (key == "continuation") {
        s.continuation = static_cast<int>(parse_count(key, value));
    } else if (key == "max_iters") {
        s.max_iters = static_cast<int>(parse_count(key, value));
    } else if (key == "tau_scale") {
        s.tau_scale = parse_double(key, value);
    } else if (key == "etas") {
        s.etas = detail::parse_list(key, value);
    } else {
        throw FormatError("unknown setting '" + key + "'");
    }
}

/// `key = value` lines, `#` comments; the same grammar as system config files.
inline void apply_spec_text(ExperimentSpec& s, const std::string& text)
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
        apply_spec_setting(s, detail::trim(body.substr(0, eq)), detail::trim(body.substr(eq + 1)));
    }
}

inline nlohmann::json to_json(const ExperimentSpec& s)
{
    nlohmann::json axes = nlohmann::json::array();
    for (const auto& a : s.axes)
        axes.push_back({{"name", a.name}, {"values", a.values}});
    RawParameters b = s.base;
    nlohmann::json base = {{"bandwidth_B", b.bandwidth_B},
                           {"carrier_fc", b.carrier_fc},
                           {"n_range_bins_N", b.n_range_bins_N},
                           {"n_tx_NT", b.n_tx_NT},
                           {"n_rx_NR", b.n_rx_NR},
                           {"tones_per_tx_Nc", b.tones_per_tx_Nc},
                           {"tx_spacing_dT", b.tx_spacing_dT},
                           {"rng_seed", b.rng_seed}};
    if (b.pulse_tau)
        base["pulse_tau"] = *b.pulse_tau;
    if (b.unambiguous_tu)
        base["unambiguous_tu"] = *b.unambiguous_tu;
    if (b.n_samples_M)
        base["n_samples_M"] = *b.n_samples_M;
    if (b.rx_spacing_dR)
        base["rx_spacing_dR"] = *b.rx_spacing_dR;
    if (b.alias_p)
        base["alias_p"] = *b.alias_p;
    return {{"experiment", to_string(s.kind)},
            {"base", base},
            {"axes", axes},
            {"trials", s.trials},
            {"master_seed", s.master_seed},
            {"K", s.k},
            {"snr_db", s.snr_db},
            {"amplitude", s.amplitude == AmplitudeKind::unit ? "unit" : "complex_gaussian"},
            {"selection", s.selection == SelectionMode::bernoulli ? "bernoulli" : "fixed_count"},
            {"system", s.toeplitz ? "toeplitz" : "multitone"},
            {"lambda_scale", s.lambda_scale},
            {"bp_lambda_rel", s.bp_lambda_rel},
            {"continuation", s.continuation},
            {"max_iters", s.max_iters},
            {"tau_scale", s.tau_scale},
            {"etas", s.etas}};
}

// ---------------------------------------------------------------------------
// Cells

struct Cell
{
    std::vector<double> key; // axis values, in axis order
    SystemConfig config;
    std::size_t k = 0;
    double snr_db = 0.0;
};

inline void validate(const ExperimentSpec& s)
{
    for (std::size_t i = 0; i < s.axes.size(); ++i) {
        const auto& a = s.axes[i];
        const auto& names = axis_names();
        if (std::find(names.begin(), names.end(), a.name) == names.end())
            throw SpecError("unknown sweep axis '" + a.name + "'");
        if (a.values.empty())
            throw SpecError("sweep axis '" + a.name + "' has no values");
        for (std::size_t j = 0; j < i; ++j)
            if (s.axes[j].name == a.name)
                throw SpecError("sweep axis '" + a.name + "' given twice");
        for (double v : a.values) {
            if (!std::isfinite(v))
                throw SpecError("sweep axis '" + a.name + "' has a non-finite value");
            if (a.name == "snr_db")
                continue;
            if (!(v > 0.0))
                throw SpecError("sweep axis '" + a.name + "' needs positive values");
            const bool ratio = a.name == "m_ratio" || a.name == "k_ratio";
            if (ratio && v > 1.0)
                throw SpecError("sweep axis '" + a.name + "' is a ratio in (0, 1]");
            if (!ratio && std::floor(v) != v)
                throw SpecError("sweep axis '" + a.name + "' needs integral values");
        }
    }
    if (s.etas.empty() || std::any_of(s.etas.begin(), s.etas.end(), [](double e) { return !(e >= 1.0); }))
        throw SpecError("profile factors eta must be >= 1");
    if (!(s.lambda_scale > 0.0) || !(s.bp_lambda_rel > 0.0) || !(s.tau_scale > 0.0))
        throw SpecError("solver scales must be positive");
    if (s.max_iters < 1 || s.continuation < 0)
        throw SpecError("solver iteration settings out of range");
    if (s.toeplitz && (s.kind == ExperimentKind::offgrid_profile || s.kind == ExperimentKind::coherence_sweep))
        throw SpecError("the Toeplitz system applies to on-grid recovery experiments only");
}

inline Cell resolve_cell(const ExperimentSpec& s, const std::vector<double>& key)
{
    RawParameters r = s.base;
    std::optional<double> m_ratio, k_ratio;
    Cell cell;
    cell.key = key;
    cell.k = s.k;
    cell.snr_db = s.snr_db;
    for (std::size_t i = 0; i < s.axes.size(); ++i) {
        const std::string& n = s.axes[i].name;
        const double v = key[i];
        const auto count = static_cast<long long>(v);
        if (n == "N_c")
            r.tones_per_tx_Nc = count;
        else if (n == "N")
            r.n_range_bins_N = count;
        else if (n == "M")
            r.n_samples_M = count;
        else if (n == "N_T")
            r.n_tx_NT = count;
        else if (n == "N_R")
            r.n_rx_NR = count;
        else if (n == "m_ratio")
            m_ratio = v;
        else if (n == "K")
            cell.k = static_cast<std::size_t>(count);
        else if (n == "k_ratio")
            k_ratio = v;
        else if (n == "snr_db")
            cell.snr_db = v;
    }
    if (m_ratio)
        r.n_samples_M = std::max<long long>(1, std::llround(*m_ratio * static_cast<double>(r.n_range_bins_N)));
    cell.config = build_config(r);
    if (k_ratio)
        cell.k = static_cast<std::size_t>(
            std::max(1.0, std::ceil(*k_ratio * static_cast<double>(cell.config.n_samples_M) - 1e-9)));
    return cell;
}

/// Cartesian product of the axes; the first axis varies slowest.
inline std::vector<Cell> make_cells(const ExperimentSpec& s)
{
    validate(s);
    std::vector<std::vector<double>> keys{{}};
    for (const auto& a : s.axes) {
        std::vector<std::vector<double>> next;
        for (const auto& k : keys)
            for (double v : a.values) {
                auto e = k;
                e.push_back(v);
                next.push_back(std::move(e));
            }
        keys = std::move(next);
    }
    std::vector<Cell> cells;
    for (const auto& k : keys)
        cells.push_back(resolve_cell(s, k));
    return cells;
}

// ---------------------------------------------------------------------------
// Trials

/// Everything a trial depends on. A TrialRecord stores exactly this, so a
/// replay re-enters `run_trial` with identical inputs.
struct TrialInput
{
    ExperimentKind kind = ExperimentKind::coherence_sweep;
    std::size_t cell = 0;
    std::size_t trial = 0;
    std::uint64_t seed = 0; // noise and baseline streams derive from it
    SystemConfig config;
    bool toeplitz = false;
    std::optional<ToneAssignment> tones;
    std::optional<GridScene> grid;
    std::optional<ContinuumScene> continuum;
    double snr_db = 0.0;
    double lambda_scale = 1.0;
    double bp_lambda_rel = 1e-6;
    int continuation = 6;
    int max_iters = 20000;
    double tau_scale = 2.0;
};

struct TrialOutcome
{
    std::map<std::string, double> metrics;
    nlohmann::json outputs = nlohmann::json::object();
    double wall_time = 0.0;
};

/// Sensing matrix for a trial: the multitone operator, or a Gaussian Toeplitz
/// baseline of the same shape drawn from the trial's baseline stream.
inline Mat trial_matrix(const TrialInput& in)
{
    if (in.toeplitz) {
        Rng rng = make_stream(in.seed, Stream::baseline);
        return make_toeplitz_baseline(static_cast<Index>(in.config.rows()), static_cast<Index>(in.config.cols()),
                                      BaselineKind::toeplitz_gaussian, rng);
    }
    return assemble_matrix(in.config, *in.tones).matrix;
}

inline nlohmann::json roc_json(const RocCurve& roc)
{
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : roc.points)
        pts.push_back({p.threshold, p.pd, p.pfa});
    return pts;
}

namespace detail
{

inline void run_coherence(const TrialInput& in, TrialOutcome& out)
{
    const Mat a = assemble_matrix(in.config, *in.tones).matrix;
    const auto cn = column_norms_sq(a);
    out.metrics["mu"] = mutual_coherence(a);
    out.metrics["opnorm"] = operator_norm(a);
    out.metrics["min_colnorm2"] = cn.min;
    out.metrics["max_colnorm2"] = cn.max;
    Rng rng = make_stream(in.seed, Stream::baseline);
    const Mat b = make_toeplitz_baseline(a.rows(), a.cols(), BaselineKind::toeplitz_gaussian, rng);
    out.metrics["mu_baseline"] = mutual_coherence(b);
    out.outputs["fingerprint"] = fingerprint(in.config, *in.tones);
}

inline void run_noiseless(const TrialInput& in, TrialOutcome& out)
{
    const Mat a = trial_matrix(in);
    const Vec x = in.grid->as_vector();
    const Vec y = a * x;
    LassoConfig cfg;
    cfg.lambda = in.bp_lambda_rel * (a.adjoint() * y).cwiseAbs().maxCoeff();
    cfg.continuation = in.continuation;
    cfg.max_iters = in.max_iters;
    const auto res = solve_lasso(a, y, cfg);
    Vec est = res.estimate;
    double rank_deficient = 0.0;
    try {
        est = debias(as_operator(a), y, res.detected_support);
    } catch (const RankError&) {
        // more detections than measurements: score the raw LASSO estimate
        rank_deficient = 1.0;
    }
    const double err = reconstruction_error(est, x);
    out.metrics["rec_error"] = err;
    out.metrics["iterations"] = res.iterations;
    out.metrics["converged"] = res.converged ? 1.0 : 0.0;
    out.metrics["debias_rank_deficient"] = rank_deficient;
    out.metrics["detected"] = static_cast<double>(res.detected_support.size());
    out.metrics["success"] = err < 1e-5 ? 1.0 : 0.0;
    out.outputs["lambda"] = res.lambda;
    out.outputs["detected_support"] = res.detected_support;
}

inline void run_noisy_grid(const TrialInput& in, TrialOutcome& out, double auc_threshold)
{
    const Mat a = trial_matrix(in);
    const Vec x = in.grid->as_vector();
    const Vec clean = a * x;
    const double sigma = sigma_for_snr(clean, in.snr_db);
    Rng noise = make_stream(in.seed, Stream::noise);
    const Measurement m = finish_measurement(clean, sigma, noise);
    LassoConfig cfg;
    cfg.sigma = sigma;
    cfg.lambda = in.lambda_scale * auto_lambda(sigma, a.cols());
    cfg.max_iters = in.max_iters;
    const auto res = solve_lasso(a, m.y, cfg);
    const auto roc = roc_curve(res.estimate, in.grid->support);
    out.metrics["auc"] = roc.auc;
    out.metrics["rec_error"] = reconstruction_error(res.estimate, x);
    out.metrics["iterations"] = res.iterations;
    out.metrics["noise_sigma"] = sigma;
    out.metrics["snr_db_realized"] = m.snr_db;
    out.metrics["success"] = roc.auc > auc_threshold ? 1.0 : 0.0;
    out.outputs["lambda"] = res.lambda;
    out.outputs["detected_support"] = res.detected_support;
    out.outputs["roc"] = roc_json(roc);
}

inline void run_offgrid(const TrialInput& in, TrialOutcome& out)
{
    const AtomEvaluator atoms(in.config, *in.tones);
    const auto& scene = *in.continuum;
    Vec clean = Vec::Zero(atoms.size());
    for (const auto& t : scene.targets)
        clean += t.amplitude * atoms.value(t.delay, t.angle);
    const double sigma = sigma_for_snr(clean, in.snr_db);
    Rng noise = make_stream(in.seed, Stream::noise);
    const Measurement m = finish_measurement(clean, sigma, noise);
    const double rows = static_cast<double>(atoms.size());
    AdcgConfig cfg;
    // discrepancy principle: stop once the residual is at the noise level
    cfg.abs_tol = sigma * std::sqrt(rows + 3.0 * std::sqrt(rows));
    cfg.tau_l1 = in.tau_scale * scene.l1();
    const auto est = run_adcg(m.y, atoms, cfg);
    const auto om = offgrid_metrics(est.atoms, scene, in.config);
    out.metrics["m1"] = om.m1;
    out.metrics["m2"] = om.m2;
    out.metrics["m3"] = om.m3;
    out.metrics["all_found"] = om.all_found ? 1.0 : 0.0;
    out.metrics["n_atoms"] = static_cast<double>(est.atoms.size());
    out.metrics["iterations"] = est.iterations;
    out.metrics["residual_norm"] = est.residual_norm;
    out.metrics["noise_sigma"] = sigma;
    out.metrics["success"] = (om.all_found && om.m1 < 0.05 * scene.l1()) ? 1.0 : 0.0;
    nlohmann::json at = nlohmann::json::array();
    for (const auto& t : est.atoms)
        at.push_back({t.delay, t.angle, t.amplitude.real(), t.amplitude.imag()});
    out.outputs["atoms"] = at;
    out.outputs["tau_l1"] = cfg.tau_l1;
}

} // namespace detail

/// Runs one trial. Deterministic in its input; the wall time is the only
/// field that varies between runs.
inline TrialOutcome run_trial(const TrialInput& in)
{
    const auto t0 = std::chrono::steady_clock::now();
    TrialOutcome out;
    switch (in.kind) {
    case ExperimentKind::coherence_sweep:
        detail::run_coherence(in, out);
        break;
    case ExperimentKind::phase_transition_noiseless:
        detail::run_noiseless(in, out);
        break;
    case ExperimentKind::auc_vs_snr:
    case ExperimentKind::auc_vs_undersampling:
        detail::run_noisy_grid(in, out, 0.99);
        break;
    case ExperimentKind::mimo_roc:
    case ExperimentKind::rip_auc_map:
        detail::run_noisy_grid(in, out, 0.95);
        break;
    case ExperimentKind::offgrid_profile:
        detail::run_offgrid(in, out);
        break;
    }
    out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

/// Per-trial seed: shared by every cell, so cells see common scenes and noise
/// wherever their shapes agree (the performance profile compares systems on
/// the same realizations).
inline std::uint64_t trial_seed(std::uint64_t master, std::size_t trial)
{
    return derive_seed(master, static_cast<std::uint64_t>(trial));
}

inline TrialInput make_trial_input(const ExperimentSpec& s, const Cell& cell, std::size_t cell_index,
                                   std::size_t trial)
{
    TrialInput in;
    in.kind = s.kind;
    in.cell = cell_index;
    in.trial = trial;
    in.seed = trial_seed(s.master_seed, trial);
    in.config = cell.config;
    in.toeplitz = s.toeplitz;
    in.snr_db = cell.snr_db;
    in.lambda_scale = s.lambda_scale;
    in.bp_lambda_rel = s.bp_lambda_rel;
    in.continuation = s.continuation;
    in.max_iters = s.max_iters;
    in.tau_scale = s.tau_scale;
    if (!s.toeplitz) {
        Rng tr = make_stream(in.seed, Stream::tones);
        in.tones = draw_tones(cell.config, tr, s.selection);
    }
    Rng sr = make_stream(in.seed, Stream::scene);
    if (s.kind == ExperimentKind::offgrid_profile) {
        in.continuum = draw_continuum_scene(cell.config, cell.k, sr, AmplitudeModel{s.amplitude, 1.0});
    } else if (s.kind != ExperimentKind::coherence_sweep) {
        in.grid = draw_grid_scene(cell.config, cell.k, AmplitudeModel{s.amplitude, 1.0}, sr);
    }
    return in;
}

// ---------------------------------------------------------------------------
// Records

inline nlohmann::json to_json(const TrialInput& in)
{
    nlohmann::json j = {{"experiment", to_string(in.kind)},
                        {"cell", in.cell},
                        {"trial", in.trial},
                        {"seed", in.seed},
                        {"config", to_json(in.config)},
                        {"system", in.toeplitz ? "toeplitz" : "multitone"},
                        {"snr_db", in.snr_db},
                        {"solver",
                         {{"lambda_scale", in.lambda_scale},
                          {"bp_lambda_rel", in.bp_lambda_rel},
                          {"continuation", in.continuation},
                          {"max_iters", in.max_iters},
                          {"tau_scale", in.tau_scale}}}};
    j["tones"] = in.tones ? to_json(*in.tones) : nlohmann::json(nullptr);
    if (in.grid)
        j["scene"] = {{"kind", "grid"}, {"data", to_json(*in.grid)}};
    else if (in.continuum)
        j["scene"] = {{"kind", "continuum"}, {"data", to_json(*in.continuum)}};
    else
        j["scene"] = nullptr;
    return j;
}

inline TrialInput trial_input_from_json(const nlohmann::json& j)
{
    try {
        TrialInput in;
        in.kind = parse_experiment(j.at("experiment").get<std::string>());
        in.cell = j.at("cell").get<std::size_t>();
        in.trial = j.at("trial").get<std::size_t>();
        in.seed = j.at("seed").get<std::uint64_t>();
        in.config = config_from_json(j.at("config"));
        in.toeplitz = j.at("system").get<std::string>() == "toeplitz";
        in.snr_db = j.at("snr_db").get<double>();
        const auto& sv = j.at("solver");
        in.lambda_scale = sv.at("lambda_scale").get<double>();
        in.bp_lambda_rel = sv.at("bp_lambda_rel").get<double>();
        in.continuation = sv.at("continuation").get<int>();
        in.max_iters = sv.at("max_iters").get<int>();
        in.tau_scale = sv.at("tau_scale").get<double>();
        if (!j.at("tones").is_null())
            in.tones = tones_from_json(in.config, j.at("tones"));
        const auto& sc = j.at("scene");
        if (!sc.is_null()) {
            if (sc.at("kind") == "grid")
                in.grid = grid_scene_from_json(sc.at("data"));
            else
                in.continuum = continuum_scene_from_json(sc.at("data"));
        }
        return in;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed trial record: ") + e.what());
    }
}

/// Metrics as stored in a record. Serialising and re-reading is exact for
/// finite doubles, so replays compare against this form.
inline nlohmann::json metrics_json(const std::map<std::string, double>& m)
{
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : m)
        j[k] = v;
    return nlohmann::json::parse(j.dump());
}

inline nlohmann::json make_record(const TrialInput& in, const TrialOutcome& out)
{
    nlohmann::json j = to_json(in);
    j["outputs"] = out.outputs;
    j["metrics"] = metrics_json(out.metrics);
    j["wall_time"] = out.wall_time;
    return j;
}

struct ReplayResult
{
    nlohmann::json recorded;
    nlohmann::json replayed;
    bool identical = false;
};

/// Re-runs a record from its snapshots. Raises ReplayMismatchError when any
/// metric differs in a single bit.
inline ReplayResult replay_record(const nlohmann::json& record)
{
    const TrialInput in = trial_input_from_json(record);
    ReplayResult r;
    r.recorded = record.at("metrics");
    r.replayed = metrics_json(run_trial(in).metrics);
    r.identical = r.recorded == r.replayed;
    if (!r.identical) {
        std::string which;
        for (const auto& [k, v] : r.replayed.items())
            if (!r.recorded.contains(k) || r.recorded.at(k) != v)
                which += (which.empty() ? "" : ", ") + k;
        throw ReplayMismatchError("replayed metrics differ from the record (" +
                                  (which.empty() ? std::string("metric set") : which) + ")");
    }
    return r;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepResult
{
    ExperimentSpec spec;
    std::vector<Cell> cells;
    std::vector<nlohmann::json> records; // ordered by (cell, trial)
    std::string aggregate_csv;
    std::string profile_csv; // offgrid_profile only
    std::string roc_csv;     // mimo_roc only
};

namespace detail
{

inline double median(std::vector<double> v)
{
    if (v.empty())
        return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Shortest text that reads back to the same double.
inline std::string csv_number(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::vector<double> metric_column(const std::vector<nlohmann::json>& recs, const std::string& name)
{
    std::vector<double> out;
    for (const auto& r : recs) {
        const auto& m = r.at("metrics");
        if (m.contains(name) && m.at(name).is_number())
            out.push_back(m.at(name).get<double>());
    }
    return out;
}

} // namespace detail

/// One row per cell. Reductions run over records sorted by trial index, so the
/// table does not depend on execution order.
inline std::string aggregate_csv(const ExperimentSpec& s, const std::vector<Cell>& cells,
                                 const std::vector<nlohmann::json>& records)
{
    std::ostringstream os;
    for (const auto& a : s.axes)
        os << "sweep_" << a.name << ',';
    os << "N,M,N_c,N_T,N_R,K,snr_db,trials";
    const bool success = success_rule(s.kind).has_value();
    if (success)
        os << ",successes,success_rate,wilson_lo,wilson_hi";
    const auto names = summary_metrics(s.kind);
    for (const auto& n : names)
        os << ",median_" << n << ",mean_" << n;
    if (!is_noiseless(s.kind) && s.kind != ExperimentKind::offgrid_profile)
        os << ",lambda_rule";
    os << '\n';
    if (s.trials == 0)
        return os.str();

    for (std::size_t c = 0; c < cells.size(); ++c) {
        std::vector<nlohmann::json> recs;
        for (const auto& r : records)
            if (r.at("cell").get<std::size_t>() == c)
                recs.push_back(r);
        std::sort(recs.begin(), recs.end(), [](const nlohmann::json& a, const nlohmann::json& b) {
            return a.at("trial").get<std::size_t>() < b.at("trial").get<std::size_t>();
        });
        const auto& cell = cells[c];
        for (double v : cell.key)
            os << detail::csv_number(v) << ',';
        os << cell.config.n_range_bins_N << ',' << cell.config.n_samples_M << ','
           << cell.config.tones_per_tx_Nc << ',' << cell.config.n_tx_NT << ',' << cell.config.n_rx_NR << ','
           << (s.kind == ExperimentKind::coherence_sweep ? 0 : cell.k) << ','
           << (is_noiseless(s.kind) ? std::string("inf") : detail::csv_number(cell.snr_db)) << ','
           << recs.size();
        if (success) {
            std::size_t hits = 0;
            for (double v : detail::metric_column(recs, "success"))
                hits += v > 0.5;
            const auto [lo, hi] = wilson_interval(hits, recs.size());
            os << ',' << hits << ','
               << detail::csv_number(recs.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(recs.size()))
               << ',' << detail::csv_number(lo) << ',' << detail::csv_number(hi);
        }
        for (const auto& n : names) {
            const auto col = detail::metric_column(recs, n);
            double mean = 0.0;
            for (double v : col)
                mean += v;
            mean = col.empty() ? std::numeric_limits<double>::quiet_NaN() : mean / static_cast<double>(col.size());
            os << ',' << detail::csv_number(detail::median(col)) << ',' << detail::csv_number(mean);
        }
        if (!is_noiseless(s.kind) && s.kind != ExperimentKind::offgrid_profile)
            os << ',' << detail::csv_number(s.lambda_scale) << "*2sigma*sqrt(2log(cols))";
        os << '\n';
    }
    return os.str();
}

/// Performance profile of every cell (system) against the others, per metric,
/// over realizations present in all cells.
inline std::string profile_csv(const ExperimentSpec& s, const std::vector<Cell>& cells,
                               const std::vector<nlohmann::json>& records)
{
    std::ostringstream os;
    os << "metric,cell";
    for (const auto& a : s.axes)
        os << ",sweep_" << a.name;
    os << ",eta,fraction\n";
    if (s.trials == 0 || cells.empty())
        return os.str();
    for (const std::string metric : {"m1", "m2", "m3"}) {
        std::vector<std::vector<double>> table(s.trials, std::vector<double>(cells.size(),
                                                                             std::numeric_limits<double>::quiet_NaN()));
        for (const auto& r : records)
            table[r.at("trial").get<std::size_t>()][r.at("cell").get<std::size_t>()] =
                r.at("metrics").at(metric).get<double>();
        const auto prof = performance_profile(table, s.etas);
        for (std::size_t c = 0; c < cells.size(); ++c)
            for (std::size_t e = 0; e < s.etas.size(); ++e) {
                os << metric << ',' << c;
                for (double v : cells[c].key)
                    os << ',' << detail::csv_number(v);
                os << ',' << detail::csv_number(s.etas[e]) << ',' << detail::csv_number(prof[c][e]) << '\n';
            }
    }
    return os.str();
}

/// Vertically averaged ROC per cell on a uniform P_FA grid.
inline std::string roc_csv(const ExperimentSpec& s, const std::vector<Cell>& cells,
                           const std::vector<nlohmann::json>& records)
{
    std::ostringstream os;
    os << "cell";
    for (const auto& a : s.axes)
        os << ",sweep_" << a.name;
    os << ",pfa,mean_pd\n";
    if (s.trials == 0)
        return os.str();
    const int steps = 100;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        std::vector<double> acc(steps + 1, 0.0);
        std::size_t n = 0;
        for (std::size_t t = 0; t < s.trials; ++t) {
            for (const auto& r : records) {
                if (r.at("cell").get<std::size_t>() != c || r.at("trial").get<std::size_t>() != t)
                    continue;
                ++n;
                const auto& pts = r.at("outputs").at("roc");
                for (int g = 0; g <= steps; ++g) {
                    const double f = static_cast<double>(g) / steps;
                    // linear interpolation along the piecewise-linear curve
                    double pd = 1.0;
                    for (std::size_t k = 1; k < pts.size(); ++k) {
                        const double f0 = pts[k - 1][2].get<double>(), f1 = pts[k][2].get<double>();
                        if (f <= f1) {
                            const double p0 = pts[k - 1][1].get<double>(), p1 = pts[k][1].get<double>();
                            pd = f1 > f0 ? p0 + (p1 - p0) * (f - f0) / (f1 - f0) : p1;
                            break;
                        }
                    }
                    acc[static_cast<std::size_t>(g)] += pd;
                }
            }
        }
        for (int g = 0; g <= steps; ++g) {
            os << c;
            for (double v : cells[c].key)
                os << ',' << detail::csv_number(v);
            os << ',' << detail::csv_number(static_cast<double>(g) / steps) << ','
               << detail::csv_number(n ? acc[static_cast<std::size_t>(g)] / static_cast<double>(n) : 0.0) << '\n';
        }
    }
    return os.str();
}

inline std::string record_filename(std::size_t cell, std::size_t trial, std::size_t trials)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "trial_%04zu.json", cell * trials + trial);
    return buf;
}

inline void write_text(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream f(p, std::ios::binary);
    if (!f)
        throw FormatError("cannot write '" + p.string() + "'");
    f << text;
}

/// Executes every (cell, trial) pair on a pool of `spec.jobs` workers. With a
/// non-empty `out_dir`, writes out_dir/<experiment>/{manifest.json,
/// aggregate.csv, trials/trial_NNNN.json} (plus profile.csv or roc.csv).
inline SweepResult run_sweep(const ExperimentSpec& spec, const std::string& out_dir = {})
{
    SweepResult res;
    res.spec = spec;
    res.cells = make_cells(spec);
    const std::size_t total = res.cells.size() * spec.trials;
    res.records.resize(total);

    std::filesystem::path dir;
    if (!out_dir.empty()) {
        dir = std::filesystem::path(out_dir) / to_string(spec.kind);
        std::filesystem::create_directories(dir / "trials");
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        while (!failed) {
            const std::size_t i = next++;
            if (i >= total)
                return;
            try {
                const std::size_t c = i / spec.trials, t = i % spec.trials;
                const TrialInput in = make_trial_input(spec, res.cells[c], c, t);
                res.records[i] = make_record(in, run_trial(in));
                if (!dir.empty())
                    write_text(dir / "trials" / record_filename(c, t, spec.trials), res.records[i].dump(1) + "\n");
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                failed = true;
            }
        }
    };
    const std::size_t jobs = std::max<std::size_t>(1, std::min(spec.jobs, std::max<std::size_t>(total, 1)));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }
    if (error)
        std::rethrow_exception(error);

    res.aggregate_csv = aggregate_csv(spec, res.cells, res.records);
    if (spec.kind == ExperimentKind::offgrid_profile)
        res.profile_csv = profile_csv(spec, res.cells, res.records);
    if (spec.kind == ExperimentKind::mimo_roc)
        res.roc_csv = roc_csv(spec, res.cells, res.records);

    if (!dir.empty()) {
        write_text(dir / "aggregate.csv", res.aggregate_csv);
        if (!res.profile_csv.empty())
            write_text(dir / "profile.csv", res.profile_csv);
        if (!res.roc_csv.empty())
            write_text(dir / "roc.csv", res.roc_csv);
        const std::string spec_text = to_json(spec).dump();
        char hash[17];
        std::snprintf(hash, sizeof hash, "%016llx",
                      static_cast<unsigned long long>(fnv1a(spec_text.data(), spec_text.size())));
        nlohmann::json cells = nlohmann::json::array();
        for (std::size_t c = 0; c < res.cells.size(); ++c)
            cells.push_back({{"index", c},
                             {"key", res.cells[c].key},
                             {"K", res.cells[c].k},
                             {"config", to_json(res.cells[c].config)}});
        nlohmann::json manifest = {{"experiment", to_string(spec.kind)},
                                   {"revision", CIRAD_REVISION},
                                   {"master_seed", spec.master_seed},
                                   {"config_hash", hash},
                                   {"spec", to_json(spec)},
                                   {"cells", cells},
                                   {"trial_count", total},
                                   {"aggregate", "aggregate.csv"},
                                   {"trials_dir", "trials"}};
        write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    }
    return res;
}

} // namespace cirad

#endif // CIRAD_EXPERIMENTS_HPP
