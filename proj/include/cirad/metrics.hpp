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

#ifndef CIRAD_METRICS_HPP
#define CIRAD_METRICS_HPP

#include "config.hpp"
#include "errors.hpp"
#include "linear_operator.hpp"
#include "scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace cirad
{

inline double reconstruction_error(const Vec& estimate, const Vec& truth)
{
    const double tn = truth.norm();
    if (tn == 0.0)
        return estimate.norm() == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return (estimate - truth).norm() / tn;
}

struct RocPoint
{
    double threshold = 0.0;
    double pd = 0.0;
    double pfa = 0.0;
};

struct RocCurve
{
    std::vector<RocPoint> points; // P_FA and P_D nondecreasing along the list
    double auc = 0.0;
};

/// Detection is `score > threshold`. P_FA is zero when there are no negatives.
inline RocPoint roc_point(const std::vector<double>& scores, const std::vector<bool>& truth,
                          double threshold)
{
    if (scores.size() != truth.size())
        throw ShapeError("scores and labels differ in length");
    std::size_t pos = 0, tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        pos += truth[i];
        if (scores[i] > threshold)
            (truth[i] ? tp : fp) += 1;
    }
    if (pos == 0)
        throw EmptyTruthError("ROC needs at least one true target");
    const std::size_t neg = scores.size() - pos;
    return {threshold, static_cast<double>(tp) / static_cast<double>(pos),
            neg ? static_cast<double>(fp) / static_cast<double>(neg) : 0.0};
}

/// Sweeps every distinct score as a threshold, from above the maximum (no
/// detections) to below the minimum (everything detected). AUC by trapezoids.
inline RocCurve roc_curve(const std::vector<double>& scores, const std::vector<bool>& truth)
{
    if (scores.size() != truth.size())
        throw ShapeError("scores and labels differ in length");
    std::size_t pos = 0;
    for (bool b : truth)
        pos += b;
    if (pos == 0)
        throw EmptyTruthError("ROC needs at least one true target");
    const std::size_t neg = scores.size() - pos;

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    const double top = scores.empty() ? 0.0 : scores[order.front()];
    curve.points.push_back({top, 0.0, 0.0});
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            (truth[order[i]] ? tp : fp) += 1;
            ++i;
        }
        // everything scoring >= s is detected, i.e. threshold just below s
        const double next = i < order.size() ? scores[order[i]] : -std::numeric_limits<double>::infinity();
        curve.points.push_back({next, static_cast<double>(tp) / static_cast<double>(pos),
                                neg ? static_cast<double>(fp) / static_cast<double>(neg) : 0.0});
    }
    for (std::size_t k = 1; k < curve.points.size(); ++k) {
        const auto& a = curve.points[k - 1];
        const auto& b = curve.points[k];
        curve.auc += 0.5 * (b.pfa - a.pfa) * (a.pd + b.pd);
    }
    if (neg == 0)
        curve.auc = 1.0;
    return curve;
}

/// Scores are |x_hat|; labels come from the true support.
inline RocCurve roc_curve(const Vec& estimate, const std::vector<std::size_t>& truth_support)
{
    std::vector<double> scores(static_cast<std::size_t>(estimate.size()));
    std::vector<bool> labels(scores.size(), false);
    for (std::size_t i = 0; i < scores.size(); ++i)
        scores[i] = std::abs(estimate(static_cast<Index>(i)));
    for (std::size_t s : truth_support) {
        if (s >= labels.size())
            throw IndexError("true support index outside the estimate");
        labels[s] = true;
    }
    return roc_curve(scores, labels);
}

// ---------------------------------------------------------------------------
// Off-grid scoring in range units

struct OffgridMetrics
{
    double m1 = 0.0; // total weight of detections outside every truth neighborhood
    double m2 = 0.0; // weight times squared range error inside neighborhoods, m^2
    double m3 = 0.0; // worst per-target amplitude mismatch
    bool all_found = false; // every truth has at least one estimate in its neighborhood
};

inline double to_range(double delay) { return speed_of_light * delay / 2.0; }

/// Neighborhood radius 0.2 c / (2B), i.e. a fifth of a range bin.
inline double neighborhood_radius(const SystemConfig& c)
{
    return 0.2 * speed_of_light / (2.0 * c.bandwidth_B);
}

inline OffgridMetrics offgrid_metrics(const std::vector<Target>& estimate, const ContinuumScene& truth,
                                      const SystemConfig& c)
{
    if (truth.targets.empty())
        throw EmptyTruthError("off-grid metrics need at least one true target");
    const double rad = neighborhood_radius(c);
    OffgridMetrics out;
    std::vector<double> tr;
    for (const auto& t : truth.targets)
        tr.push_back(to_range(t.delay));

    std::vector<cplx> captured(tr.size());
    std::vector<bool> found(tr.size(), false);
    for (const auto& e : estimate) {
        const double r = to_range(e.delay);
        const double mag = std::abs(e.amplitude);
        double nearest = std::numeric_limits<double>::infinity();
        for (double t : tr)
            nearest = std::min(nearest, std::abs(r - t));
        bool in_any = false;
        for (std::size_t j = 0; j < tr.size(); ++j) {
            if (std::abs(r - tr[j]) <= rad) {
                in_any = true;
                found[j] = true;
                captured[j] += e.amplitude;
                out.m2 += mag * nearest * nearest;
            }
        }
        if (!in_any)
            out.m1 += mag;
    }
    for (std::size_t j = 0; j < tr.size(); ++j)
        out.m3 = std::max(out.m3, std::abs(truth.targets[j].amplitude - captured[j]));
    out.all_found = std::all_of(found.begin(), found.end(), [](bool b) { return b; });
    return out;
}

// ---------------------------------------------------------------------------

/// table[p][s] holds metric m(p, s) for realization p and system s.
/// Result[s][e] = fraction of realizations with m(p, s) <= eta_e min_s m(p, s).
inline std::vector<std::vector<double>> performance_profile(
    const std::vector<std::vector<double>>& table, const std::vector<double>& etas)
{
    if (table.empty())
        return {};
    const std::size_t ns = table.front().size();
    for (const auto& row : table) {
        if (row.size() != ns)
            throw MissingCellError("performance table is ragged");
        for (double v : row) {
            if (std::isnan(v))
                throw MissingCellError("performance table has an empty cell");
            if (v < 0.0)
                throw RangeError("performance metrics must be non-negative");
        }
    }
    std::vector<std::vector<double>> out(ns, std::vector<double>(etas.size(), 0.0));
    for (const auto& row : table) {
        const double best = *std::min_element(row.begin(), row.end());
        for (std::size_t s = 0; s < ns; ++s)
            for (std::size_t e = 0; e < etas.size(); ++e)
                if (row[s] <= etas[e] * best)
                    out[s][e] += 1.0;
    }
    for (auto& r : out)
        for (auto& v : r)
            v /= static_cast<double>(table.size());
    return out;
}

/// Wilson score interval for a binomial proportion at 95 % confidence.
inline std::pair<double, double> wilson_interval(std::size_t successes, std::size_t trials)
{
    if (trials == 0)
        return {0.0, 1.0};
    const double z = 1.959963984540054;
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double den = 1.0 + z * z / n;
    const double centre = (p + z * z / (2.0 * n)) / den;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / den;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

} // namespace cirad

#endif // CIRAD_METRICS_HPP
