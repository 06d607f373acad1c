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

#ifndef CIRAD_ADCG_HPP
#define CIRAD_ADCG_HPP

#include "errors.hpp"
#include "sensing.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace cirad
{

struct DescentConfig
{
    int max_steps = 50;      // descent iterations per refinement call
    int max_backtracks = 40;
    double shrink = 0.5;     // backtracking ratio
    double init_step = 0.25; // in scaled units (range bins / angle-grid pitch)
    double armijo = 1e-4;
};

struct AdcgConfig
{
    double tau_l1 = std::numeric_limits<double>::infinity();
    std::size_t K_max = 50;
    std::size_t coarse_grid_factor = 4;
    DescentConfig descent;
    double abs_tol = 0.0;     // stop once ||r|| <= max(abs_tol, rel_tol ||y||)
    double rel_tol = 1e-6;
    double conv_tol = 1e-6;   // or once the outer loss drops by less than this fraction
    double prune_rel = 1e-6;  // atoms with |x| <= prune_rel * max |x| are removed
    double merge_tol = 1e-3;  // scaled distance under which atoms are merged
    int inner_iters = 10;     // refit / prune / refine alternations per outer step
    bool refine = true;
    bool grid_only = false;   // select among grid columns only, no local ascent
    bool normalized_selection = true;
};

struct ContinuumEstimate
{
    std::vector<Target> atoms;
    double residual_norm = 0.0;
    std::vector<Target> selection_history; // selected points, amplitude unused
    std::vector<double> loss_trace;        // 1/2 ||r||^2 after each outer step
    int iterations = 0;
    bool iteration_cap_hit = false;
};

/// Scaled coordinates: delay in range bins, angle in units of the grid pitch.
struct AtomScaling
{
    double bins_per_second = 1.0;
    double pitch = 1.0;
    double delay_extent = 1.0; // upper end of the open delay domain, in bins
    bool siso = true;

    explicit AtomScaling(const SystemConfig& c)
        : bins_per_second(c.bandwidth_B),
          pitch(c.siso() ? 1.0 : 2.0 / static_cast<double>(c.n_angles())),
          delay_extent(c.delay_extent_bins()), siso(c.siso())
    {
    }

    bool interior(double delta, double angle) const noexcept
    {
        return delta > 0.0 && delta < delay_extent && angle > -1.0 && angle < 1.0;
    }
};

// ---------------------------------------------------------------------------
// Weight refit

/// Euclidean projection of a non-negative vector onto {v >= 0, sum v <= tau}.
inline Eigen::VectorXd project_l1_magnitudes(const Eigen::VectorXd& a, double tau)
{
    if (a.sum() <= tau)
        return a;
    std::vector<double> u(a.data(), a.data() + a.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        cum += u[i];
        const double t = (cum - tau) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0)
            theta = t;
    }
    return (a.array() - theta).max(0.0).matrix();
}

/// Projection onto the complex l1 ball: magnitudes are projected, phases kept.
inline Vec project_l1_ball(const Vec& x, double tau)
{
    if (tau <= 0.0)
        return Vec::Zero(x.size());
    const Eigen::VectorXd mag = x.cwiseAbs();
    if (mag.sum() <= tau)
        return x;
    const Eigen::VectorXd p = project_l1_magnitudes(mag, tau);
    Vec out(x.size());
    for (Index i = 0; i < x.size(); ++i)
        out(i) = mag(i) > 0.0 ? x(i) * (p(i) / mag(i)) : cplx{};
    return out;
}

/// argmin ||Psi x - y||^2 subject to ||x||_1 <= tau.
inline Vec refit_weights(const Mat& psi, const Vec& y, double tau, int max_iters = 5000,
                         double tol = 1e-12)
{
    if (psi.rows() != y.size())
        throw ShapeError("atom matrix and measurement disagree in length");
    if (psi.cols() > psi.rows())
        throw ShapeError("more atoms than measurements");
    if (psi.cols() == 0 || tau <= 0.0)
        return Vec::Zero(psi.cols());
    const Vec ls = Eigen::CompleteOrthogonalDecomposition<Mat>(psi).solve(y);
    if (!std::isfinite(tau) || ls.cwiseAbs().sum() <= tau)
        return ls;

    const Mat g = psi.adjoint() * psi;
    const Vec b = psi.adjoint() * y;
    const double lip = Eigen::SelfAdjointEigenSolver<Mat>(g, Eigen::EigenvaluesOnly)
                           .eigenvalues()
                           .maxCoeff();
    const double step = 1.0 / lip;
    Vec x = project_l1_ball(ls, tau), z = x;
    double t = 1.0;
    for (int it = 0; it < max_iters; ++it) {
        const Vec xn = project_l1_ball(z - step * (g * z - b), tau);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        z = xn + ((t - 1.0) / t_next) * (xn - x);
        const double change = (xn - x).norm();
        x = xn;
        t = t_next;
        if (change <= tol * std::max(1.0, x.norm()))
            break;
    }
    return x;
}

// ---------------------------------------------------------------------------

/// ADCG on the atoms of one tone realization. Holds the coarse selection
/// dictionary, which depends only on the realization.
class Adcg
{
public:
    Adcg(const AtomEvaluator& atoms, AdcgConfig cfg)
        : atoms_(atoms), cfg_(std::move(cfg)), scale_(atoms.config())
    {
        if (cfg_.K_max < 1 || cfg_.coarse_grid_factor < 1)
            throw RangeError("K_max and coarse_grid_factor must be at least 1");
        build_dictionary();
    }

    const AdcgConfig& config() const noexcept { return cfg_; }
    const std::vector<std::pair<double, double>>& grid_points() const noexcept { return points_; }

    /// Point of the continuum best correlated with `residual`. Returns
    /// (delay seconds, cos theta).
    std::pair<double, double> select_atom(const Vec& residual, double tol = 0.0) const
    {
        const double rn = residual.norm();
        if (!(rn > tol) || rn == 0.0)
            throw DegenerateResidualError("residual norm " + std::to_string(rn) +
                                          " is at or below the stopping tolerance");
        const Vec corr = dict_.adjoint() * residual;
        Index best = 0;
        double best_val = -1.0;
        for (Index i = 0; i < corr.size(); ++i) {
            const double v = std::abs(corr(i));
            if (v > best_val) { // strict: lowest index wins ties
                best_val = v;
                best = i;
            }
        }
        double delta = points_[static_cast<std::size_t>(best)].first;
        double angle = points_[static_cast<std::size_t>(best)].second;
        if (!cfg_.grid_only)
            ascend(residual, delta, angle);
        return {delta / scale_.bins_per_second, angle};
    }

    /// Descent on the atom parameters with weights held fixed. Each step
    /// follows the normalized negative gradient with Armijo backtracking and
    /// is rejected if it leaves the domain.
    std::vector<Target> refine_support(std::vector<Target> atoms, const Vec& y) const
    {
        if (atoms.empty())
            return atoms;
        std::vector<double> p = pack(atoms);
        double loss = loss_at(p, atoms, y);
        double step = cfg_.descent.init_step;
        for (int it = 0; it < cfg_.descent.max_steps; ++it) {
            const std::vector<double> g = loss_gradient(p, atoms, y);
            double gn = 0.0;
            for (double v : g)
                gn += v * v;
            gn = std::sqrt(gn);
            if (!(gn > 0.0) || !std::isfinite(gn))
                break;
            bool accepted = false;
            double s = std::min(2.0 * step, cfg_.descent.init_step);
            for (int bt = 0; bt < cfg_.descent.max_backtracks; ++bt, s *= cfg_.descent.shrink) {
                std::vector<double> q(p.size());
                for (std::size_t i = 0; i < p.size(); ++i)
                    q[i] = p[i] - s * g[i] / gn;
                if (!inside(q))
                    continue;
                const double lq = loss_at(q, atoms, y);
                if (lq <= loss - cfg_.descent.armijo * s * gn) {
                    p = std::move(q);
                    loss = lq;
                    step = s;
                    accepted = true;
                    break;
                }
            }
            if (!accepted)
                break;
        }
        unpack(p, atoms);
        return atoms;
    }

    ContinuumEstimate run(const Vec& y) const
    {
        if (y.size() != atoms_.size())
            throw ShapeError("measurement length does not match the atoms");
        ContinuumEstimate est;
        const double stop = std::max(cfg_.abs_tol, cfg_.rel_tol * y.norm());
        double loss = 0.5 * y.squaredNorm();
        std::vector<Target> current;
        if (y.norm() <= stop || y.norm() == 0.0) {
            est.residual_norm = y.norm();
            return est;
        }
        for (std::size_t k = 0; k < cfg_.K_max; ++k) {
            const Vec r = y - synth(current);
            if (r.norm() <= stop)
                break;
            ++est.iterations;
            const auto [d, a] = select_atom(r, stop);
            est.selection_history.push_back({d, a, {}});

            std::vector<Target> trial = current;
            trial.push_back({d, a, {}});
            if (static_cast<Index>(trial.size()) > y.size())
                break;
            for (int inner = 0; inner < cfg_.inner_iters; ++inner) {
                refit_and_prune(trial, y);
                if (!cfg_.refine || trial.empty())
                    break;
                const auto before = trial;
                trial = refine_support(std::move(trial), y);
                merge_close(trial);
                if (same_params(before, trial))
                    break;
            }
            refit_and_prune(trial, y);
            const double trial_loss = 0.5 * (y - synth(trial)).squaredNorm();
            if (trial_loss > loss) {
                break; // keep the previous, better state
            }
            const double drop = (loss - trial_loss) / loss;
            current = std::move(trial);
            loss = trial_loss;
            est.loss_trace.push_back(loss);
            if (drop < cfg_.conv_tol)
                break;
            if (k + 1 == cfg_.K_max)
                est.iteration_cap_hit = true;
        }
        est.atoms = current;
        est.residual_norm = (y - synth(current)).norm();
        return est;
    }

    /// Dense matrix of the given atoms (weights ignored).
    Mat atom_matrix(const std::vector<Target>& atoms) const
    {
        Mat m(atoms_.size(), static_cast<Index>(atoms.size()));
        for (std::size_t k = 0; k < atoms.size(); ++k)
            m.col(static_cast<Index>(k)) = atoms_.value(atoms[k].delay, atoms[k].angle);
        return m;
    }

private:
    void build_dictionary()
    {
        const auto& c = atoms_.config();
        const double f = cfg_.grid_only ? 1.0 : static_cast<double>(cfg_.coarse_grid_factor);
        std::vector<double> deltas, angles;
        for (std::size_t j = 1;; ++j) {
            const double d = static_cast<double>(j) / f;
            if (!(d < scale_.delay_extent))
                break;
            deltas.push_back(d);
        }
        if (c.siso()) {
            angles.push_back(0.0);
        } else {
            const auto na = static_cast<std::size_t>(f * static_cast<double>(c.n_angles()));
            for (std::size_t i = 1; i < na; ++i)
                angles.push_back(-1.0 + static_cast<double>(i) * scale_.pitch / f);
        }
        // angle-major like the sensing matrix
        for (double a : angles)
            for (double d : deltas)
                points_.emplace_back(d, a);
        dict_.resize(atoms_.size(), static_cast<Index>(points_.size()));
        for (std::size_t i = 0; i < points_.size(); ++i) {
            Vec v = atoms_.eval(points_[i].first, points_[i].second, false).value;
            if (cfg_.normalized_selection) {
                const double n = v.norm();
                if (n > 0.0)
                    v /= n;
            }
            dict_.col(static_cast<Index>(i)) = v;
        }
    }

    // Objective of the local ascent: |<Psi, g>|^2, optionally over ||Psi||^2.
    double score(const AtomJet& j, const Vec& g) const
    {
        const double c = std::norm(j.value.dot(g));
        if (!cfg_.normalized_selection)
            return c;
        const double n2 = j.value.squaredNorm();
        return n2 > 0.0 ? c / n2 : 0.0;
    }

    void ascend(const Vec& g, double& delta, double& angle) const
    {
        AtomJet j = atoms_.eval(delta, angle, true);
        double f = score(j, g);
        double step = cfg_.descent.init_step;
        for (int it = 0; it < 4 * cfg_.descent.max_steps; ++it) {
            // gradient of the score in scaled units
            const cplx c = j.value.dot(g);
            const double n2 = j.value.squaredNorm();
            auto partial = [&](const Vec& dv, double unit) {
                const double dc = 2.0 * (std::conj(c) * dv.dot(g)).real();
                if (!cfg_.normalized_selection)
                    return dc * unit;
                const double dn = 2.0 * dv.dot(j.value).real();
                return (dc * n2 - std::norm(c) * dn) / (n2 * n2) * unit;
            };
            const double gd = partial(j.d_delay, 1.0);
            const double ga = scale_.siso ? 0.0 : partial(j.d_angle, scale_.pitch);
            const double gn = std::hypot(gd, ga);
            if (!(gn > 0.0) || !std::isfinite(gn))
                return;
            bool moved = false;
            double s = std::min(2.0 * step, cfg_.descent.init_step);
            for (int bt = 0; bt < cfg_.descent.max_backtracks; ++bt, s *= cfg_.descent.shrink) {
                const double nd = delta + s * gd / gn;
                const double na = scale_.siso ? angle : angle + s * ga / gn * scale_.pitch;
                if (!scale_.interior(nd, na))
                    continue;
                AtomJet jn = atoms_.eval(nd, na, true);
                const double fn = score(jn, g);
                if (fn >= f + cfg_.descent.armijo * s * gn) {
                    delta = nd;
                    angle = na;
                    f = fn;
                    j = std::move(jn);
                    step = s;
                    moved = true;
                    break;
                }
            }
            if (!moved || step < 1e-10)
                return;
        }
    }

    std::vector<double> pack(const std::vector<Target>& atoms) const
    {
        std::vector<double> p;
        for (const auto& t : atoms) {
            p.push_back(t.delay * scale_.bins_per_second);
            if (!scale_.siso)
                p.push_back(t.angle / scale_.pitch);
        }
        return p;
    }

    void unpack(const std::vector<double>& p, std::vector<Target>& atoms) const
    {
        const std::size_t w = scale_.siso ? 1 : 2;
        for (std::size_t k = 0; k < atoms.size(); ++k) {
            atoms[k].delay = p[w * k] / scale_.bins_per_second;
            if (!scale_.siso)
                atoms[k].angle = p[w * k + 1] * scale_.pitch;
        }
    }

    bool inside(const std::vector<double>& p) const
    {
        const std::size_t w = scale_.siso ? 1 : 2;
        for (std::size_t k = 0; k * w < p.size(); ++k) {
            const double delta = p[w * k];
            const double angle = scale_.siso ? 0.0 : p[w * k + 1] * scale_.pitch;
            // the atom evaluator checks delay in seconds; keep a margin of one ulp
            if (!scale_.interior(delta, angle) ||
                !atoms_.in_domain(delta / scale_.bins_per_second, angle))
                return false;
        }
        return true;
    }

    Vec synth_packed(const std::vector<double>& p, const std::vector<Target>& atoms) const
    {
        const std::size_t w = scale_.siso ? 1 : 2;
        Vec s = Vec::Zero(atoms_.size());
        for (std::size_t k = 0; k < atoms.size(); ++k) {
            const double angle = scale_.siso ? atoms[k].angle : p[w * k + 1] * scale_.pitch;
            s += atoms[k].amplitude * atoms_.eval(p[w * k], angle, false).value;
        }
        return s;
    }

    double loss_at(const std::vector<double>& p, const std::vector<Target>& atoms, const Vec& y) const
    {
        return 0.5 * (synth_packed(p, atoms) - y).squaredNorm();
    }

    std::vector<double> loss_gradient(const std::vector<double>& p, const std::vector<Target>& atoms,
                                      const Vec& y) const
    {
        const std::size_t w = scale_.siso ? 1 : 2;
        const Vec r = synth_packed(p, atoms) - y;
        std::vector<double> g(p.size());
        for (std::size_t k = 0; k < atoms.size(); ++k) {
            const double angle = scale_.siso ? atoms[k].angle : p[w * k + 1] * scale_.pitch;
            const AtomJet j = atoms_.eval(p[w * k], angle, true);
            // d/dp 1/2 ||r||^2 = Re(r^H x_k dPsi/dp)
            g[w * k] = (atoms[k].amplitude * r.dot(j.d_delay)).real();
            if (!scale_.siso)
                g[w * k + 1] = (atoms[k].amplitude * r.dot(j.d_angle)).real() * scale_.pitch;
        }
        return g;
    }

    Vec synth(const std::vector<Target>& atoms) const
    {
        Vec s = Vec::Zero(atoms_.size());
        for (const auto& t : atoms)
            s += t.amplitude * atoms_.value(t.delay, t.angle);
        return s;
    }

    void refit_and_prune(std::vector<Target>& atoms, const Vec& y) const
    {
        if (atoms.empty())
            return;
        const Vec x = refit_weights(atom_matrix(atoms), y, cfg_.tau_l1);
        const double peak = x.cwiseAbs().maxCoeff();
        std::vector<Target> kept;
        for (std::size_t k = 0; k < atoms.size(); ++k)
            if (std::abs(x(static_cast<Index>(k))) > cfg_.prune_rel * peak && peak > 0.0)
                kept.push_back({atoms[k].delay, atoms[k].angle, x(static_cast<Index>(k))});
        atoms = std::move(kept);
    }

    double scaled_distance(const Target& a, const Target& b) const
    {
        const double dd = (a.delay - b.delay) * scale_.bins_per_second;
        const double da = scale_.siso ? 0.0 : (a.angle - b.angle) / scale_.pitch;
        return std::hypot(dd, da);
    }

    void merge_close(std::vector<Target>& atoms) const
    {
        std::vector<Target> out;
        for (const auto& t : atoms) {
            auto hit = std::find_if(out.begin(), out.end(), [&](const Target& o) {
                return scaled_distance(o, t) < cfg_.merge_tol;
            });
            if (hit == out.end())
                out.push_back(t);
            else
                hit->amplitude += t.amplitude;
        }
        atoms = std::move(out);
    }

    static bool same_params(const std::vector<Target>& a, const std::vector<Target>& b)
    {
        if (a.size() != b.size())
            return false;
        for (std::size_t k = 0; k < a.size(); ++k)
            if (a[k].delay != b[k].delay || a[k].angle != b[k].angle)
                return false;
        return true;
    }

    const AtomEvaluator& atoms_;
    AdcgConfig cfg_;
    AtomScaling scale_;
    std::vector<std::pair<double, double>> points_; // (delta bins, cos theta)
    Mat dict_;
};

inline ContinuumEstimate run_adcg(const Vec& y, const AtomEvaluator& atoms, const AdcgConfig& cfg)
{
    return Adcg(atoms, cfg).run(y);
}

inline Vec refit_weights(const AtomEvaluator& atoms, const std::vector<Target>& support,
                         const Vec& y, double tau)
{
    Mat m(atoms.size(), static_cast<Index>(support.size()));
    for (std::size_t k = 0; k < support.size(); ++k)
        m.col(static_cast<Index>(k)) = atoms.value(support[k].delay, support[k].angle);
    return refit_weights(m, y, tau);
}

} // namespace cirad

#endif // CIRAD_ADCG_HPP
