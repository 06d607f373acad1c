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

#ifndef CIRAD_LASSO_HPP
#define CIRAD_LASSO_HPP

#include "diagnostics.hpp"
#include "errors.hpp"
#include "linear_operator.hpp"

#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

namespace cirad
{

struct LassoConfig
{
    std::optional<double> lambda; // absolute weight; unset means auto from sigma
    double sigma = 0.0;           // noise level for the auto rule
    int max_iters = 5000;
    double rel_tol = 1e-9;        // relative objective decrease
    double x_tol = 1e-9;          // relative iterate change, checked together with rel_tol
    bool debias = false;
    double support_rel = 1e-3;    // detected support: |x_i| > support_rel * max |x|
    double step_safety = 0.95;
    std::optional<double> lipschitz; // ||A||^2 if already known
    int continuation = 0;         // geometric stages from ||A*y||_inf / 2 down to lambda
    std::optional<Vec> x0;        // warm start
};

struct RecoveryResult
{
    Vec estimate;
    std::vector<std::size_t> detected_support;
    std::vector<double> objective_trace;
    std::vector<double> residual_trace;
    int iterations = 0;
    bool converged = false;
    double lambda = 0.0;
};

/// 2 sigma sqrt(2 log(cols)).
inline double auto_lambda(double sigma, Index cols)
{
    return 2.0 * sigma * std::sqrt(2.0 * std::log(static_cast<double>(cols)));
}

/// Proximal map of kappa |.| on the complex plane: shrinks the magnitude and
/// keeps the phase.
inline cplx soft_threshold(cplx z, double kappa)
{
    const double a = std::abs(z);
    if (a <= kappa)
        return {};
    return z * ((a - kappa) / a);
}

inline Vec soft_threshold(const Vec& z, double kappa)
{
    Vec out(z.size());
    for (Index i = 0; i < z.size(); ++i)
        out(i) = soft_threshold(z(i), kappa);
    return out;
}

/// {i : |x_i| > threshold}, ascending.
inline std::vector<std::size_t> detect_support(const Vec& x, double threshold)
{
    if (threshold < 0.0)
        throw RangeError("detection threshold must be non-negative");
    std::vector<std::size_t> s;
    for (Index i = 0; i < x.size(); ++i)
        if (std::abs(x(i)) > threshold)
            s.push_back(static_cast<std::size_t>(i));
    return s;
}

/// Extracts the listed columns by applying the operator to unit vectors.
template <LinearOperator Op>
Mat gather_columns(const Op& a, const std::vector<std::size_t>& support)
{
    Mat sub(a.rows(), static_cast<Index>(support.size()));
    Vec e = Vec::Zero(a.cols());
    for (std::size_t j = 0; j < support.size(); ++j) {
        if (support[j] >= static_cast<std::size_t>(a.cols()))
            throw IndexError("support index outside the operator");
        e(static_cast<Index>(support[j])) = 1.0;
        sub.col(static_cast<Index>(j)) = a.apply(e);
        e(static_cast<Index>(support[j])) = 0.0;
    }
    return sub;
}

inline Mat gather_columns(const Mat& a, const std::vector<std::size_t>& support)
{
    Mat sub(a.rows(), static_cast<Index>(support.size()));
    for (std::size_t j = 0; j < support.size(); ++j) {
        if (support[j] >= static_cast<std::size_t>(a.cols()))
            throw IndexError("support index outside the operator");
        sub.col(static_cast<Index>(j)) = a.col(static_cast<Index>(support[j]));
    }
    return sub;
}

/// Least-squares amplitudes on `support`, zero elsewhere.
template <class Op>
Vec debias(const Op& a, const Vec& y, const std::vector<std::size_t>& support)
{
    Vec out = Vec::Zero(a.cols());
    if (support.empty())
        return out;
    if (support.size() > static_cast<std::size_t>(a.rows()))
        throw RankError("support larger than the number of measurements");
    const Mat sub = gather_columns(a, support);
    Eigen::ColPivHouseholderQR<Mat> qr(sub);
    if (qr.rank() < sub.cols())
        throw RankError("support submatrix has rank " + std::to_string(qr.rank()) + " < " +
                        std::to_string(sub.cols()));
    const Vec coef = qr.solve(y);
    for (std::size_t j = 0; j < support.size(); ++j)
        out(static_cast<Index>(support[j])) = coef(static_cast<Index>(j));
    return out;
}

inline double lasso_objective(double lambda, const Vec& x, const Vec& residual)
{
    return lambda * x.cwiseAbs().sum() + 0.5 * residual.squaredNorm();
}

namespace detail
{

/// One penalized solve at fixed lambda. Accelerated proximal gradient that
/// restarts its momentum whenever a step would raise the objective, so the
/// accepted iterates are monotone.
template <LinearOperator Op>
void fista_stage(const Op& a, const Vec& y, double lambda, double step, int max_iters,
                 double rel_tol, double x_tol, Vec& x, RecoveryResult& out, bool record)
{
    Vec r = a.apply(x) - y;
    double f = lasso_objective(lambda, x, r);
    // rounding floor of the objective; changes below it are not increases
    const double slack = 1e-14 * std::max(f, 0.5 * y.squaredNorm());
    Vec z = x;
    double t = 1.0;
    int increases = 0, small = 0;
    out.converged = false;
    if (record) {
        out.objective_trace.assign(1, f);
        out.residual_trace.assign(1, r.norm());
    }
    for (int it = 1; it <= max_iters; ++it) {
        ++out.iterations;
        const Vec grad = a.adjoint_apply(a.apply(z) - y);
        const Vec cand = soft_threshold(z - step * grad, lambda * step);
        const Vec rc = a.apply(cand) - y;
        const double fc = lasso_objective(lambda, cand, rc);
        if (!std::isfinite(fc))
            throw DivergenceError("objective became non-finite");
        if (fc > f + slack) {
            // restart from the last accepted point
            if (++increases > 10)
                throw DivergenceError("objective increased for more than 10 consecutive "
                                      "iterations; step size too large?");
            z = x;
            t = 1.0;
            small = 0;
            if (record) {
                out.objective_trace.push_back(f);
                out.residual_trace.push_back(r.norm());
            }
            continue;
        }
        increases = 0;
        const double decrease = (f - fc) / std::max(f, std::numeric_limits<double>::min());
        const double moved = (cand - x).norm() / std::max(cand.norm(), std::numeric_limits<double>::min());
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        z = cand + ((t - 1.0) / t_next) * (cand - x);
        t = t_next;
        x = cand;
        r = rc;
        f = std::min(f, fc);
        if (record) {
            out.objective_trace.push_back(f);
            out.residual_trace.push_back(r.norm());
        }
        small = (decrease < rel_tol && moved < x_tol) || fc <= slack ? small + 1 : 0;
        if (small >= 3) {
            out.converged = true;
            return;
        }
    }
}

} // namespace detail

/// Minimizes lambda ||x||_1 + 1/2 ||A x - y||^2.
template <LinearOperator Op>
RecoveryResult solve_lasso(const Op& a, const Vec& y, const LassoConfig& cfg = {})
{
    if (y.size() != a.rows())
        throw ShapeError("measurement length does not match the operator");
    if (cfg.max_iters <= 0 || !(cfg.rel_tol > 0.0) || !(cfg.x_tol > 0.0) || !(cfg.step_safety > 0.0))
        throw RangeError("solver iteration count and tolerances must be positive");

    RecoveryResult out;
    out.lambda = cfg.lambda ? *cfg.lambda : auto_lambda(cfg.sigma, a.cols());
    if (!(out.lambda >= 0.0) || !std::isfinite(out.lambda))
        throw RangeError("lambda must be finite and non-negative");

    const double lip = cfg.lipschitz ? *cfg.lipschitz : std::pow(operator_norm(a, 1e-6), 2);
    const double step = cfg.step_safety / lip;

    Vec x = Vec::Zero(a.cols());
    if (cfg.x0) {
        if (cfg.x0->size() != a.cols())
            throw ShapeError("warm start length does not match the operator");
        x = *cfg.x0;
    }

    if (cfg.continuation > 0) {
        const double top = 0.5 * a.adjoint_apply(y).cwiseAbs().maxCoeff();
        if (top > out.lambda && out.lambda > 0.0) {
            const double ratio = std::pow(out.lambda / top, 1.0 / cfg.continuation);
            double lam = top;
            for (int s = 0; s < cfg.continuation; ++s, lam *= ratio)
                detail::fista_stage(a, y, lam, step, cfg.max_iters, cfg.rel_tol * 1e2,
                                    cfg.x_tol * 1e2, x, out, false);
        }
    }
    detail::fista_stage(a, y, out.lambda, step, cfg.max_iters, cfg.rel_tol, cfg.x_tol, x, out,
                        true);

    out.estimate = x;
    const double peak = x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
    out.detected_support = peak > 0.0 ? detect_support(x, cfg.support_rel * peak)
                                      : std::vector<std::size_t>{};
    if (cfg.debias)
        out.estimate = debias(a, y, out.detected_support);
    return out;
}

inline RecoveryResult solve_lasso(const Mat& a, const Vec& y, const LassoConfig& cfg = {})
{
    return solve_lasso(as_operator(a), y, cfg);
}

/// Subgradient optimality check for a LASSO point.
struct KktReport
{
    double zero_set = 0.0; // max |g_i| / lambda off the support
    double support = 0.0;  // max |g_i + lambda x_i/|x_i|| / lambda on the support
    bool ok = false;
};

template <LinearOperator Op>
KktReport kkt_certificate(const Op& a, const Vec& y, const Vec& x, double lambda,
                          double cert_tol = 1e-3)
{
    const Vec g = a.adjoint_apply(a.apply(x) - y);
    KktReport rep;
    for (Index i = 0; i < x.size(); ++i) {
        const double ax = std::abs(x(i));
        if (ax == 0.0)
            rep.zero_set = std::max(rep.zero_set, std::abs(g(i)) / lambda);
        else
            rep.support = std::max(rep.support, std::abs(g(i) + lambda * x(i) / ax) / lambda);
    }
    rep.ok = rep.zero_set <= 1.0 + cert_tol && rep.support <= cert_tol;
    return rep;
}

inline void write_trace_csv(std::ostream& os, const RecoveryResult& r)
{
    os << "iter,objective,residual_norm\n";
    os.precision(17);
    for (std::size_t i = 0; i < r.objective_trace.size(); ++i)
        os << i << ',' << r.objective_trace[i] << ',' << r.residual_trace[i] << '\n';
}

} // namespace cirad

#endif // CIRAD_LASSO_HPP
