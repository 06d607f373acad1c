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

#ifndef CIRAD_DIAGNOSTICS_HPP
#define CIRAD_DIAGNOSTICS_HPP

#include "errors.hpp"
#include "linear_operator.hpp"
#include "random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace cirad
{

// ---------------------------------------------------------------------------
// Column statistics and coherence

struct ColumnNorms
{
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
};

inline ColumnNorms column_norms_sq(const Mat& a)
{
    if (a.cols() == 0)
        throw ShapeError("matrix has no columns");
    const Eigen::VectorXd n2 = a.colwise().squaredNorm().transpose();
    return {n2.minCoeff(), n2.maxCoeff(), n2.mean()};
}

namespace detail
{

inline void check_coherence_input(const Mat& a)
{
    if (a.cols() < 2)
        throw ShapeError("coherence needs at least two columns");
    for (Index j = 0; j < a.cols(); ++j)
        if (a.col(j).squaredNorm() == 0.0)
            throw ZeroColumnError("column " + std::to_string(j) + " is identically zero");
}

} // namespace detail

/// Reference O(cols^2) pairwise scan.
inline double mutual_coherence_naive(const Mat& a)
{
    detail::check_coherence_input(a);
    double mu = 0.0;
    for (Index i = 0; i < a.cols(); ++i) {
        const double ni = a.col(i).norm();
        for (Index j = i + 1; j < a.cols(); ++j) {
            const double g = std::abs(a.col(i).dot(a.col(j))) / (ni * a.col(j).norm());
            mu = std::max(mu, g);
        }
    }
    return mu;
}

/// Max off-diagonal magnitude of the normalized Gram matrix, built in column
/// panels so the full cols x cols Gram never exists at once.
inline double mutual_coherence(const Mat& a, Index panel = 256)
{
    detail::check_coherence_input(a);
    Mat q = a;
    q.colwise().normalize();
    const Index n = q.cols();
    double mu = 0.0;
    for (Index b0 = 0; b0 < n; b0 += panel) {
        const Index w = std::min(panel, n - b0);
        // rows of the Gram from b0 onward, restricted to columns in this panel
        const Mat g = q.rightCols(n - b0).adjoint() * q.middleCols(b0, w);
        for (Index j = 0; j < w; ++j)
            for (Index i = j + 1; i < g.rows(); ++i)
                mu = std::max(mu, std::abs(g(i, j)));
    }
    return std::min(mu, 1.0);
}

// ---------------------------------------------------------------------------
// Spectral norm

struct PowerResult
{
    double sigma = 0.0;   // largest singular value
    double residual = 0.0; // ||A*A v - lambda v|| / lambda
    int iterations = 0;
};

/// Power iteration on A*A from a fixed start vector. Stops once the
/// eigen-residual certifies `tol` relative accuracy.
template <LinearOperator Op>
PowerResult power_iteration(const Op& a, double tol = 1e-8, int max_iter = 10000)
{
    const Index n = a.cols();
    if (n == 0)
        throw ShapeError("operator has no columns");
    Rng rng(0x5eedULL);
    Vec v(n);
    for (Index i = 0; i < n; ++i)
        v(i) = complex_normal(rng);
    v.normalize();

    PowerResult out;
    for (int it = 1; it <= max_iter; ++it) {
        const Vec w = a.adjoint_apply(a.apply(v));
        const double lambda = v.dot(w).real();
        const double wn = w.norm();
        if (wn == 0.0)
            throw ConvergenceError("operator annihilates the iterate; zero operator?");
        out.iterations = it;
        out.sigma = std::sqrt(std::max(lambda, 0.0));
        out.residual = (w - lambda * v).norm() / lambda;
        if (lambda > 0.0 && out.residual <= tol)
            return out;
        v = w / wn;
    }
    throw ConvergenceError("power iteration did not reach residual " + std::to_string(tol) +
                           " in " + std::to_string(max_iter) + " iterations (last " +
                           std::to_string(out.residual) + ")");
}

/// Krylov-accelerated variant of the power iteration above, with the same
/// start vector and the same residual certificate. Plain power iteration
/// stalls when the top of the spectrum is clustered, which the multitone
/// operators routinely produce (repeated top eigenvalues a relative 1e-4
/// apart). Lanczos on A*A with full reorthogonalization, explicitly restarted
/// from the top Ritz vector every `basis` steps; `max_iter` caps the number
/// of normal-operator applications.
template <LinearOperator Op>
PowerResult lanczos_norm(const Op& a, double tol = 1e-8, int max_iter = 10000, Index basis = 256)
{
    const Index n = a.cols();
    if (n == 0)
        throw ShapeError("operator has no columns");
    Rng rng(0x5eedULL);
    Vec start(n);
    for (Index i = 0; i < n; ++i)
        start(i) = complex_normal(rng);
    start.normalize();

    const Index dim = std::max<Index>(2, std::min<Index>(basis, n));
    PowerResult out;
    int applied = 0;
    while (applied < max_iter) {
        Mat q(n, dim);
        std::vector<double> alpha, beta;
        q.col(0) = start;
        Index k = 0;
        for (; k < dim && applied < max_iter; ++k) {
            Vec w = a.adjoint_apply(a.apply(q.col(k)));
            ++applied;
            alpha.push_back(q.col(k).dot(w).real());
            // full reorthogonalization, applied twice for stability
            for (int pass = 0; pass < 2; ++pass)
                w -= q.leftCols(k + 1) * (q.leftCols(k + 1).adjoint() * w);
            const double b = w.norm();
            if (k + 1 == dim)
                break;
            if (b <= 1e-13 * std::max(1.0, std::abs(alpha.front())))
                break; // invariant subspace found
            beta.push_back(b);
            q.col(k + 1) = w / b;
        }
        const Index m = static_cast<Index>(alpha.size());
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
        for (Index i = 0; i < m; ++i) {
            t(i, i) = alpha[static_cast<std::size_t>(i)];
            if (i + 1 < m)
                t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
        const Eigen::VectorXd s = es.eigenvectors().col(m - 1);
        Vec u = q.leftCols(m) * s.cast<cplx>();
        u.normalize();
        // explicit certificate, independent of the recurrence
        const Vec w = a.adjoint_apply(a.apply(u));
        ++applied;
        const double lambda = u.dot(w).real();
        if (w.norm() == 0.0)
            throw ConvergenceError("operator annihilates the iterate; zero operator?");
        out.iterations = applied;
        out.sigma = std::sqrt(std::max(lambda, 0.0));
        out.residual = (w - lambda * u).norm() / lambda;
        if (lambda > 0.0 && out.residual <= tol)
            return out;
        start = u;
    }
    throw ConvergenceError("spectral norm did not reach residual " + std::to_string(tol) + " in " +
                           std::to_string(max_iter) + " operator applications (last " +
                           std::to_string(out.residual) + ")");
}

/// A* viewed as an operator; shares the nonzero singular values of A.
template <LinearOperator Op>
struct AdjointView
{
    const Op& op;
    Index rows() const { return op.cols(); }
    Index cols() const { return op.rows(); }
    Vec apply(const Vec& x) const { return op.adjoint_apply(x); }
    Vec adjoint_apply(const Vec& y) const { return op.apply(y); }
};

/// Largest singular value. The Krylov iteration runs on the smaller of the two
/// Gram operators, which carry the same nonzero spectrum.
template <LinearOperator Op>
double operator_norm(const Op& a, double tol = 1e-8, int max_iter = 10000)
{
    if (a.rows() < a.cols())
        return lanczos_norm(AdjointView<Op>{a}, tol, max_iter).sigma;
    return lanczos_norm(a, tol, max_iter).sigma;
}

inline double operator_norm(const Mat& a, double tol = 1e-8, int max_iter = 10000)
{
    return operator_norm(as_operator(a), tol, max_iter);
}

/// Upper bound on the operator norm that holds with high probability:
/// 2 sqrt((N_T N / M) log(N_R M + N_R N_T N)).
inline double operator_norm_bound(std::size_t n, std::size_t m, std::size_t n_tx, std::size_t n_rx)
{
    const double nn = static_cast<double>(n), mm = static_cast<double>(m);
    const double nt = static_cast<double>(n_tx), nr = static_cast<double>(n_rx);
    return 2.0 * std::sqrt(nt * nn / mm * std::log(nr * mm + nr * nt * nn));
}

// ---------------------------------------------------------------------------
// Empirical restricted isometry

enum class RipMode
{
    exhaustive,
    sampled
};

/// max(|lambda_max - 1|, |1 - lambda_min|) of the Gram of the given columns.
inline double support_isometry_defect(const Mat& a, const std::vector<Index>& support)
{
    Mat sub(a.rows(), static_cast<Index>(support.size()));
    for (std::size_t j = 0; j < support.size(); ++j)
        sub.col(static_cast<Index>(j)) = a.col(support[j]);
    const Mat g = sub.adjoint() * sub;
    const Eigen::SelfAdjointEigenSolver<Mat> es(g, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return std::max(std::abs(ev.maxCoeff() - 1.0), std::abs(1.0 - ev.minCoeff()));
}

/// Number of size-k subsets of n items, saturating at +inf.
inline double binomial(std::size_t n, std::size_t k)
{
    if (k > n)
        return 0.0;
    k = std::min(k, n - k);
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i)
        r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(r);
}

struct RipOptions
{
    RipMode mode = RipMode::exhaustive;
    double budget = 1e6;      // exhaustive: maximum number of supports
    std::size_t trials = 1000; // sampled: number of random supports
    std::uint64_t seed = 0;   // sampled: support stream
};

/// Exhaustive mode is the exact delta_K; sampled mode is a lower bound.
inline double empirical_rip(const Mat& a, std::size_t k, const RipOptions& opt = {})
{
    const auto n = static_cast<std::size_t>(a.cols());
    if (k == 0 || k > n)
        throw CardinalityError("sparsity order must lie in [1, cols]");
    double delta = 0.0;
    if (opt.mode == RipMode::exhaustive) {
        const double count = binomial(n, k);
        if (count > opt.budget)
            throw CombinatoricsError("C(" + std::to_string(n) + ", " + std::to_string(k) +
                                     ") supports exceed the exhaustive budget");
        std::vector<Index> s(k);
        for (std::size_t i = 0; i < k; ++i)
            s[i] = static_cast<Index>(i);
        for (;;) {
            delta = std::max(delta, support_isometry_defect(a, s));
            // next k-combination in lexicographic order
            std::size_t i = k;
            while (i > 0 && s[i - 1] == static_cast<Index>(n - k + i - 1))
                --i;
            if (i == 0)
                break;
            ++s[i - 1];
            for (std::size_t j = i; j < k; ++j)
                s[j] = s[j - 1] + 1;
        }
        return delta;
    }
    Rng rng = make_stream(opt.seed, Stream::sampling);
    std::vector<Index> perm(n);
    for (std::size_t i = 0; i < n; ++i)
        perm[i] = static_cast<Index>(i);
    for (std::size_t t = 0; t < opt.trials; ++t) {
        for (std::size_t i = 0; i < k; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(perm[i], perm[pick(rng)]);
        }
        std::vector<Index> s(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(s.begin(), s.end());
        delta = std::max(delta, support_isometry_defect(a, s));
    }
    return delta;
}

// ---------------------------------------------------------------------------
// Random Toeplitz baselines

enum class BaselineKind
{
    toeplitz_gaussian,
    block_toeplitz
};

/// cols x cols Toeplitz from 2 cols - 1 i.i.d. CN(0,1) entries, decimated to
/// `rows` uniformly spaced rows.
inline Mat subsampled_toeplitz(Index rows, Index cols, Rng& rng)
{
    std::vector<cplx> t(static_cast<std::size_t>(2 * cols - 1));
    for (auto& e : t)
        e = complex_normal(rng, 1.0);
    Mat out(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        const Index row = r * cols / rows;
        for (Index c = 0; c < cols; ++c)
            out(r, c) = t[static_cast<std::size_t>(row - c + cols - 1)];
    }
    return out;
}

/// `blocks` > 1 concatenates independent Toeplitz blocks side by side, one per
/// transmitter. Columns are scaled to unit norm when `normalize` is set.
inline Mat make_toeplitz_baseline(Index rows, Index cols, BaselineKind kind, Rng& rng,
                                  Index blocks = 1, bool normalize = true)
{
    if (rows <= 0 || cols <= 0)
        throw ShapeError("baseline dimensions must be positive");
    if (kind == BaselineKind::toeplitz_gaussian)
        blocks = 1;
    if (blocks <= 0 || cols % blocks != 0)
        throw ShapeError("column count must split evenly into blocks");
    const Index width = cols / blocks;
    if (rows > width)
        throw ShapeError("subsampled Toeplitz needs rows <= columns per block");
    Mat out(rows, cols);
    for (Index b = 0; b < blocks; ++b)
        out.middleCols(b * width, width) = subsampled_toeplitz(rows, width, rng);
    if (normalize)
        out.colwise().normalize();
    return out;
}

// ---------------------------------------------------------------------------
// Reports

struct MatrixReport
{
    std::string generator_tag; // multitone | toeplitz_gaussian | block_toeplitz
    std::uint64_t seed = 0;
    std::size_t n = 0, m = 0, n_c = 0, n_tx = 0, n_rx = 0;
    Index rows = 0, cols = 0;
    double mu = 0.0;
    double opnorm = 0.0;
    double min_colnorm2 = 0.0;
    double max_colnorm2 = 0.0;
};

inline MatrixReport make_report(const Mat& a, std::string tag, std::uint64_t seed, std::size_t n,
                                std::size_t m, std::size_t n_c, std::size_t n_tx, std::size_t n_rx)
{
    MatrixReport r;
    r.generator_tag = std::move(tag);
    r.seed = seed;
    r.n = n;
    r.m = m;
    r.n_c = n_c;
    r.n_tx = n_tx;
    r.n_rx = n_rx;
    r.rows = a.rows();
    r.cols = a.cols();
    r.mu = mutual_coherence(a);
    r.opnorm = operator_norm(a);
    const auto cn = column_norms_sq(a);
    r.min_colnorm2 = cn.min;
    r.max_colnorm2 = cn.max;
    return r;
}

inline std::string report_csv_header()
{
    return "generator_tag,seed,N,M,N_c,N_T,N_R,mu,opnorm,min_colnorm2,max_colnorm2";
}

inline std::string report_csv_row(const MatrixReport& r)
{
    std::ostringstream os;
    os.precision(17);
    os << r.generator_tag << ',' << r.seed << ',' << r.n << ',' << r.m << ',' << r.n_c << ','
       << r.n_tx << ',' << r.n_rx << ',' << r.mu << ',' << r.opnorm << ',' << r.min_colnorm2 << ','
       << r.max_colnorm2;
    return os.str();
}

} // namespace cirad

#endif // CIRAD_DIAGNOSTICS_HPP
