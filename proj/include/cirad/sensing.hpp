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

#ifndef CIRAD_SENSING_HPP
#define CIRAD_SENSING_HPP

#include "config.hpp"
#include "illumination.hpp"
#include "linear_operator.hpp"
#include "random.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace cirad
{

inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr std::size_t default_memory_budget = std::size_t{4} << 30;

/// exp(sign * j 2 pi k / n) for k = 0 .. n-1. Phases indexed by an integer
/// reduced mod n are therefore exact up to one rounding of the table entry.
inline std::vector<cplx> unit_roots(std::size_t n, int sign)
{
    std::vector<cplx> w(n);
    for (std::size_t k = 0; k < n; ++k)
        w[k] = std::polar(1.0, sign * two_pi * static_cast<double>(k) / static_cast<double>(n));
    return w;
}

inline cplx alpha_r(const SystemConfig& c, double angle, std::size_t k)
{
    return std::polar(1.0, two_pi * c.rx_spacing_dR * static_cast<double>(k) * angle);
}

inline cplx alpha_t(const SystemConfig& c, double angle, std::size_t tx)
{
    return std::polar(1.0, two_pi * c.tx_spacing_dT * static_cast<double>(tx) * angle);
}

/// 1 / sqrt(N_T N_R N_c M).
inline double column_scale(const SystemConfig& c)
{
    return 1.0 / std::sqrt(static_cast<double>(c.n_tx_NT * c.n_rx_NR * c.tones_per_tx_Nc *
                                               c.n_samples_M));
}

// ---------------------------------------------------------------------------
// Factors of the sum-of-Kronecker form. Used by tests and diagnostics; the
// operators below never materialize them.

/// Abar(n, m) = exp(-j 2 pi m n / N) / sqrt(M N_c), an M x N partial DFT.
inline Mat factor_abar(const SystemConfig& c)
{
    const auto n = c.n_range_bins_N, m = c.n_samples_M;
    const auto tw = unit_roots(n, -1);
    const double s = 1.0 / std::sqrt(static_cast<double>(m * c.tones_per_tx_Nc));
    Mat a(m, n);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t q = 0; q < n; ++q)
            a(r, q) = s * tw[(r * q) % n];
    return a;
}

/// Diagonal of H_i: exp(j 2 pi i p n / M).
inline Vec factor_h(const SystemConfig& c, std::size_t tone)
{
    const auto m = c.n_samples_M;
    const auto tw = unit_roots(m, +1);
    Vec h(m);
    for (std::size_t n = 0; n < m; ++n)
        h(n) = tw[(tone % m) * c.alias_p % m * n % m];
    return h;
}

/// Diagonal of D_i: exp(-j 2 pi i m / N).
inline Vec factor_d(const SystemConfig& c, std::size_t tone)
{
    const auto n = c.n_range_bins_N;
    const auto tw = unit_roots(n, -1);
    Vec d(n);
    for (std::size_t m = 0; m < n; ++m)
        d(m) = tw[(tone * m) % n];
    return d;
}

/// Normalized receive steering matrix, N_R x N_theta.
inline Mat factor_alpha_r(const SystemConfig& c)
{
    const double s = 1.0 / std::sqrt(static_cast<double>(c.n_rx_NR * c.n_tx_NT));
    Mat a(c.n_rx_NR, c.n_angles());
    for (std::size_t k = 0; k < c.n_rx_NR; ++k)
        for (std::size_t v = 0; v < c.n_angles(); ++v)
            a(k, v) = s * alpha_r(c, angle_bin(c, v), k);
    return a;
}

/// Transmit steering of transmitter `tx` across the angle grid (a diagonal).
inline Vec factor_alpha_t(const SystemConfig& c, std::size_t tx)
{
    Vec a(c.n_angles());
    for (std::size_t v = 0; v < c.n_angles(); ++v)
        a(v) = alpha_t(c, angle_bin(c, v), tx);
    return a;
}

/// (alpha_R alpha_T(xi(i))) kron (H_i Abar D_i) for tone i, without c_i.
inline Mat factor_block(const SystemConfig& c, std::size_t tone, std::size_t tx)
{
    const Mat ang = factor_alpha_r(c) * factor_alpha_t(c, tx).asDiagonal();
    const Mat rng = factor_h(c, tone).asDiagonal() * factor_abar(c) * factor_d(c, tone).asDiagonal();
    Mat out(ang.rows() * rng.rows(), ang.cols() * rng.cols());
    for (Index k = 0; k < ang.rows(); ++k)
        for (Index v = 0; v < ang.cols(); ++v)
            out.block(k * rng.rows(), v * rng.cols(), rng.rows(), rng.cols()) = ang(k, v) * rng;
    return out;
}

// ---------------------------------------------------------------------------

/// Precomputed pieces shared by the dense assembly, the matrix-free operator
/// and the atom evaluator. Only active tones are kept.
class MultitoneModel
{
public:
    MultitoneModel(const SystemConfig& c, const ToneAssignment& t) : cfg_(c), tones_(t)
    {
        if (t.size() != c.n_range_bins_N)
            throw ShapeError("tone assignment length does not match N");
        active_ = t.active();
        tw_n_ = unit_roots(c.n_range_bins_N, -1);
        const auto tw_m = unit_roots(c.n_samples_M, +1);
        const auto m = c.n_samples_M;
        hop_.resize(static_cast<Index>(active_.size()), static_cast<Index>(m));
        for (std::size_t j = 0; j < active_.size(); ++j) {
            const std::size_t rp = (active_[j] % m) * (c.alias_p % m) % m;
            for (std::size_t n = 0; n < m; ++n)
                hop_(static_cast<Index>(j), static_cast<Index>(n)) = tw_m[rp * n % m];
        }
        coef_.resize(static_cast<Index>(c.n_angles()), static_cast<Index>(active_.size()));
        steer_.resize(static_cast<Index>(c.n_rx_NR), static_cast<Index>(c.n_angles()));
        for (std::size_t v = 0; v < c.n_angles(); ++v) {
            const double th = angle_bin(c, v);
            for (std::size_t j = 0; j < active_.size(); ++j)
                coef_(static_cast<Index>(v), static_cast<Index>(j)) =
                    t.coeffs[active_[j]] * alpha_t(c, th, t.tx_map[active_[j]]);
            for (std::size_t k = 0; k < c.n_rx_NR; ++k)
                steer_(static_cast<Index>(k), static_cast<Index>(v)) = alpha_r(c, th, k);
        }
        scale_ = column_scale(c);
    }

    const SystemConfig& config() const noexcept { return cfg_; }
    const ToneAssignment& tones() const noexcept { return tones_; }
    const std::vector<std::size_t>& active() const noexcept { return active_; }
    const std::vector<cplx>& roots_n() const noexcept { return tw_n_; }
    /// exp(j 2 pi (r_j p n mod M) / M) for active tone j and sample n.
    const Mat& hop() const noexcept { return hop_; }
    const Mat& coef() const noexcept { return coef_; }
    const Mat& steer() const noexcept { return steer_; }
    double scale() const noexcept { return scale_; }

    /// Range block of angle bin v: B_v(n, m) = sum_r coef_{v,r} hop(r, n) w^{m (n + r)}.
    Mat range_block(std::size_t v) const
    {
        const auto n_bins = cfg_.n_range_bins_N, m = cfg_.n_samples_M;
        Mat b = Mat::Zero(static_cast<Index>(m), static_cast<Index>(n_bins));
        for (std::size_t j = 0; j < active_.size(); ++j) {
            const cplx cj = coef_(static_cast<Index>(v), static_cast<Index>(j));
            for (std::size_t n = 0; n < m; ++n) {
                const cplx a = cj * hop_(static_cast<Index>(j), static_cast<Index>(n));
                const std::size_t q = (active_[j] + n) % n_bins;
                for (std::size_t col = 0; col < n_bins; ++col)
                    b(static_cast<Index>(n), static_cast<Index>(col)) += a * tw_n_[col * q % n_bins];
            }
        }
        return b;
    }

private:
    SystemConfig cfg_;
    ToneAssignment tones_;
    std::vector<std::size_t> active_;
    std::vector<cplx> tw_n_;
    Mat hop_;
    Mat coef_;
    Mat steer_;
    double scale_ = 1.0;
};

/// Dense sensing matrix together with the realization that produced it.
/// Columns are angle-major (v N + m); rows are receiver-major (k M + n).
struct SensingOperator
{
    SystemConfig config;
    ToneAssignment tones;
    Mat matrix;

    Index rows() const noexcept { return matrix.rows(); }
    Index cols() const noexcept { return matrix.cols(); }
    Vec apply(const Vec& x) const { return matrix * x; }
    Vec adjoint_apply(const Vec& y) const { return matrix.adjoint() * y; }
    Vec column(std::size_t m, std::size_t v) const
    {
        return matrix.col(static_cast<Index>(v * config.n_range_bins_N + m));
    }
};

inline SensingOperator assemble_matrix(const SystemConfig& c, const ToneAssignment& t,
                                       std::size_t budget_bytes = default_memory_budget)
{
    const double bytes = static_cast<double>(c.rows()) * static_cast<double>(c.cols()) *
                         static_cast<double>(sizeof(cplx));
    if (bytes > static_cast<double>(budget_bytes))
        throw AllocError("dense sensing matrix needs " + std::to_string(bytes / (1 << 20)) +
                         " MiB, over the memory budget; use the matrix-free operator");
    const MultitoneModel model(c, t);
    const auto m = static_cast<Index>(c.n_samples_M), n = static_cast<Index>(c.n_range_bins_N);
    SensingOperator op{c, t, Mat(static_cast<Index>(c.rows()), static_cast<Index>(c.cols()))};
    for (std::size_t v = 0; v < c.n_angles(); ++v) {
        const Mat b = model.range_block(v);
        for (std::size_t k = 0; k < c.n_rx_NR; ++k)
            op.matrix.block(static_cast<Index>(k) * m, static_cast<Index>(v) * n, m, n) =
                (model.scale() * model.steer()(static_cast<Index>(k), static_cast<Index>(v))) * b;
    }
    return op;
}

/// Matrix-free form of the same operator. Forward cost is one length-N DFT
/// per nonzero angle slice plus O(M * active tones) per angle.
class MultitoneOperator
{
public:
    MultitoneOperator(const SystemConfig& c, const ToneAssignment& t) : model_(c, t) {}

    Index rows() const noexcept { return static_cast<Index>(model_.config().rows()); }
    Index cols() const noexcept { return static_cast<Index>(model_.config().cols()); }
    const MultitoneModel& model() const noexcept { return model_; }

    Vec apply(const Vec& x) const
    {
        const auto& c = model_.config();
        if (x.size() != cols())
            throw ShapeError("operand length does not match N * N_theta");
        const std::size_t nb = c.n_range_bins_N, m = c.n_samples_M;
        const auto& tw = model_.roots_n();
        const auto& act = model_.active();
        Vec y = Vec::Zero(rows());
        std::vector<cplx> spec(nb);
        Vec w(static_cast<Index>(m));
        for (std::size_t v = 0; v < c.n_angles(); ++v) {
            const auto xv = x.segment(static_cast<Index>(v * nb), static_cast<Index>(nb));
            if (xv.isZero(0.0))
                continue;
            for (std::size_t q = 0; q < nb; ++q) {
                cplx acc{};
                for (std::size_t col = 0; col < nb; ++col)
                    acc += xv(static_cast<Index>(col)) * tw[col * q % nb];
                spec[q] = acc;
            }
            w.setZero();
            for (std::size_t j = 0; j < act.size(); ++j) {
                const cplx cj = model_.coef()(static_cast<Index>(v), static_cast<Index>(j));
                for (std::size_t n = 0; n < m; ++n)
                    w(static_cast<Index>(n)) +=
                        cj * model_.hop()(static_cast<Index>(j), static_cast<Index>(n)) *
                        spec[(act[j] + n) % nb];
            }
            for (std::size_t k = 0; k < c.n_rx_NR; ++k)
                y.segment(static_cast<Index>(k * m), static_cast<Index>(m)) +=
                    (model_.scale() * model_.steer()(static_cast<Index>(k), static_cast<Index>(v))) * w;
        }
        return y;
    }

    Vec adjoint_apply(const Vec& y) const
    {
        const auto& c = model_.config();
        if (y.size() != rows())
            throw ShapeError("operand length does not match N_R * M");
        const std::size_t nb = c.n_range_bins_N, m = c.n_samples_M;
        const auto& tw = model_.roots_n();
        const auto& act = model_.active();
        Vec x(cols());
        std::vector<cplx> z(nb);
        Vec u(static_cast<Index>(m));
        for (std::size_t v = 0; v < c.n_angles(); ++v) {
            u.setZero();
            for (std::size_t k = 0; k < c.n_rx_NR; ++k)
                u += std::conj(model_.steer()(static_cast<Index>(k), static_cast<Index>(v))) *
                     y.segment(static_cast<Index>(k * m), static_cast<Index>(m));
            std::fill(z.begin(), z.end(), cplx{});
            for (std::size_t j = 0; j < act.size(); ++j) {
                const cplx cj = std::conj(model_.coef()(static_cast<Index>(v), static_cast<Index>(j)));
                for (std::size_t n = 0; n < m; ++n)
                    z[(act[j] + n) % nb] +=
                        cj * std::conj(model_.hop()(static_cast<Index>(j), static_cast<Index>(n))) *
                        u(static_cast<Index>(n));
            }
            for (std::size_t col = 0; col < nb; ++col) {
                cplx acc{};
                for (std::size_t q = 0; q < nb; ++q)
                    acc += z[q] * std::conj(tw[col * q % nb]);
                x(static_cast<Index>(v * nb + col)) = model_.scale() * acc;
            }
        }
        return x;
    }

private:
    MultitoneModel model_;
};

// ---------------------------------------------------------------------------
// Continuum atoms

/// Atom value and its partial derivatives. `d_delay` is per second.
struct AtomJet
{
    Vec value;
    Vec d_delay;
    Vec d_angle;
};

/// Evaluates Psi(delay, angle) for the tone realization of a model:
///   Psi_{k,n} = s a_R(theta; k) sum_r c_r a_T(theta; xi(r))
///               exp(j 2 pi [(r p n mod M) / M - delta (r + n) / N]),
/// with delta = B * delay in range bins. On grid points it reproduces the
/// corresponding matrix column.
class AtomEvaluator
{
public:
    AtomEvaluator(const SystemConfig& c, const ToneAssignment& t) : model_(c, t) {}
    explicit AtomEvaluator(MultitoneModel model) : model_(std::move(model)) {}

    const SystemConfig& config() const noexcept { return model_.config(); }
    const MultitoneModel& model() const noexcept { return model_; }
    Index size() const noexcept { return static_cast<Index>(model_.config().rows()); }

    bool in_domain(double delay, double angle) const noexcept
    {
        return delay > 0.0 && delay < config().unambiguous_tu && angle > -1.0 && angle < 1.0;
    }

    void check_domain(double delay, double angle) const
    {
        if (!in_domain(delay, angle))
            throw DomainError("atom parameters (" + detail::format_double(delay) + ", " +
                              detail::format_double(angle) + ") outside the open domain");
    }

    Vec value(double delay, double angle) const
    {
        check_domain(delay, angle);
        return eval(delay * config().bandwidth_B, angle, false).value;
    }

    AtomJet jet(double delay, double angle) const
    {
        check_domain(delay, angle);
        AtomJet j = eval(delay * config().bandwidth_B, angle, true);
        j.d_delay *= config().bandwidth_B;
        return j;
    }

    /// Unchecked evaluation with delay given in range bins; `d_delay` is per bin.
    AtomJet eval(double delta, double angle, bool with_gradient) const
    {
        const auto& c = model_.config();
        const auto& act = model_.active();
        const std::size_t m = c.n_samples_M;
        const double nb = static_cast<double>(c.n_range_bins_N);
        const auto mi = static_cast<Index>(m);

        // per-tone weight b_r exp(-j 2 pi delta r / N)
        Vec w = Vec::Zero(mi), wd, wt;
        if (with_gradient) {
            wd = Vec::Zero(mi);
            wt = Vec::Zero(mi);
        }
        for (std::size_t j = 0; j < act.size(); ++j) {
            const std::size_t r = act[j];
            const std::size_t tx = model_.tones().tx_map[r];
            const double ph = -two_pi * std::fmod(delta * static_cast<double>(r), nb) / nb;
            const cplx b = model_.tones().coeffs[r] * alpha_t(c, angle, tx) * std::polar(1.0, ph);
            for (std::size_t n = 0; n < m; ++n) {
                const cplx term = b * model_.hop()(static_cast<Index>(j), static_cast<Index>(n));
                w(static_cast<Index>(n)) += term;
                if (with_gradient) {
                    wd(static_cast<Index>(n)) += term * static_cast<double>(r);
                    wt(static_cast<Index>(n)) +=
                        term * cplx(0.0, two_pi * c.tx_spacing_dT * static_cast<double>(tx));
                }
            }
        }
        // common factor exp(-j 2 pi delta n / N)
        for (std::size_t n = 0; n < m; ++n) {
            const double ph = -two_pi * std::fmod(delta * static_cast<double>(n), nb) / nb;
            const cplx e = std::polar(1.0, ph);
            const auto ni = static_cast<Index>(n);
            w(ni) *= e;
            if (with_gradient) {
                // d/d delta of each term: -j 2 pi (r + n) / N
                wd(ni) = cplx(0.0, -two_pi / nb) * (wd(ni) * e + static_cast<double>(n) * w(ni));
                wt(ni) *= e;
            }
        }

        AtomJet out;
        out.value.resize(size());
        if (with_gradient) {
            out.d_delay.resize(size());
            out.d_angle.resize(size());
        }
        for (std::size_t k = 0; k < c.n_rx_NR; ++k) {
            const cplx a = model_.scale() * alpha_r(c, angle, k);
            const auto seg = static_cast<Index>(k * m);
            out.value.segment(seg, mi) = a * w;
            if (with_gradient) {
                out.d_delay.segment(seg, mi) = a * wd;
                const cplx dk(0.0, two_pi * c.rx_spacing_dR * static_cast<double>(k));
                out.d_angle.segment(seg, mi) = a * (dk * w + wt);
            }
        }
        return out;
    }

private:
    MultitoneModel model_;
};

inline Vec evaluate_atom(const SystemConfig& c, const ToneAssignment& t, double delay, double angle)
{
    return AtomEvaluator(c, t).value(delay, angle);
}

inline AtomJet atom_gradient(const SystemConfig& c, const ToneAssignment& t, double delay,
                             double angle)
{
    return AtomEvaluator(c, t).jet(delay, angle);
}

// ---------------------------------------------------------------------------
// Measurements

/// A point scatterer in the continuum: delay in seconds, angle as cos(theta).
struct Target
{
    double delay = 0.0;
    double angle = 0.0;
    cplx amplitude{};

    friend bool operator==(const Target&, const Target&) = default;
};

struct Measurement
{
    Vec y;
    double noise_sigma = 0.0;
    double snr_db = 0.0; // +inf when noiseless
};

/// 10 log10(||signal||^2 / (rows sigma^2)).
inline double snr_db(const Vec& signal, double sigma)
{
    if (sigma <= 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(signal.squaredNorm() /
                             (static_cast<double>(signal.size()) * sigma * sigma));
}

/// Noise level that puts `signal` at the requested SNR.
inline double sigma_for_snr(const Vec& signal, double snr)
{
    return std::sqrt(signal.squaredNorm() /
                     (static_cast<double>(signal.size()) * std::pow(10.0, snr / 10.0)));
}

inline Vec complex_noise(Index n, double sigma, Rng& rng)
{
    Vec w(n);
    for (Index i = 0; i < n; ++i)
        w(i) = complex_normal(rng, sigma * sigma);
    return w;
}

inline Measurement finish_measurement(Vec signal, double sigma, Rng& rng)
{
    if (sigma < 0.0 || !std::isfinite(sigma))
        throw RangeError("noise sigma must be finite and non-negative");
    Measurement out;
    out.noise_sigma = sigma;
    out.snr_db = snr_db(signal, sigma);
    if (sigma > 0.0)
        signal += complex_noise(signal.size(), sigma, rng);
    out.y = std::move(signal);
    return out;
}

/// y = A x + w for an on-grid coefficient vector.
template <LinearOperator Op>
Measurement synthesize(const Op& a, const Vec& x, double sigma, Rng& rng)
{
    if (x.size() != a.cols())
        throw ShapeError("scene vector length does not match the operator");
    return finish_measurement(a.apply(x), sigma, rng);
}

/// y = sum_k x_k Psi(delay_k, angle_k) + w.
inline Measurement synthesize(const AtomEvaluator& atoms, std::span<const Target> targets,
                              double sigma, Rng& rng)
{
    Vec s = Vec::Zero(atoms.size());
    for (const auto& t : targets)
        s += t.amplitude * atoms.value(t.delay, t.angle);
    return finish_measurement(std::move(s), sigma, rng);
}

// ---------------------------------------------------------------------------
// Provenance

inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL)
{
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Hash of the resolved config plus the selected tones and their phases.
inline std::string fingerprint(const SystemConfig& c, const ToneAssignment& t)
{
    const std::string text = to_config_text(c);
    std::uint64_t h = fnv1a(text.data(), text.size());
    for (std::size_t i : t.active()) {
        h = fnv1a(&i, sizeof i, h);
        h = fnv1a(&t.phases[i], sizeof(double), h);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Row-major, interleaved real/imaginary float64.
inline void dump_matrix_binary(const Mat& m, const std::string& path)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw FormatError("cannot open '" + path + "' for writing");
    for (Index r = 0; r < m.rows(); ++r)
        for (Index col = 0; col < m.cols(); ++col) {
            const double re = m(r, col).real(), im = m(r, col).imag();
            f.write(reinterpret_cast<const char*>(&re), sizeof re);
            f.write(reinterpret_cast<const char*>(&im), sizeof im);
        }
}

} // namespace cirad

#endif // CIRAD_SENSING_HPP
