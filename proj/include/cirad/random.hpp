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

#ifndef CIRAD_RANDOM_HPP
#define CIRAD_RANDOM_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

namespace cirad
{

using cplx = std::complex<double>;
using Rng = std::mt19937_64;

/// Named sub-streams. A trial draws tones, scene and noise from independent
/// generators so that changing one consumer never shifts the others.
enum class Stream : std::uint64_t
{
    tones = 1,
    scene = 2,
    noise = 3,
    baseline = 4,
    sampling = 5,
};

inline std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of trial `index` under `master`. Independent of execution order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept
{
    return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_stream(std::uint64_t seed, Stream stream) noexcept
{
    return Rng(splitmix64(seed ^ (static_cast<std::uint64_t>(stream) * 0xd1b54a32d192ed03ULL)));
}

inline double uniform01(Rng& rng)
{
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform_phase(Rng& rng)
{
    return 2.0 * std::numbers::pi * uniform01(rng);
}

/// Circular complex Gaussian CN(0, variance): real and imaginary parts each
/// carry half the variance.
inline cplx complex_normal(Rng& rng, double variance = 1.0)
{
    std::normal_distribution<double> gauss(0.0, std::sqrt(variance / 2.0));
    const double re = gauss(rng);
    const double im = gauss(rng);
    return {re, im};
}

} // namespace cirad

#endif // CIRAD_RANDOM_HPP
