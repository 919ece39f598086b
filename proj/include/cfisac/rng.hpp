// SPDX-License-Identifier: Apache-2.0
//
// cfisac: cooperative ISAC multistatic sensing toolkit
// Copyright (C) 2026 The cfisac authors
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

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace cfisac
{

// Stream identifiers for the keyed generator. Values are part of the dataset
// reproducibility contract; append only.
enum class Stream : std::uint64_t
{
    Targets = 1,
    Users = 2,
    Payload = 3,
    Reflection = 4,
    Clutter = 5,
    Offsets = 6,
    Noise = 7,
    Codebook = 8,
    Generic = 9
};

// Counter-based generator: output k of a stream is splitmix64(key + k * golden),
// so any stream is reproducible in isolation from (seed, sample, stream, index).
class Rng
{
public:
    Rng(std::uint64_t seed, std::uint64_t sample, Stream stream, std::uint64_t index = 0)
        : key_(derive(seed, sample, static_cast<std::uint64_t>(stream), index)) {}

    explicit Rng(std::uint64_t seed) : key_(derive(seed, 0, static_cast<std::uint64_t>(Stream::Generic), 0)) {}

    std::uint64_t next_u64() noexcept
    {
        counter_ += kGolden;
        return mix(key_ + counter_);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n) by rejection; n > 0.
    std::uint64_t below(std::uint64_t n) noexcept
    {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v = next_u64();
        while (v >= limit)
            v = next_u64();
        return v % n;
    }

    // Standard normal via Box-Muller; deterministic across standard libraries.
    double normal() noexcept
    {
        if (has_spare_)
        {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0)
            u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Circularly-symmetric complex normal with E|z|^2 = variance.
    std::complex<double> complex_normal(double variance) noexcept
    {
        const double s = std::sqrt(variance / 2.0);
        const double re = normal();
        const double im = normal();
        return {s * re, s * im};
    }

private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept
    {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    static constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t sample, std::uint64_t stream,
                                          std::uint64_t index) noexcept
    {
        std::uint64_t k = mix(seed + kGolden);
        k = mix(k ^ (sample + 0x632BE59BD9B4E019ull));
        k = mix(k ^ (stream * 0xD6E8FEB86659FD93ull));
        k = mix(k ^ (index + 0x8CB92BA72F3D8DD7ull));
        return k;
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace cfisac
