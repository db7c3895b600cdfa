/*
   Copyright 2026 The rapidset Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

// Deterministic random numbers.
//
// Every stream is identified by (master seed, purpose tag, index) and is
// derived by SplitMix64 mixing, so a stream never depends on how many
// other streams were drawn before it. The bulk generator is xoshiro256**
// and normals come from a 128-layer ziggurat.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace rapidset {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Sub-seed for the stream `(tag, index)` below `master`.
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                           std::uint64_t index = 0) noexcept
{
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ fnv1a64(tag));
    return splitmix64(h ^ splitmix64(index));
}

class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed) noexcept
    {
        std::uint64_t x = seed;
        for (auto& w : s_) {
            w = splitmix64(x);
            x += 0x9e3779b97f4a7c15ULL;
        }
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept
    {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1).
    double uniform_open() noexcept
    {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept
    {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> s_{};
};

namespace detail {

// Marsaglia-Tsang ziggurat tables with 128 layers, scaled for a 56-bit
// signed draw.
struct ZigguratTables {
    static constexpr double r = 3.442619855899;
    static constexpr double v = 9.91256303526217e-3;
    static constexpr double scale = 0x1.0p55;

    std::array<std::uint64_t, 128> k{};
    std::array<double, 128> w{};
    std::array<double, 128> f{};

    ZigguratTables() noexcept
    {
        double dn = r;
        double tn = dn;
        const double q = v / std::exp(-0.5 * dn * dn);
        k[0] = static_cast<std::uint64_t>((dn / q) * scale);
        k[1] = 0;
        w[0] = q / scale;
        w[127] = dn / scale;
        f[0] = 1.0;
        f[127] = std::exp(-0.5 * dn * dn);
        for (int i = 126; i >= 1; --i) {
            dn = std::sqrt(-2.0 * std::log(v / dn + std::exp(-0.5 * dn * dn)));
            k[i + 1] = static_cast<std::uint64_t>((dn / tn) * scale);
            tn = dn;
            f[i] = std::exp(-0.5 * dn * dn);
            w[i] = dn / scale;
        }
    }
};

inline const ZigguratTables ziggurat{};

inline const ZigguratTables& ziggurat_tables() noexcept { return ziggurat; }

} // namespace detail

/// Name recorded in generation logs for the normal sampler below.
inline constexpr std::string_view normal_method_name = "ziggurat-128/xoshiro256**";

/// Standard normal draw (exact ziggurat rejection sampler).
inline double standard_normal(Xoshiro256& gen) noexcept
{
    const auto& t = detail::ziggurat_tables();
    for (;;) {
        const std::uint64_t bits = gen();
        const auto iz = static_cast<std::size_t>(bits & 127U);
        const std::int64_t hz = static_cast<std::int64_t>(bits) >> 8;
        const std::uint64_t mag = hz < 0 ? static_cast<std::uint64_t>(-hz) : static_cast<std::uint64_t>(hz);
        const double x = static_cast<double>(hz) * t.w[iz];
        if (mag < t.k[iz]) return x;
        if (iz == 0) {
            double xt = 0.0;
            double y = 0.0;
            do {
                xt = -std::log(gen.uniform_open()) / detail::ZigguratTables::r;
                y = -std::log(gen.uniform_open());
            } while (y + y < xt * xt);
            return hz > 0 ? detail::ZigguratTables::r + xt : -detail::ZigguratTables::r - xt;
        }
        if (t.f[iz] + gen.uniform() * (t.f[iz - 1] - t.f[iz]) < std::exp(-0.5 * x * x)) return x;
    }
}

} // namespace rapidset
