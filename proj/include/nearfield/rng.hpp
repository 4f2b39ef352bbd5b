// SPDX-License-Identifier: Apache-2.0
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

#ifndef NEARFIELD_RNG_HPP
#define NEARFIELD_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace nearfield
{
    // SplitMix64 finalizer.
    constexpr std::uint64_t mix64(std::uint64_t z) noexcept
    {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Counter-based sub-seed: depends only on (seed, index), never on call order.
    constexpr std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t index) noexcept
    {
        return mix64(mix64(seed) ^ mix64(index + 0x9E3779B97F4A7C15ULL));
    }

    /// Small deterministic stream generator (SplitMix64). Output is identical on
    /// every platform, unlike the std distributions.
    class SplitMix64
    {
    public:
        explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

        constexpr std::uint64_t next() noexcept
        {
            state_ += 0x9E3779B97F4A7C15ULL;
            return mix64(state_);
        }

        // Uniform on [0, 1) with 53 random bits.
        double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

        double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

        // Standard normal via Box-Muller; one draw per call.
        double normal() noexcept
        {
            double u1 = 1.0 - uniform(); // (0, 1]
            double u2 = uniform();
            return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
        }

    private:
        std::uint64_t state_;
    };
}

#endif
