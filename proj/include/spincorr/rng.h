// Copyright 2026 The spincorr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPINCORR_RNG_H
#define SPINCORR_RNG_H

#include <cstdint>
#include <initializer_list>
#include <random>

namespace spincorr {

/// SplitMix64 finalizer; bijective on 64-bit words.
constexpr uint64_t mix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Counter-based seed derivation: derive_seed(master, {stage, index, ...}).
/// Each key is folded in order, so distinct key paths give unrelated streams.
constexpr uint64_t derive_seed(uint64_t master, std::initializer_list<uint64_t> keys) {
    uint64_t s = mix64(master);
    for (uint64_t k : keys) {
        s = mix64(s ^ mix64(k + 0x632BE59BD9B4E019ULL));
    }
    return s;
}

/// Stable numeric tags for seed derivation so that stage streams never collide.
enum class SeedStage : uint64_t {
    NoiseGaussian = 1,
    NoiseFluctuator = 2,
    Campaign = 3,
    SpectralPosterior = 4,
    Fit = 5,
};

inline uint64_t stage_seed(uint64_t master, SeedStage stage) {
    return derive_seed(master, {static_cast<uint64_t>(stage)});
}

using Rng = std::mt19937_64;

}  // namespace spincorr

#endif
