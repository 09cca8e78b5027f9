/*
 * Copyright 2026 The gsnas Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef GSNAS_RANDOM_H_
#define GSNAS_RANDOM_H_

#include <cstdint>
#include <random>
#include <string_view>

namespace gsnas {

// All randomness goes through a 64-bit Mersenne Twister. The engine output is
// fully specified by the standard; the distributions below are written out so
// that sampled values do not depend on the standard library vendor.
using Rng = std::mt19937_64;

// Uniform double in [0, 1) built from the top 53 bits of one engine draw.
double Uniform01(Rng& rng);

// Uniform double in [lo, hi).
double Uniform(Rng& rng, double lo, double hi);

// Unbiased integer in [0, n). Requires n > 0.
std::uint64_t UniformIndex(Rng& rng, std::uint64_t n);

// Standard normal via Box-Muller; consumes exactly two uniforms per call.
double StandardNormal(Rng& rng);

// Derives an independent child seed from a root seed and a purpose label:
// splitmix64(root ^ fnv1a64(label)). Components never share a stream unless
// they use the same label.
std::uint64_t DeriveSeed(std::uint64_t root, std::string_view label);

std::uint64_t Fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace gsnas

#endif  // GSNAS_RANDOM_H_
