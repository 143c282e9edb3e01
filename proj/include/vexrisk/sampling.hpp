// Copyright 2026 The vexrisk Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>

#include "vexrisk/rng.hpp"
#include "vexrisk/space.hpp"

namespace vexrisk {

/// Gaussian position with the given per-entry scale.
inline Position sample_position(Rng& rng, int states, int dim,
                                double scale = 1.0) {
  Position f(states, dim);
  for (int i = 0; i < states; ++i)
    for (int j = 0; j < dim; ++j) f(i, j) = scale * rng.normal();
  return f;
}

/// Statewise element of K: a random nonnegative combination of the cone
/// generators in every state. Used to build order-comparable pairs.
inline Position sample_cone_element(Rng& rng, const ConeSpace& cone, int states,
                                    double scale = 1.0) {
  Position k(states, cone.dim());
  for (int i = 0; i < states; ++i)
    for (const auto& g : cone.generators()) {
      const double c = scale * rng.uniform();
      for (int j = 0; j < cone.dim(); ++j) k(i, j) += c * g[static_cast<std::size_t>(j)];
    }
  return k;
}

/// Statewise element of K0: a random nonnegative combination of the dual
/// generators in every state; admissible by construction.
inline DualDensity sample_dual_density(Rng& rng, const ConeSpace& cone,
                                       int states, double scale = 1.0) {
  DualDensity h(states, cone.dim());
  for (int i = 0; i < states; ++i)
    for (const auto& y : cone.dual_generators()) {
      const double c = scale * std::abs(rng.normal());
      for (int j = 0; j < cone.dim(); ++j) h(i, j) += c * y[static_cast<std::size_t>(j)];
    }
  return h;
}

}  // namespace vexrisk
