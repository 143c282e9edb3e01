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
#include <functional>
#include <utility>
#include <vector>

namespace vexrisk {

/// Shared evaluation counter. Searches pre-slice their allotment from the
/// remaining amount, so concurrent starts never race on the count.
struct EvalBudget {
  long limit = 0;
  long used = 0;

  explicit EvalBudget(long lim) : limit(lim) {}
  bool spent() const { return used >= limit; }
  long remaining() const { return limit > used ? limit - used : 0; }
};

struct PatternResult {
  std::vector<double> x;
  double value = 0.0;
  long evaluations = 0;
  bool step_converged = false;   // step fell below min_step
  bool early_stopped = false;    // stop predicate fired
};

struct PatternOptions {
  double initial_step = 0.25;
  double min_step = 1e-9;
  double expand = 2.0;
  double shrink = 0.5;
  long max_evals = 1000;
};

/// Compass pattern search maximizing `fn`. Sweeps coordinates with +/- step
/// probes, expands the step after an improving sweep and shrinks it after a
/// stalled one. `stop` (optional) is consulted after every accepted move;
/// returning true ends the search early (used for target-reaching checks
/// and divergence detection).
inline PatternResult pattern_search_max(
    const std::function<double(const std::vector<double>&)>& fn,
    std::vector<double> x0, const PatternOptions& opt,
    const std::function<bool(const std::vector<double>&, double)>& stop = {}) {
  PatternResult out;
  out.x = std::move(x0);
  const std::size_t dims = out.x.size();

  long evals = 0;
  const auto eval = [&](const std::vector<double>& x) {
    ++evals;
    return fn(x);
  };

  out.value = eval(out.x);
  if (stop && stop(out.x, out.value)) {
    out.early_stopped = true;
    out.evaluations = evals;
    return out;
  }

  double step = opt.initial_step;
  std::vector<double> probe = out.x;
  while (evals < opt.max_evals && step >= opt.min_step) {
    bool improved = false;
    for (std::size_t j = 0; j < dims && evals < opt.max_evals; ++j) {
      for (double dir : {+1.0, -1.0}) {
        probe = out.x;
        probe[j] += dir * step;
        const double v = eval(probe);
        if (v > out.value) {
          out.x = probe;
          out.value = v;
          improved = true;
          if (stop && stop(out.x, out.value)) {
            out.early_stopped = true;
            out.evaluations = evals;
            return out;
          }
          break;  // next coordinate
        }
      }
    }
    step *= improved ? opt.expand : opt.shrink;
  }
  out.step_converged = step < opt.min_step;
  out.evaluations = evals;
  return out;
}

}  // namespace vexrisk
