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
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vexrisk/risk_measures.hpp"
#include "vexrisk/search.hpp"
#include "vexrisk/space.hpp"

/// Acceptance sets A_nu = { f : risk(f) <= nu } and their support functions
/// sigma_nu(h) = sup { <h, X> : X in A_nu }, with three backends:
///
///   ClosedForm  exact per-state / half-space algebra (WorstCase and
///               LinearExpected only),
///   Numeric     penalized derivative-free ascent with multi-start,
///               recession-ray probes for unboundedness and optional
///               early exit once a target pairing is certified,
///   Grid        exhaustive lattice oracle for tiny instances.
///
/// sup over an empty set is -infinity; an unbounded sup is +infinity. Both
/// carry an explicit status so callers can branch without inspecting the
/// value.
namespace vexrisk {

struct AcceptanceSet {
  RiskMeasure rm;
  double level = 0.0;
};

inline bool is_acceptable(const AcceptanceSet& a, const Position& f,
                          const Market& m) {
  return evaluate(a.rm, f, m) <= a.level;
}

enum class SupportMethod { ClosedForm, Numeric, Grid };
enum class SupportStatus { Finite, PlusInfinity, MinusInfinity };

struct SupportValue {
  double value = 0.0;
  SupportStatus status = SupportStatus::Finite;
  std::optional<Position> maximizer;  // present only when Finite
  /// Risk of the maximizer (an upper bound when only membership at the
  /// queried level was certified); NaN when no maximizer is present.
  double maximizer_risk = std::numeric_limits<double>::quiet_NaN();
  long evaluations = 0;
  bool tight = true;  // false when the budget ran out before convergence
};

struct SupportOptions {
  SupportMethod method = SupportMethod::Numeric;
  long budget = 2000;
  double tol = 1e-8;
  double grid_radius = 0.0;  // 0 -> 2 * (1 + |level|)
  /// When finite, the numeric backend stops as soon as it certifies a
  /// feasible point whose pairing reaches the target (feasibility-probe
  /// mode used by the risk-function bisection).
  double target = std::numeric_limits<double>::quiet_NaN();
  const std::vector<Position>* seeds = nullptr;
  std::uint64_t seed = 0x5eed;
};

struct GridSpec {
  double radius = 0.0;
  int points_per_axis = 0;
  double spacing = 0.0;
};

/// Largest symmetric lattice with at most `budget` points: an odd number of
/// points per axis so the origin is always included.
inline GridSpec grid_spec_for(long budget, double radius, int dims) {
  int m = static_cast<int>(
      std::floor(std::pow(static_cast<double>(std::max<long>(budget, 3)),
                          1.0 / dims)));
  if (m < 3) m = 3;
  if (m % 2 == 0) --m;
  GridSpec spec;
  spec.radius = radius;
  spec.points_per_axis = m;
  spec.spacing = 2.0 * radius / (m - 1);
  return spec;
}

namespace detail {

inline Position position_from_vec(int states, int dim,
                                  const std::vector<double>& v) {
  return Position::from_flat(states, dim, v);
}

/// sigma_nu(h) = slope * nu for the per-state (WorstCase) and half-space
/// (LinearExpected) geometries; not representable means sigma = +infinity.
struct LinearSigma {
  bool finite = false;
  double slope = 0.0;
};

inline LinearSigma closed_form_sigma_shape(const RiskMeasure& rm,
                                           const DualDensity& h,
                                           const MeasureSpace& sp,
                                           double par_tol = 1e-9) {
  const auto& w = rm.weights();
  const int n = h.states();
  const int d = h.dim();
  double ww = 0.0;
  for (double v : w) ww += v * v;

  LinearSigma out;
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double hw = 0.0, hh = 0.0;
    for (int j = 0; j < d; ++j) {
      hw += h(i, j) * w[static_cast<std::size_t>(j)];
      hh += h(i, j) * h(i, j);
    }
    const double ti = hw / ww;
    // Any component of h_i off the w-line rides a risk-neutral direction to
    // +infinity, as does a negative multiple.
    double resid = 0.0;
    for (int j = 0; j < d; ++j) {
      const double r = h(i, j) - ti * w[static_cast<std::size_t>(j)];
      resid += r * r;
    }
    const double scale = std::max(1.0, std::sqrt(hh));
    if (std::sqrt(resid) > par_tol * scale || ti < -par_tol * scale)
      return out;  // +infinity
    t[static_cast<std::size_t>(i)] = std::max(ti, 0.0);
  }

  if (rm.kind() == RiskKind::WorstCase) {
    double slope = 0.0;
    for (int i = 0; i < n; ++i)
      slope += sp.weight(i) * t[static_cast<std::size_t>(i)];
    out.finite = true;
    out.slope = slope;
    return out;
  }
  if (rm.kind() == RiskKind::LinearExpected) {
    // The single half-space admits a finite sup only for one common
    // multiple of w across all states.
    double tbar = 0.0;
    for (int i = 0; i < n; ++i)
      tbar += sp.weight(i) * t[static_cast<std::size_t>(i)];
    tbar /= sp.total_mass();
    for (int i = 0; i < n; ++i)
      if (std::abs(t[static_cast<std::size_t>(i)] - tbar) >
          par_tol * (1.0 + std::abs(tbar)))
        return out;
    out.finite = true;
    out.slope = tbar * sp.total_mass();
    return out;
  }
  return out;
}

}  // namespace detail

inline SupportValue support_closed_form(const AcceptanceSet& a,
                                        const DualDensity& h, const Market& m,
                                        const SupportOptions& /*opt*/) {
  if (!a.rm.closed_form_support())
    throw std::logic_error(
        "support_function: measure has no closed-form support");
  detail::require_shape(h, m.measure, "support_function");

  SupportValue out;
  const auto sigma = detail::closed_form_sigma_shape(a.rm, h, m.measure);
  if (!sigma.finite) {
    out.status = SupportStatus::PlusInfinity;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  out.value = sigma.slope * a.level;
  out.status = SupportStatus::Finite;
  const auto& w = a.rm.weights();
  double ww = 0.0;
  for (double v : w) ww += v * v;
  Position x(m.states(), m.dim());
  for (int i = 0; i < m.states(); ++i)
    for (int j = 0; j < m.dim(); ++j)
      x(i, j) = a.level * w[static_cast<std::size_t>(j)] / ww;
  out.maximizer = std::move(x);
  out.maximizer_risk = a.level;
  return out;
}

inline SupportValue support_grid(const AcceptanceSet& a, const DualDensity& h,
                                 const Market& m, const SupportOptions& opt) {
  const int n = m.states(), d = m.dim();
  const int dims = n * d;
  const double radius =
      opt.grid_radius > 0.0 ? opt.grid_radius : 2.0 * (1.0 + std::abs(a.level));
  const GridSpec spec = grid_spec_for(opt.budget, radius, dims);
  const double memb_tol = opt.tol * (1.0 + std::abs(a.level));

  SupportValue out;
  std::vector<int> idx(static_cast<std::size_t>(dims), 0);
  std::vector<double> x(static_cast<std::size_t>(dims), 0.0);
  double best = -std::numeric_limits<double>::infinity();
  double best_risk = 0.0;
  Position best_x(n, d);
  bool any_feasible = false;

  bool done = false;
  while (!done) {
    for (int k = 0; k < dims; ++k)
      x[static_cast<std::size_t>(k)] =
          -radius + spec.spacing * idx[static_cast<std::size_t>(k)];
    Position X = detail::position_from_vec(n, d, x);
    ++out.evaluations;
    const double risk_x = evaluate(a.rm, X, m);
    if (risk_x <= a.level + memb_tol) {
      any_feasible = true;
      const double p = pairing(h, X, m.measure);
      if (p > best) {
        best = p;
        best_risk = risk_x;
        best_x = X;
      }
    }
    // odometer
    int k = 0;
    while (k < dims) {
      if (++idx[static_cast<std::size_t>(k)] < spec.points_per_axis) break;
      idx[static_cast<std::size_t>(k)] = 0;
      ++k;
    }
    done = k == dims;
  }

  if (!any_feasible) {
    out.status = SupportStatus::MinusInfinity;
    out.value = -std::numeric_limits<double>::infinity();
    return out;
  }
  out.value = best;
  out.status = SupportStatus::Finite;
  out.maximizer = std::move(best_x);
  out.maximizer_risk = best_risk;
  return out;
}

namespace detail {

struct FeasibleBest {
  bool valid = false;
  Position x;
  double pair = -std::numeric_limits<double>::infinity();
  double risk = 0.0;
};

}  // namespace detail

inline SupportValue support_numeric(const AcceptanceSet& a,
                                    const DualDensity& h, const Market& m,
                                    const SupportOptions& opt) {
  detail::require_shape(h, m.measure, "support_function");
  const int n = m.states(), d = m.dim();
  const int dims = n * d;

  EvalBudget budget(std::max<long>(opt.budget, 1));
  const auto rho = [&](const Position& X) {
    ++budget.used;
    return evaluate(a.rm, X, m);
  };

  const double feas_tol = opt.tol * (1.0 + std::abs(a.level));
  const bool has_target = std::isfinite(opt.target);

  detail::FeasibleBest best;
  bool target_reached = false;
  const auto consider = [&](const Position& X, double rho_x) {
    if (rho_x > a.level + feas_tol) return;
    const double p = pairing(h, X, m.measure);
    if (!best.valid || p > best.pair) {
      best.valid = true;
      best.pair = p;
      best.risk = rho_x;
      best.x = X;
      if (has_target && p >= opt.target) target_reached = true;
    }
  };

  const auto finite_result = [&](bool tight) {
    SupportValue out;
    out.value = best.pair;
    out.status = SupportStatus::Finite;
    out.maximizer = best.x;
    out.maximizer_risk = best.risk;
    out.evaluations = budget.used;
    out.tight = tight;
    return out;
  };
  const auto infinite_result = [&](SupportStatus status) {
    SupportValue out;
    out.status = status;
    out.value = status == SupportStatus::PlusInfinity
                    ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
    out.evaluations = budget.used;
    return out;
  };

  // Stage 1: find some member of A_nu. Seeds first, then the origin and
  // pushes down the cone (membership can only improve along -K), then a
  // descent on the risk itself.
  if (opt.seeds)
    for (const Position& s : *opt.seeds) {
      if (budget.spent()) break;
      consider(s, rho(s));
      if (target_reached) return finite_result(true);
    }
  if (!best.valid) {
    Position kbar(n, d);
    for (int i = 0; i < n; ++i)
      for (const auto& g : m.cone.generators())
        for (int j = 0; j < d; ++j)
          kbar(i, j) += g[static_cast<std::size_t>(j)];
    for (double t : {0.0, 1.0, 4.0, 16.0, 64.0, 256.0, 1024.0, 4096.0}) {
      if (budget.spent() || best.valid) break;
      const Position X = (-t) * kbar;
      consider(X, rho(X));
    }
  }
  if (!best.valid && !budget.spent()) {
    // Descend the risk itself; if even its best value stays above nu the
    // set is certified empty (documented heuristic).
    PatternOptions popt;
    popt.initial_step = 1.0;
    popt.min_step = 1e-6;
    popt.max_evals = std::min<long>(budget.remaining(), 400 + 40L * dims);
    std::vector<double> x0(static_cast<std::size_t>(dims), 0.0);
    const auto run = pattern_search_max(
        [&](const std::vector<double>& v) {
          const Position X = detail::position_from_vec(n, d, v);
          const double r = rho(X);
          consider(X, r);
          return -r;
        },
        x0, popt);
    (void)run;
    if (!best.valid) return infinite_result(SupportStatus::MinusInfinity);
  }
  if (!best.valid) return infinite_result(SupportStatus::MinusInfinity);
  if (target_reached) return finite_result(true);

  if (h.is_zero()) return finite_result(true);  // sup of the zero functional

  const double scale0 = 1.0 + best.x.max_abs() + std::abs(a.level);
  const double divergence_radius = 1e6 * scale0;

  // Stage 2: recession-ray probes. A direction with positive pairing along
  // which membership persists at a huge step certifies sigma = +infinity
  // (the segment from the feasible point is feasible by quasiconvexity).
  {
    std::vector<Position> rays;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) {
        if (std::abs(h(i, j)) < 1e-14) continue;
        Position r(n, d);
        r(i, j) = h(i, j) > 0 ? 1.0 : -1.0;
        rays.push_back(std::move(r));
      }
    if (a.rm.kind() != RiskKind::Custom) {
      // Statewise components of h orthogonal to the scalarization ride
      // level sets of <w, .>.
      const auto& w = a.rm.effective_weights();
      double ww = 0.0;
      for (double v : w) ww += v * v;
      if (ww > 0.0)
        for (int i = 0; i < n; ++i) {
          double hw = 0.0;
          for (int j = 0; j < d; ++j)
            hw += h(i, j) * w[static_cast<std::size_t>(j)];
          Position r(n, d);
          double rr = 0.0;
          for (int j = 0; j < d; ++j) {
            r(i, j) = h(i, j) - (hw / ww) * w[static_cast<std::size_t>(j)];
            rr += r(i, j) * r(i, j);
          }
          if (rr > 1e-18) rays.push_back(std::move(r));
        }
    }
    for (const Position& r : rays) {
      if (budget.spent()) break;
      const double pr = pairing(h, r, m.measure);
      if (pr <= 1e-12 * scale0) continue;
      const Position far = best.x + (1e6 * scale0) * r;
      if (rho(far) <= a.level + feas_tol)
        return infinite_result(SupportStatus::PlusInfinity);
    }
  }

  // Stage 3: ascent along h itself (pairing grows at rate sum mu ||h_i||^2),
  // doubling to the membership boundary.
  {
    Position dir(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) dir(i, j) = h(i, j);
    double t = 0.5 * scale0 / (1.0 + h.max_abs());
    double t_feas = 0.0;
    while (!budget.spent()) {
      const Position X = best.x + t * dir;
      if (rho(X) <= a.level + feas_tol) {
        consider(X, a.level);  // already known feasible
        t_feas = t;
        t *= 2.0;
        if (t * (1.0 + h.max_abs()) > divergence_radius)
          return infinite_result(SupportStatus::PlusInfinity);
      } else {
        break;
      }
    }
    if (target_reached) return finite_result(true);
    // refine the boundary crossing a little
    if (t_feas > 0.0) {
      double lo = t_feas, hi = t;
      for (int it = 0; it < 12 && !budget.spent(); ++it) {
        const double mid = 0.5 * (lo + hi);
        const Position X = best.x + mid * dir;
        if (rho(X) <= a.level + feas_tol) {
          consider(X, a.level);
          lo = mid;
        } else {
          hi = mid;
        }
      }
      if (target_reached) return finite_result(true);
    }
  }

  // Stage 4: multi-start penalized pattern ascent with increasing penalty.
  const int wanted_starts =
      static_cast<int>(std::max<long>(8, opt.budget / 250));
  Rng rng(Rng::mix(opt.seed, 0x5f));
  bool step_converged_last = false;
  for (int s = 0; s < wanted_starts && !budget.spent(); ++s) {
    std::vector<double> x0 = best.x.flat();
    if (s > 0) {
      const double spread = 0.3 * scale0 * rng.uniform(0.2, 1.0);
      for (double& v : x0) v += spread * rng.normal();
    }
    const long slice = std::max<long>(
        40, budget.remaining() / (2L * (wanted_starts - s)));
    long slice_left = std::min(slice, budget.remaining());
    for (double c : {1e1, 1e2, 1e3, 1e4, 1e5, 1e6}) {
      if (slice_left <= 0 || budget.spent()) break;
      bool diverged = false;
      PatternOptions popt;
      popt.initial_step = 0.25 * scale0;
      popt.min_step = std::max(1e-10, 1e-9 * scale0);
      popt.max_evals = std::min(slice_left / 3 + 20, slice_left);
      const long before = budget.used;
      const auto run = pattern_search_max(
          [&](const std::vector<double>& v) {
            const Position X = detail::position_from_vec(n, d, v);
            const double r = rho(X);
            consider(X, r);
            const double viol = std::max(0.0, r - a.level);
            return pairing(h, X, m.measure) - c * viol * viol;
          },
          x0,
          popt,
          [&](const std::vector<double>& v, double) {
            if (target_reached) return true;
            for (double vv : v)
              if (std::abs(vv) > divergence_radius) {
                diverged = true;
                return true;
              }
            return false;
          });
      slice_left -= budget.used - before;
      x0 = run.x;
      step_converged_last = run.step_converged;
      if (target_reached) return finite_result(true);
      if (diverged) {
        // Only a (near-)feasible runaway counts as recession evidence.
        const Position X = detail::position_from_vec(n, d, run.x);
        if (rho(X) <= a.level + 10.0 * feas_tol)
          return infinite_result(SupportStatus::PlusInfinity);
        break;  // infeasible runaway at this penalty: try next start
      }
    }
  }

  return finite_result(step_converged_last && !budget.spent());
}

inline SupportValue support_function(const AcceptanceSet& a,
                                     const DualDensity& h, const Market& m,
                                     const SupportOptions& opt = {}) {
  switch (opt.method) {
    case SupportMethod::ClosedForm:
      return support_closed_form(a, h, m, opt);
    case SupportMethod::Grid:
      return support_grid(a, h, m, opt);
    case SupportMethod::Numeric:
      return support_numeric(a, h, m, opt);
  }
  throw std::logic_error("support_function: unknown method");
}

}  // namespace vexrisk
