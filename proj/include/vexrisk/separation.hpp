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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vexrisk/acceptance.hpp"
#include "vexrisk/risk_measures.hpp"
#include "vexrisk/sampling.hpp"
#include "vexrisk/search.hpp"
#include "vexrisk/space.hpp"

/// Finite-dimensional separation machinery: project a rejected position
/// onto the (closed, convex, monotone) acceptance set in the mu-weighted
/// Euclidean geometry, and read the separating functional off the
/// projection residual. The residual direction doubles as a dual density
/// because the projection uses the same inner product as the pairing, and
/// monotonicity of the set (A = A - K) makes the residual land in K0.
namespace vexrisk {

struct SeparationCertificate {
  DualDensity h;
  double margin = 0.0;          // <h, f> - sigma(h); > 0 for a valid certificate
  Position projection;
  bool admissible = false;      // statewise membership of h in K0
  double statewise_defect = 0.0;   // worst statewise <h_i, k> shortfall
  double integrated_defect = 0.0;  // worst sum_i mu_i <h_i, k> shortfall
  long evaluations = 0;
};

namespace detail {

inline double weighted_sq_distance(const Position& x, const Position& f,
                                   const MeasureSpace& sp) {
  double acc = 0.0;
  for (int i = 0; i < x.states(); ++i) {
    double s = 0.0;
    for (int j = 0; j < x.dim(); ++j) {
      const double dlt = x(i, j) - f(i, j);
      s += dlt * dlt;
    }
    acc += sp.weight(i) * s;
  }
  return acc;
}

/// Exact projections for the closed-form geometries: statewise half-space
/// clamps for WorstCase, one half-space in the weighted inner product for
/// LinearExpected.
inline Position closed_form_projection(const AcceptanceSet& a,
                                       const Position& f, const Market& m) {
  const auto& w = a.rm.weights();
  double ww = 0.0;
  for (double v : w) ww += v * v;
  Position x = f;
  if (a.rm.kind() == RiskKind::WorstCase) {
    for (int i = 0; i < f.states(); ++i) {
      double s = 0.0;
      for (int j = 0; j < f.dim(); ++j)
        s += w[static_cast<std::size_t>(j)] * f(i, j);
      const double excess = std::max(0.0, s - a.level);
      if (excess > 0.0)
        for (int j = 0; j < f.dim(); ++j)
          x(i, j) -= excess * w[static_cast<std::size_t>(j)] / ww;
    }
    return x;
  }
  if (a.rm.kind() == RiskKind::LinearExpected) {
    const double total = m.measure.total_mass();
    double s = 0.0;
    for (int i = 0; i < f.states(); ++i)
      for (int j = 0; j < f.dim(); ++j)
        s += m.measure.weight(i) * w[static_cast<std::size_t>(j)] * f(i, j);
    const double excess = std::max(0.0, s - total * a.level);
    if (excess > 0.0) {
      const double shift = excess / (total * ww);
      for (int i = 0; i < f.states(); ++i)
        for (int j = 0; j < f.dim(); ++j)
          x(i, j) -= shift * w[static_cast<std::size_t>(j)];
    }
    return x;
  }
  throw std::logic_error("closed_form_projection: unsupported kind");
}

}  // namespace detail

/// Projection of f onto A_nu in the mu-weighted Euclidean metric. Members
/// project to themselves. Closed-form measures use exact formulas;
/// otherwise an exact-penalty pattern descent warm-started at the boundary
/// point of the segment from a feasible anchor to f.
inline Position project_onto_acceptance(const AcceptanceSet& a,
                                        const Position& f, const Market& m,
                                        double tol = 1e-8, long budget = 5000) {
  if (budget < 1)
    throw std::invalid_argument("project_onto_acceptance: budget >= 1");
  if (is_acceptable(a, f, m)) return f;
  if (a.rm.closed_form_support())
    return detail::closed_form_projection(a, f, m);

  const int n = m.states(), d = m.dim();
  EvalBudget eb(budget);
  const auto risk = [&](const Position& X) {
    ++eb.used;
    return evaluate(a.rm, X, m);
  };
  const double member_tol = tol * (1.0 + std::abs(a.level));

  // Feasible anchor: walk down the cone from f.
  Position kbar(n, d);
  for (int i = 0; i < n; ++i)
    for (const auto& g : m.cone.generators())
      for (int j = 0; j < d; ++j)
        kbar(i, j) += g[static_cast<std::size_t>(j)];
  Position anchor = f;
  {
    double t = 1.0 + f.max_abs();
    bool found = false;
    for (int k = 0; k < 60 && !eb.spent(); ++k) {
      const Position X = f - t * kbar;
      if (risk(X) <= a.level + member_tol) {
        anchor = X;
        found = true;
        break;
      }
      t *= 2.0;
    }
    if (!found) {
      // Set may still be nonempty elsewhere; fall back to a descent.
      PatternOptions popt;
      popt.initial_step = 1.0 + f.max_abs();
      popt.min_step = 1e-7;
      popt.max_evals = std::min<long>(eb.remaining() / 2, 800);
      const auto run = pattern_search_max(
          [&](const std::vector<double>& v) {
            return -risk(Position::from_flat(n, d, v));
          },
          f.flat(), popt);
      if (-run.value > a.level + member_tol)
        throw std::domain_error(
            "project_onto_acceptance: acceptance set appears empty");
      anchor = Position::from_flat(n, d, run.x);
    }
  }

  // Boundary point on [anchor, f]: the last feasible point of the segment.
  Position best = anchor;
  {
    double lo = 0.0, hi = 1.0;  // anchor + t (f - anchor)
    for (int it = 0; it < 40 && !eb.spent(); ++it) {
      const double mid = 0.5 * (lo + hi);
      const Position X = anchor + mid * (f - anchor);
      if (risk(X) <= a.level + member_tol) {
        lo = mid;
        best = X;
      } else {
        hi = mid;
      }
    }
  }

  double best_dist = detail::weighted_sq_distance(best, f, m.measure);
  std::vector<double> x0 = best.flat();
  for (double c : {1e1, 1e2, 1e3, 1e4, 1e5, 1e6}) {
    if (eb.spent()) break;
    PatternOptions popt;
    popt.initial_step = 0.25 * (1.0 + best.max_abs());
    popt.min_step = std::max(1e-10, 0.01 * tol);
    popt.max_evals = std::min<long>(eb.remaining() / 3 + 20, eb.remaining());
    const auto run = pattern_search_max(
        [&](const std::vector<double>& v) {
          const Position X = Position::from_flat(n, d, v);
          const double r = risk(X);
          const double dist = detail::weighted_sq_distance(X, f, m.measure);
          if (r <= a.level + member_tol && dist < best_dist) {
            best_dist = dist;
            best = X;
          }
          const double viol = std::max(0.0, r - a.level);
          return -(dist + c * viol * viol);
        },
        x0, popt);
    x0 = run.x;
  }
  return best;
}

/// Separating certificate for a position strictly outside the acceptance
/// set: h is the projection residual f - X*, the margin is checked against
/// the support function, and admissibility is verified statewise (soft) and
/// in integrated form (the hard assertion).
inline SeparationCertificate separate(const AcceptanceSet& a, const Position& f,
                                      const Market& m, double tol = 1e-8,
                                      long budget = 5000) {
  const double risk_f = evaluate(a.rm, f, m);
  if (risk_f <= a.level + tol)
    throw std::invalid_argument(
        "separate: position is inside (or on the boundary of) the set");

  SeparationCertificate cert;
  cert.projection = project_onto_acceptance(a, f, m, tol, budget / 2);

  DualDensity h(f.states(), f.dim());
  for (int i = 0; i < f.states(); ++i)
    for (int j = 0; j < f.dim(); ++j)
      h(i, j) = f(i, j) - cert.projection(i, j);
  cert.h = h;

  SupportOptions sopt;
  sopt.method = a.rm.closed_form_support() ? SupportMethod::ClosedForm
                                           : SupportMethod::Numeric;
  sopt.budget = std::max<long>(budget / 2, 100);
  sopt.tol = tol;
  std::vector<Position> seeds{cert.projection};
  sopt.seeds = &seeds;
  const SupportValue sv = support_function(a, h, m, sopt);
  cert.evaluations = sv.evaluations;
  const double paired = pairing(h, f, m.measure);
  cert.margin = sv.status == SupportStatus::PlusInfinity
                    ? -std::numeric_limits<double>::infinity()
                    : paired - sv.value;

  const double h_scale = std::max(1.0, h.max_abs());
  double statewise_min = std::numeric_limits<double>::infinity();
  double integrated_min = std::numeric_limits<double>::infinity();
  for (const auto& k : m.cone.generators()) {
    double integrated = 0.0;
    for (int i = 0; i < h.states(); ++i) {
      const double v = detail::dot(h.state(i), k);
      statewise_min = std::min(statewise_min, v);
      integrated += m.measure.weight(i) * v;
    }
    integrated_min = std::min(integrated_min, integrated);
  }
  cert.statewise_defect = std::max(0.0, -statewise_min);
  cert.integrated_defect = std::max(0.0, -integrated_min);
  cert.admissible = statewise_min >= -tol * h_scale;
  return cert;
}

/// Two-sided sampled check of the membership characterization: members must
/// satisfy <h, f> <= sigma(h) for every admissible density (checked on
/// n_duals samples, the support search blind to f but told the target);
/// non-members must admit a strictly separating admissible certificate.
inline AxiomReport check_lemma1(const AcceptanceSet& a, const Position& f,
                                const Market& m, int n_duals,
                                std::uint64_t seed, double tol = 1e-8,
                                long budget_per_dual = 2000) {
  if (n_duals < 1) throw std::invalid_argument("check_lemma1: n_duals >= 1");
  AxiomReport report;
  const bool member = is_acceptable(a, f, m);

  if (!member) {
    report.trials = 1;
    const auto cert = separate(a, f, m, tol, 50 * budget_per_dual);
    if (!(cert.margin > 0.0) || !cert.admissible)
      report.record(std::max(0.0, -cert.margin) + cert.statewise_defect,
                    {f, cert.projection, 0.0, cert.margin, 0.0});
    return report;
  }

  Rng rng(Rng::mix(seed, 0x1e111a));
  report.trials = n_duals;
  for (int k = 0; k < n_duals; ++k) {
    const DualDensity h = sample_dual_density(rng, m.cone, m.states());
    const double paired = pairing(h, f, m.measure);
    SupportOptions sopt;
    sopt.tol = tol;
    if (a.rm.closed_form_support()) {
      sopt.method = SupportMethod::ClosedForm;
    } else {
      sopt.method = SupportMethod::Numeric;
      sopt.budget = budget_per_dual;
      sopt.target = paired;
      sopt.seed = Rng::mix(seed, static_cast<std::uint64_t>(k) + 7);
    }
    const SupportValue sv = support_function(a, h, m, sopt);
    if (sv.status == SupportStatus::PlusInfinity) continue;
    if (sv.status == SupportStatus::MinusInfinity || paired > sv.value + tol)
      report.record(paired - sv.value, {f, f, 0.0, paired, sv.value});
  }
  return report;
}

}  // namespace vexrisk
