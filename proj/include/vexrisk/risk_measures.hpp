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
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vexrisk/sampling.hpp"
#include "vexrisk/space.hpp"

/// A catalogue of lower semicontinuous quasiconvex risk measures on the
/// finite variable exponent space, all monotone with respect to the cone
/// order, plus sampled checkers for the two defining axioms:
///   A1  f1 <=_K f2  implies  risk(f1) <= risk(f2)
///   A2  risk(l f1 + (1-l) f2) <= max(risk(f1), risk(f2))
namespace vexrisk {

enum class RiskKind {
  LinearExpected,
  WorstCase,
  Entropic,
  CertaintyEquivalent,
  MonotoneTransform,
  Custom,
};

inline const char* to_string(RiskKind k) {
  switch (k) {
    case RiskKind::LinearExpected: return "LinearExpected";
    case RiskKind::WorstCase: return "WorstCase";
    case RiskKind::Entropic: return "Entropic";
    case RiskKind::CertaintyEquivalent: return "CertaintyEquivalent";
    case RiskKind::MonotoneTransform: return "MonotoneTransform";
    case RiskKind::Custom: return "Custom";
  }
  return "?";
}

enum class TransformKind { Arctan, Cube, PiecewiseLinear };

/// Strictly increasing continuous scalar map used to wrap a base measure.
/// Piecewise-linear transforms are extended past the outer knots with the
/// end-segment slopes so monotonicity holds on all of R.
class Transform {
 public:
  static Transform arctan() { return Transform(TransformKind::Arctan, {}); }
  static Transform cube() { return Transform(TransformKind::Cube, {}); }
  static Transform piecewise_linear(
      std::vector<std::pair<double, double>> knots) {
    if (knots.size() < 2)
      throw std::invalid_argument("Transform: need at least two knots");
    for (std::size_t i = 1; i < knots.size(); ++i)
      if (!(knots[i].first > knots[i - 1].first &&
            knots[i].second > knots[i - 1].second))
        throw std::invalid_argument(
            "Transform: knots must be strictly increasing in x and y");
    return Transform(TransformKind::PiecewiseLinear, std::move(knots));
  }

  TransformKind kind() const { return kind_; }

  std::string name() const {
    switch (kind_) {
      case TransformKind::Arctan: return "arctan";
      case TransformKind::Cube: return "cube";
      case TransformKind::PiecewiseLinear: return "piecewise";
    }
    return "?";
  }

  double operator()(double x) const {
    switch (kind_) {
      case TransformKind::Arctan: return std::atan(x);
      case TransformKind::Cube: return x * x * x;
      case TransformKind::PiecewiseLinear: {
        if (x <= knots_.front().first) {
          const auto& [x0, y0] = knots_[0];
          const auto& [x1, y1] = knots_[1];
          return y0 + (x - x0) * (y1 - y0) / (x1 - x0);
        }
        if (x >= knots_.back().first) {
          const auto& [x0, y0] = knots_[knots_.size() - 2];
          const auto& [x1, y1] = knots_.back();
          return y1 + (x - x1) * (y1 - y0) / (x1 - x0);
        }
        for (std::size_t i = 1; i < knots_.size(); ++i) {
          if (x <= knots_[i].first) {
            const auto& [x0, y0] = knots_[i - 1];
            const auto& [x1, y1] = knots_[i];
            return y0 + (x - x0) * (y1 - y0) / (x1 - x0);
          }
        }
        return knots_.back().second;
      }
    }
    return x;
  }

 private:
  Transform(TransformKind kind, std::vector<std::pair<double, double>> knots)
      : kind_(kind), knots_(std::move(knots)) {}

  TransformKind kind_;
  std::vector<std::pair<double, double>> knots_;
};

class RiskMeasure;
double evaluate(const RiskMeasure& rm, const Position& f, const Market& m);

/// Immutable risk measure descriptor. Catalogue kinds carry a scalarization
/// weight w (required to lie in the interior of K0, which yields A1);
/// Custom carries an arbitrary evaluator and is meant for test fixtures.
class RiskMeasure {
 public:
  using CustomFn = std::function<double(const Position&, const Market&)>;

  static RiskMeasure linear_expected(std::vector<double> w) {
    RiskMeasure rm(RiskKind::LinearExpected, std::move(w));
    rm.closed_form_support_ = true;
    return rm;
  }

  static RiskMeasure worst_case(std::vector<double> w) {
    RiskMeasure rm(RiskKind::WorstCase, std::move(w));
    rm.closed_form_support_ = true;
    return rm;
  }

  static RiskMeasure entropic(std::vector<double> w, double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("entropic: beta > 0");
    RiskMeasure rm(RiskKind::Entropic, std::move(w));
    rm.beta_ = beta;
    return rm;
  }

  /// Certainty equivalent u^{-1}(E[u(<w, f>)]) for the convex, strictly
  /// increasing utility u(x) = x + max(x, 0)^q with q >= 1. Convexity of u
  /// makes every sublevel set convex, so the measure is quasiconvex; it is
  /// not convex as a function for q > 1.
  static RiskMeasure certainty_equivalent(std::vector<double> w, double q) {
    if (!(q >= 1.0))
      throw std::invalid_argument("certainty_equivalent: q >= 1");
    RiskMeasure rm(RiskKind::CertaintyEquivalent, std::move(w));
    rm.q_ = q;
    return rm;
  }

  static RiskMeasure monotone_transform(Transform phi, RiskMeasure base) {
    RiskMeasure rm(RiskKind::MonotoneTransform, {});
    rm.phi_ = std::move(phi);
    rm.name_ = rm.phi_->name() + "(" + base.name() + ")";
    rm.base_ = std::make_shared<RiskMeasure>(std::move(base));
    return rm;
  }

  static RiskMeasure custom(std::string name, CustomFn fn) {
    RiskMeasure rm(RiskKind::Custom, {});
    rm.name_ = std::move(name);
    rm.custom_ = std::move(fn);
    return rm;
  }

  RiskKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  const std::vector<double>& weights() const { return weights_; }
  double beta() const { return beta_; }
  double utility_exponent() const { return q_; }
  const Transform& transform() const { return *phi_; }
  const RiskMeasure& base() const { return *base_; }
  const CustomFn& custom_fn() const { return custom_; }

  /// True when the support function of the acceptance sets has an exact
  /// analytic form (per-state and single half-space geometries).
  bool closed_form_support() const { return closed_form_support_; }

  /// The scalarization weight applicable to evaluation: for transforms this
  /// is the base measure's weight.
  const std::vector<double>& effective_weights() const {
    if (kind_ == RiskKind::MonotoneTransform) return base_->effective_weights();
    return weights_;
  }

 private:
  RiskMeasure(RiskKind kind, std::vector<double> w)
      : kind_(kind), name_(to_string(kind)), weights_(std::move(w)) {
    for (double v : weights_)
      if (!std::isfinite(v))
        throw std::invalid_argument("RiskMeasure: non-finite weight");
  }

  RiskKind kind_;
  std::string name_;
  std::vector<double> weights_;
  double beta_ = 0.0;
  double q_ = 0.0;
  std::optional<Transform> phi_;
  std::shared_ptr<const RiskMeasure> base_;
  CustomFn custom_;
  bool closed_form_support_ = false;
};

namespace detail {

inline double scalarize(const RiskMeasure& rm, const Position& f, int i) {
  const auto& w = rm.weights();
  double s = 0.0;
  for (int j = 0; j < f.dim(); ++j) s += w[static_cast<std::size_t>(j)] * f(i, j);
  return s;
}

inline double utility(double x, double q) {
  return x + (x > 0.0 ? std::pow(x, q) : 0.0);
}

/// Inverse of x + max(x,0)^q: identity for y <= 0, otherwise a bisection on
/// [0, y] (u(x) >= x pins the root there).
inline double utility_inverse(double y, double q) {
  if (y <= 0.0) return y;
  double lo = 0.0, hi = y;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (utility(mid, q) < y)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-15 * (1.0 + std::abs(y))) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// risk(f) per catalogue kind. Entropic uses a max-shifted log-sum-exp and
/// never produces NaN.
inline double evaluate(const RiskMeasure& rm, const Position& f,
                       const Market& m) {
  detail::require_shape(f, m.measure, "evaluate");
  if (f.dim() != m.dim())
    throw std::invalid_argument("evaluate: dimension mismatch");
  const int n = m.states();
  const double total = m.measure.total_mass();

  switch (rm.kind()) {
    case RiskKind::LinearExpected: {
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        acc += m.measure.weight(i) * detail::scalarize(rm, f, i);
      return acc / total;
    }
    case RiskKind::WorstCase: {
      double best = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i)
        best = std::max(best, detail::scalarize(rm, f, i));
      return best;
    }
    case RiskKind::Entropic: {
      const double beta = rm.beta();
      double shift = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i)
        shift = std::max(shift, beta * detail::scalarize(rm, f, i));
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        acc += (m.measure.weight(i) / total) *
               std::exp(beta * detail::scalarize(rm, f, i) - shift);
      return (shift + std::log(acc)) / beta;
    }
    case RiskKind::CertaintyEquivalent: {
      const double q = rm.utility_exponent();
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        acc += (m.measure.weight(i) / total) *
               detail::utility(detail::scalarize(rm, f, i), q);
      return detail::utility_inverse(acc, q);
    }
    case RiskKind::MonotoneTransform:
      return rm.transform()(evaluate(rm.base(), f, m));
    case RiskKind::Custom:
      return rm.custom_fn()(f, m);
  }
  throw std::logic_error("evaluate: unknown kind");
}

/// Semantic diagnostics for a measure against a cone; empty means valid.
inline std::vector<std::string> validate_measure(const RiskMeasure& rm,
                                                 const ConeSpace& cone) {
  std::vector<std::string> diags;
  if (rm.kind() == RiskKind::MonotoneTransform)
    return validate_measure(rm.base(), cone);
  if (rm.kind() == RiskKind::Custom) return diags;

  const auto& w = rm.weights();
  if (static_cast<int>(w.size()) != cone.dim()) {
    diags.push_back("scalarization weight has wrong dimension");
    return diags;
  }
  for (const auto& k : cone.generators()) {
    double norm_k = detail::euclidean_norm(k);
    if (norm_k == 0.0) continue;
    if (detail::dot(w, k) <= 1e-12 * norm_k) {
      diags.push_back("scalarization not in interior of dual cone");
      break;
    }
  }
  if (rm.kind() == RiskKind::Entropic && !(rm.beta() > 0.0))
    diags.push_back("entropic temperature must be positive");
  if (rm.kind() == RiskKind::CertaintyEquivalent &&
      !(rm.utility_exponent() >= 1.0))
    diags.push_back("utility exponent must be >= 1");
  return diags;
}

struct AxiomViolation {
  Position f1;
  Position f2;
  double lambda = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
};

/// Outcome of a sampled axiom or property check. worst_violation is the
/// largest positive excess seen; a handful of witnesses is kept for
/// diagnosis.
struct AxiomReport {
  long trials = 0;
  long violations = 0;
  double worst_violation = 0.0;
  std::vector<AxiomViolation> witnesses;

  static constexpr std::size_t kMaxWitnesses = 8;

  bool passed() const { return violations == 0; }

  void record(double excess, AxiomViolation witness) {
    ++violations;
    worst_violation = std::max(worst_violation, excess);
    if (witnesses.size() < kMaxWitnesses)
      witnesses.push_back(std::move(witness));
  }
};

/// A1 sampled: f2 = f1 + (statewise nonnegative combination of generators),
/// so f1 <=_K f2 by construction; flags risk(f1) > risk(f2) + tol.
inline AxiomReport check_monotonicity(const RiskMeasure& rm, const Market& m,
                                      long trials, std::uint64_t seed,
                                      double tol = 1e-9) {
  if (trials < 1) throw std::invalid_argument("check_monotonicity: trials >= 1");
  Rng rng(Rng::mix(seed, 0xA1));
  AxiomReport report;
  report.trials = trials;
  for (long t = 0; t < trials; ++t) {
    const Position f1 = sample_position(rng, m.states(), m.dim(), 2.0);
    const Position f2 =
        f1 + sample_cone_element(rng, m.cone, m.states(), rng.uniform(0.0, 2.0));
    const double v1 = evaluate(rm, f1, m);
    const double v2 = evaluate(rm, f2, m);
    if (v1 > v2 + tol) report.record(v1 - v2, {f1, f2, 0.0, v1, v2});
  }
  return report;
}

/// A2 sampled: flags risk(l f1 + (1-l) f2) > max(risk(f1), risk(f2)) + tol.
inline AxiomReport check_quasiconvexity(const RiskMeasure& rm, const Market& m,
                                        long trials, std::uint64_t seed,
                                        double tol = 1e-9) {
  if (trials < 1)
    throw std::invalid_argument("check_quasiconvexity: trials >= 1");
  Rng rng(Rng::mix(seed, 0xA2));
  AxiomReport report;
  report.trials = trials;
  for (long t = 0; t < trials; ++t) {
    const Position f1 = sample_position(rng, m.states(), m.dim(), 2.0);
    const Position f2 = sample_position(rng, m.states(), m.dim(), 2.0);
    const double lambda = rng.uniform();
    const Position mid = lambda * f1 + (1.0 - lambda) * f2;
    const double vm = evaluate(rm, mid, m);
    const double cap = std::max(evaluate(rm, f1, m), evaluate(rm, f2, m));
    if (vm > cap + tol) report.record(vm - cap, {f1, f2, lambda, vm, cap});
  }
  return report;
}

}  // namespace vexrisk
