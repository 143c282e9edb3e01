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
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

/// Finite-dimensional variable exponent space: a finite state set with
/// strictly positive weights, a per-state exponent p_i in (1, p_max], an
/// ordering cone on the value space R^d, the modular and its Luxemburg
/// norm, and the duality pairing <g, f> = sum_i mu_i <h_i, f_i>.
namespace vexrisk {

inline constexpr double kDefaultMaxExponent = 100.0;
inline constexpr double kConjugateIdentityTol = 1e-12;
inline constexpr double kProbabilityTol = 1e-12;

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

inline double euclidean_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

inline bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace detail

/// Finite state set with strictly positive weights. The total mass need not
/// be 1; whether it is gets recorded, not enforced.
class MeasureSpace {
 public:
  explicit MeasureSpace(std::vector<double> weights)
      : weights_(std::move(weights)) {
    if (weights_.empty())
      throw std::invalid_argument("MeasureSpace: need at least one state");
    total_mass_ = 0.0;
    for (double w : weights_) {
      if (!(w > 0.0) || !std::isfinite(w))
        throw std::invalid_argument(
            "MeasureSpace: weights must be strictly positive and finite");
      total_mass_ += w;
    }
  }

  int states() const { return static_cast<int>(weights_.size()); }
  double weight(int i) const { return weights_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& weights() const { return weights_; }
  double total_mass() const { return total_mass_; }
  bool is_probability() const {
    return std::abs(total_mass_ - 1.0) <= kProbabilityTol;
  }

 private:
  std::vector<double> weights_;
  double total_mass_ = 0.0;
};

/// Statewise conjugate exponents: p'_i = p_i / (p_i - 1). Requires
/// 1 < p_i <= max_exponent; p_i = 1 is excluded so the dual side stays a
/// plain power modular.
inline std::vector<double> conjugate_exponent(
    const std::vector<double>& p, double max_exponent = kDefaultMaxExponent) {
  std::vector<double> conj(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!std::isfinite(p[i]) || p[i] <= 1.0 || p[i] > max_exponent)
      throw std::domain_error("conjugate_exponent: exponent must lie in (1, " +
                              std::to_string(max_exponent) + "], got " +
                              std::to_string(p[i]));
    conj[i] = p[i] / (p[i] - 1.0);
  }
  return conj;
}

/// Per-state exponent p(.) together with its conjugate p'(.).
class ExponentFunction {
 public:
  explicit ExponentFunction(std::vector<double> p,
                            double max_exponent = kDefaultMaxExponent)
      : p_(std::move(p)), conj_(conjugate_exponent(p_, max_exponent)) {
    for (std::size_t i = 0; i < p_.size(); ++i) {
      // 1/p + 1/p' = 1 must hold to high accuracy or the dual pairing drifts.
      const double defect = std::abs(1.0 / p_[i] + 1.0 / conj_[i] - 1.0);
      if (defect > kConjugateIdentityTol)
        throw std::domain_error("ExponentFunction: conjugate identity defect " +
                                std::to_string(defect));
    }
  }

  int size() const { return static_cast<int>(p_.size()); }
  double p(int i) const { return p_[static_cast<std::size_t>(i)]; }
  double conj(int i) const { return conj_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& p_values() const { return p_; }
  const std::vector<double>& conj_values() const { return conj_; }

  /// The exponent function of the dual space: roles of p and p' swapped.
  ExponentFunction conjugate() const {
    ExponentFunction out(*this);
    std::swap(out.p_, out.conj_);
    return out;
  }

 private:
  std::vector<double> p_;
  std::vector<double> conj_;
};

/// Ordering cone K on the value space E = R^d, given in both generator
/// (V) and facet (H) form, together with generators of the dual cone
/// K0 = { y : <y, k> >= 0 for all k in K }. The two representations are
/// cross-checked at construction; no conversion between them is attempted.
class ConeSpace {
 public:
  ConeSpace(int dim, std::vector<std::vector<double>> generators,
            std::vector<std::vector<double>> facets,
            std::vector<std::vector<double>> dual_generators,
            double consistency_tol = 1e-9)
      : dim_(dim),
        generators_(std::move(generators)),
        facets_(std::move(facets)),
        dual_generators_(std::move(dual_generators)) {
    if (dim_ < 1) throw std::invalid_argument("ConeSpace: dim must be >= 1");
    check_rows("generators", generators_);
    check_rows("facets", facets_);
    check_rows("dual_generators", dual_generators_);
    for (const auto& g : generators_)
      for (const auto& a : facets_)
        if (detail::dot(a, g) < -consistency_tol * scale(a, g))
          throw std::invalid_argument(
              "ConeSpace: generator violates a facet inequality");
    for (const auto& y : dual_generators_)
      for (const auto& g : generators_)
        if (detail::dot(y, g) < -consistency_tol * scale(y, g))
          throw std::invalid_argument(
              "ConeSpace: dual generator pairs negatively with a generator");
  }

  /// K = K0 = R^d_+, generators = facets = dual generators = standard basis.
  static ConeSpace positive_orthant(int dim) {
    std::vector<std::vector<double>> basis(
        static_cast<std::size_t>(dim),
        std::vector<double>(static_cast<std::size_t>(dim), 0.0));
    for (int j = 0; j < dim; ++j)
      basis[static_cast<std::size_t>(j)][static_cast<std::size_t>(j)] = 1.0;
    return ConeSpace(dim, basis, basis, basis);
  }

  int dim() const { return dim_; }
  const std::vector<std::vector<double>>& generators() const {
    return generators_;
  }
  const std::vector<std::vector<double>>& facets() const { return facets_; }
  const std::vector<std::vector<double>>& dual_generators() const {
    return dual_generators_;
  }

 private:
  static double scale(std::span<const double> a, std::span<const double> b) {
    return 1.0 + detail::euclidean_norm(a) * detail::euclidean_norm(b);
  }

  void check_rows(const char* what,
                  const std::vector<std::vector<double>>& rows) const {
    if (rows.empty())
      throw std::invalid_argument(std::string("ConeSpace: ") + what +
                                  " must be non-empty");
    for (const auto& r : rows) {
      if (static_cast<int>(r.size()) != dim_)
        throw std::invalid_argument(std::string("ConeSpace: ") + what +
                                    " row has wrong dimension");
      if (!detail::all_finite(r))
        throw std::invalid_argument(std::string("ConeSpace: ") + what +
                                    " row has non-finite entry");
    }
  }

  int dim_;
  std::vector<std::vector<double>> generators_;
  std::vector<std::vector<double>> facets_;
  std::vector<std::vector<double>> dual_generators_;
};

/// An n x d array of per-state vectors. The Tag makes positions and dual
/// densities distinct types even though the storage is identical.
template <class Tag>
class StateField {
 public:
  StateField() = default;
  StateField(int states, int dim, double fill = 0.0)
      : states_(states),
        dim_(dim),
        values_(static_cast<std::size_t>(states) * static_cast<std::size_t>(dim),
                fill) {
    if (states < 1 || dim < 1)
      throw std::invalid_argument("StateField: states and dim must be >= 1");
  }

  static StateField from_flat(int states, int dim, std::vector<double> values) {
    StateField out(states, dim);
    if (values.size() != out.values_.size())
      throw std::invalid_argument("StateField: flat size does not match shape");
    out.values_ = std::move(values);
    return out;
  }

  /// Convenience for d = 1 fields: one scalar per state.
  static StateField column(std::vector<double> values) {
    return from_flat(static_cast<int>(values.size()), 1, std::move(values));
  }

  static StateField from_rows(
      std::initializer_list<std::initializer_list<double>> rows) {
    const int n = static_cast<int>(rows.size());
    const int d = n > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    StateField out(n, d);
    int i = 0;
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != d)
        throw std::invalid_argument("StateField: ragged rows");
      int j = 0;
      for (double v : row) out(i, j++) = v;
      ++i;
    }
    return out;
  }

  int states() const { return states_; }
  int dim() const { return dim_; }

  double operator()(int i, int j) const {
    return values_[static_cast<std::size_t>(i) * dim_ + j];
  }
  double& operator()(int i, int j) {
    return values_[static_cast<std::size_t>(i) * dim_ + j];
  }

  std::span<const double> state(int i) const {
    return {values_.data() + static_cast<std::size_t>(i) * dim_,
            static_cast<std::size_t>(dim_)};
  }
  std::span<double> state(int i) {
    return {values_.data() + static_cast<std::size_t>(i) * dim_,
            static_cast<std::size_t>(dim_)};
  }

  const std::vector<double>& flat() const { return values_; }
  std::vector<double>& flat() { return values_; }

  double state_norm(int i) const { return detail::euclidean_norm(state(i)); }
  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }
  bool all_finite() const { return detail::all_finite(values_); }
  bool is_zero() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](double v) { return v == 0.0; });
  }

  StateField& operator+=(const StateField& other) {
    require_same_shape(other);
    for (std::size_t k = 0; k < values_.size(); ++k)
      values_[k] += other.values_[k];
    return *this;
  }
  StateField& operator-=(const StateField& other) {
    require_same_shape(other);
    for (std::size_t k = 0; k < values_.size(); ++k)
      values_[k] -= other.values_[k];
    return *this;
  }
  StateField& operator*=(double a) {
    for (double& v : values_) v *= a;
    return *this;
  }

  friend StateField operator+(StateField a, const StateField& b) {
    a += b;
    return a;
  }
  friend StateField operator-(StateField a, const StateField& b) {
    a -= b;
    return a;
  }
  friend StateField operator*(double a, StateField f) {
    f *= a;
    return f;
  }
  friend StateField operator*(StateField f, double a) {
    f *= a;
    return f;
  }

 private:
  void require_same_shape(const StateField& other) const {
    if (states_ != other.states_ || dim_ != other.dim_)
      throw std::invalid_argument("StateField: shape mismatch");
  }

  int states_ = 0;
  int dim_ = 0;
  std::vector<double> values_;
};

struct PositionTag {};
struct DensityTag {};

/// An element f of the primal space: one loss vector per state.
using Position = StateField<PositionTag>;
/// A density h = dg/dmu representing a continuous linear functional g.
using DualDensity = StateField<DensityTag>;

/// Everything a model instance needs: the measure, the exponents and the
/// ordering cone, with consistent shapes.
struct Market {
  MeasureSpace measure;
  ExponentFunction exponent;
  ConeSpace cone;

  Market(MeasureSpace m, ExponentFunction e, ConeSpace c)
      : measure(std::move(m)), exponent(std::move(e)), cone(std::move(c)) {
    if (exponent.size() != measure.states())
      throw std::invalid_argument(
          "Market: exponent function and measure disagree on state count");
  }

  int states() const { return measure.states(); }
  int dim() const { return cone.dim(); }
};

namespace detail {

template <class Tag>
void require_shape(const StateField<Tag>& f, const MeasureSpace& sp,
                   const char* who) {
  if (f.states() != sp.states())
    throw std::invalid_argument(std::string(who) +
                                ": field state count does not match measure");
}

}  // namespace detail

/// Modular rho(f) = sum_i mu_i ||f_i||^{p_i} with the Euclidean norm on R^d.
template <class Tag>
double modular(const StateField<Tag>& f, const ExponentFunction& p,
               const MeasureSpace& sp) {
  detail::require_shape(f, sp, "modular");
  if (p.size() != sp.states())
    throw std::invalid_argument("modular: exponent count mismatch");
  double acc = 0.0;
  for (int i = 0; i < sp.states(); ++i)
    acc += sp.weight(i) * std::pow(f.state_norm(i), p.p(i));
  return acc;
}

/// Luxemburg norm ||f|| = inf { lambda > 0 : rho(f / lambda) <= 1 }, found by
/// geometric bracketing and bisection on the strictly decreasing map
/// lambda -> rho(f / lambda). Because the exponent is bounded above, the
/// returned lambda satisfies the unit-modular identity |rho(f/lambda) - 1|
/// <= tol whenever f != 0.
template <class Tag>
double luxemburg_norm(const StateField<Tag>& f, const ExponentFunction& p,
                      const MeasureSpace& sp, double tol = 1e-10) {
  detail::require_shape(f, sp, "luxemburg_norm");
  if (!(tol > 0.0)) throw std::invalid_argument("luxemburg_norm: tol > 0");
  if (!f.all_finite())
    throw std::domain_error("luxemburg_norm: non-finite entries");
  if (f.is_zero()) return 0.0;

  const auto rho_at = [&](double lambda) {
    double acc = 0.0;
    for (int i = 0; i < sp.states(); ++i)
      acc += sp.weight(i) * std::pow(f.state_norm(i) / lambda, p.p(i));
    return acc;
  };

  double lo = 1.0, hi = 1.0;
  double r = rho_at(1.0);
  if (r > 1.0) {
    hi = 2.0;
    while (rho_at(hi) > 1.0) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e300) throw std::domain_error("luxemburg_norm: no bracket");
    }
  } else if (r < 1.0) {
    lo = 0.5;
    while (rho_at(lo) < 1.0) {
      hi = lo;
      lo *= 0.5;
      if (lo < 1e-300) throw std::domain_error("luxemburg_norm: no bracket");
    }
  } else {
    return 1.0;
  }

  // rho(f/lo) > 1 > rho(f/hi); bisect until the modular residual is small.
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 500; ++it) {
    mid = 0.5 * (lo + hi);
    const double rm = rho_at(mid);
    if (std::abs(rm - 1.0) <= tol) return mid;
    (rm > 1.0 ? lo : hi) = mid;
  }
  return mid;
}

/// Duality pairing <g, f> = sum_i mu_i <h_i, f_i> where h = dg/dmu.
inline double pairing(const DualDensity& h, const Position& f,
                      const MeasureSpace& sp) {
  detail::require_shape(h, sp, "pairing");
  detail::require_shape(f, sp, "pairing");
  if (h.dim() != f.dim())
    throw std::invalid_argument("pairing: dimension mismatch");
  double acc = 0.0;
  for (int i = 0; i < sp.states(); ++i)
    acc += sp.weight(i) * detail::dot(h.state(i), f.state(i));
  return acc;
}

/// Statewise membership of h in the dual cone K0, tested against the
/// generators of K: <h_i, k> >= -tol for every generator k and state i.
inline bool in_dual_cone(const DualDensity& h, const ConeSpace& cone,
                         double tol) {
  if (tol < 0.0) throw std::invalid_argument("in_dual_cone: tol >= 0");
  if (h.dim() != cone.dim())
    throw std::invalid_argument("in_dual_cone: dimension mismatch");
  for (int i = 0; i < h.states(); ++i)
    for (const auto& k : cone.generators())
      if (detail::dot(h.state(i), k) < -tol) return false;
  return true;
}

/// Cone order f1 <=_K f2: statewise f2_i - f1_i in K, tested via the facet
/// inequalities <A_r, f2_i - f1_i> >= -tol.
inline bool cone_leq(const Position& f1, const Position& f2,
                     const ConeSpace& cone, double tol) {
  if (f1.states() != f2.states() || f1.dim() != f2.dim())
    throw std::invalid_argument("cone_leq: shape mismatch");
  if (f1.dim() != cone.dim())
    throw std::invalid_argument("cone_leq: dimension mismatch");
  std::vector<double> diff(static_cast<std::size_t>(f1.dim()));
  for (int i = 0; i < f1.states(); ++i) {
    for (int j = 0; j < f1.dim(); ++j) diff[static_cast<std::size_t>(j)] =
        f2(i, j) - f1(i, j);
    for (const auto& a : cone.facets())
      if (detail::dot(a, diff) < -tol) return false;
  }
  return true;
}

}  // namespace vexrisk
