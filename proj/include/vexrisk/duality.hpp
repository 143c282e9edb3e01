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
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vexrisk/acceptance.hpp"
#include "vexrisk/risk_measures.hpp"
#include "vexrisk/sampling.hpp"
#include "vexrisk/space.hpp"

/// The risk function
///
///   R(f, g) = inf { nu : <g, f> <= sigma_nu(g) }
///
/// computed by bisection on the level (the predicate is monotone because
/// nu -> sigma_nu(g) is nondecreasing), and the dual representation
///
///   risk(f) = sup over admissible g of R(f, g),
///
/// approximated by multi-start search over K0-valued densities normalized
/// in the dual Luxemburg norm. The bisected value never exceeds the direct
/// evaluation, so weak duality holds by construction; closing the gap is
/// the optimizer's job.
namespace vexrisk {

struct RiskFunctionValue {
  double value = 0.0;
  double bracket_lo = 0.0;  // infeasible side (when finite)
  double bracket_hi = 0.0;  // feasible side
  int iterations = 0;
  long evaluations = 0;
};

/// Members of acceptance sets found during feasibility probes. An entry
/// (x, rho(x)) certifies every level nu >= rho(x) jointly with every target
/// <h, x> reaches, for any density h, so pools are shared freely across
/// probes, bisections and candidate duals over the same measure.
class WitnessPool {
 public:
  struct Entry {
    Position x;
    double risk;
  };

  explicit WitnessPool(std::size_t cap = 128) : cap_(cap) {}

  void add(Position x, double risk) {
    if (entries_.size() < cap_) {
      entries_.push_back({std::move(x), risk});
    } else {
      entries_[next_] = {std::move(x), risk};
      next_ = (next_ + 1) % cap_;
    }
  }

  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
  std::size_t cap_;
  std::size_t next_ = 0;
};

struct RiskFunctionOptions {
  /// Backend for the support-function feasibility tests; unset picks
  /// ClosedForm when the measure has one and Numeric otherwise.
  std::optional<SupportMethod> method;
  double tol = 1e-8;
  long sigma_budget = 240;   // numeric evaluations per feasibility probe
  long grid_budget = 20000;  // lattice points per probe (Grid backend)
  double grid_radius = 0.0;
  double floor_scale = 1e6;  // lower bracket floor: hi - scale * (1 + |hi|)
  WitnessPool* pool = nullptr;
  std::uint64_t seed = 0x11;
};

inline RiskFunctionValue risk_function(const RiskMeasure& rm,
                                       const Position& f, const DualDensity& h,
                                       const Market& m,
                                       const RiskFunctionOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw std::invalid_argument("risk_function: tol > 0");
  if (!in_dual_cone(h, m.cone, 1e-9 * (1.0 + h.max_abs())))
    throw std::domain_error("risk_function: density is not admissible");

  RiskFunctionValue out;
  long evals = 0;
  const double primal = [&] {
    ++evals;
    return evaluate(rm, f, m);
  }();

  const double neg_inf = -std::numeric_limits<double>::infinity();
  if (h.is_zero()) {
    // <0, f> <= sigma_nu(0) = 0 holds at every level of a nonempty set.
    out.value = neg_inf;
    out.bracket_lo = neg_inf;
    out.bracket_hi = primal;
    out.evaluations = evals;
    return out;
  }

  // The feasibility predicate is invariant under positive scaling of h, so
  // normalize once in the dual Luxemburg norm; this also gives the penalty
  // schedule in the numeric backend a fixed scale to work against.
  const double dual_norm =
      luxemburg_norm(h, m.exponent.conjugate(), m.measure, 1e-12);
  const DualDensity hn = (1.0 / dual_norm) * h;
  const double target = pairing(hn, f, m.measure);
  const double pair_slack = 1e-9 * (1.0 + std::abs(target));

  const SupportMethod method =
      opt.method.value_or(rm.closed_form_support() ? SupportMethod::ClosedForm
                                                   : SupportMethod::Numeric);

  WitnessPool scratch;
  WitnessPool* pool = opt.pool ? opt.pool : &scratch;
  pool->add(f, primal);

  // Closed-form sigma is linear in the level with a fixed slope; compute the
  // shape once.
  detail::LinearSigma cf;
  if (method == SupportMethod::ClosedForm)
    cf = detail::closed_form_sigma_shape(rm, hn, m.measure);

  std::uint64_t probe = 0;
  const auto feasible_at = [&](double nu) -> bool {
    ++probe;
    switch (method) {
      case SupportMethod::ClosedForm:
        if (!cf.finite) return true;  // sigma = +infinity
        return target <= cf.slope * nu + pair_slack;
      case SupportMethod::Grid: {
        AcceptanceSet a{rm, nu};
        SupportOptions sopt;
        sopt.method = SupportMethod::Grid;
        sopt.budget = opt.grid_budget;
        sopt.tol = opt.tol;
        sopt.grid_radius = opt.grid_radius;
        const SupportValue sv = support_grid(a, hn, m, sopt);
        evals += sv.evaluations;
        if (sv.status == SupportStatus::MinusInfinity) return false;
        return target <= sv.value + pair_slack;
      }
      case SupportMethod::Numeric: {
        const double member_slack = opt.tol * (1.0 + std::abs(nu));
        std::vector<Position> seeds;
        for (const auto& e : pool->entries()) {
          if (e.risk > nu + member_slack) continue;
          if (pairing(hn, e.x, m.measure) >= target - pair_slack) return true;
          if (seeds.size() < 6) seeds.push_back(e.x);
        }
        AcceptanceSet a{rm, nu};
        SupportOptions sopt;
        sopt.method = SupportMethod::Numeric;
        sopt.budget = opt.sigma_budget;
        sopt.tol = opt.tol;
        sopt.target = target - 0.5 * pair_slack;
        sopt.seeds = &seeds;
        sopt.seed = Rng::mix(opt.seed, probe);
        const SupportValue sv = support_numeric(a, hn, m, sopt);
        evals += sv.evaluations;
        if (sv.status == SupportStatus::PlusInfinity) return true;
        if (sv.status == SupportStatus::MinusInfinity) return false;
        if (sv.maximizer)
          pool->add(*sv.maximizer, std::isfinite(sv.maximizer_risk)
                                       ? sv.maximizer_risk
                                       : nu);
        return sv.value >= target - pair_slack;
      }
    }
    return false;
  };

  // Upper bracket: f itself certifies the level risk(f); tiny numeric slack
  // is absorbed by nudging upward before giving up.
  double hi = primal;
  {
    bool ok = feasible_at(hi);
    double nudge = std::max(opt.tol, 1e-12 * (1.0 + std::abs(hi)));
    for (int k = 0; !ok && k < 3; ++k) {
      hi += nudge;
      nudge *= 10.0;
      ok = feasible_at(hi);
    }
    if (!ok)
      throw std::logic_error(
          "risk_function: upper bracket infeasible; support backend broken");
  }

  const double floor = hi - opt.floor_scale * (1.0 + std::abs(hi));
  double step = std::max(4.0 * opt.tol, 0.0625 * (1.0 + std::abs(hi)));
  double lo = hi - step;
  bool unbounded_below = false;
  while (true) {
    ++out.iterations;
    if (lo < floor) {
      if (feasible_at(floor)) {
        unbounded_below = true;
      } else {
        lo = floor;
      }
      break;
    }
    if (!feasible_at(lo)) break;
    hi = lo;
    step *= 2.0;
    lo = hi - step;
  }

  if (unbounded_below) {
    out.value = neg_inf;
    out.bracket_lo = neg_inf;
    out.bracket_hi = hi;
    out.evaluations = evals;
    return out;
  }

  while (hi - lo > opt.tol && out.iterations < 400) {
    ++out.iterations;
    const double mid = 0.5 * (lo + hi);
    if (feasible_at(mid))
      hi = mid;
    else
      lo = mid;
  }

  out.value = hi;
  out.bracket_lo = lo;
  out.bracket_hi = hi;
  out.evaluations = evals;
  return out;
}

/// Exact level reconstruction risk(f) = inf { nu : f in A_nu }, computed by
/// bisection on the membership predicate rather than by reading off the
/// evaluation, as a numerical cross-check of the identity.
inline double sublevel_reconstruction(const RiskMeasure& rm, const Position& f,
                                      const Market& m, double tol = 1e-9) {
  if (!(tol > 0.0))
    throw std::invalid_argument("sublevel_reconstruction: tol > 0");
  const auto member = [&](double nu) {
    return is_acceptable(AcceptanceSet{rm, nu}, f, m);
  };

  double lo = -1.0, hi = 1.0;
  while (!member(hi)) {
    lo = hi;
    hi = hi * 2.0 + 1.0;
    if (hi > 1e15)
      throw std::domain_error("sublevel_reconstruction: no finite level");
  }
  while (member(lo)) {
    hi = lo;
    lo = lo * 2.0 - 1.0;
    if (lo < -1e15)
      throw std::domain_error("sublevel_reconstruction: level unbounded below");
  }
  // member(hi), !member(lo)
  for (int it = 0; it < 300 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (member(mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

struct DualRepresentationResult {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  DualDensity best_dual;
  int starts = 0;
  long evaluations = 0;
  /// (evaluations used, best dual value) recorded at every improvement.
  std::vector<std::pair<long, double>> trace;
};

namespace detail {

/// Least-squares fit of a vector by a nonnegative combination of the dual
/// generators (projected gradient); exact in one step for the orthant.
inline std::vector<double> nonneg_fit(const std::vector<std::vector<double>>& gens,
                                      std::span<const double> v) {
  const std::size_t mgen = gens.size();
  const std::size_t d = v.size();
  std::vector<double> alpha(mgen, 0.0);
  double lipschitz = 0.0;
  for (const auto& g : gens) {
    double gg = 0.0;
    for (double x : g) gg += x * x;
    lipschitz += gg;
  }
  if (lipschitz <= 0.0) return alpha;
  const double step = 1.0 / lipschitz;
  std::vector<double> resid(d);
  for (int it = 0; it < 80; ++it) {
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < mgen; ++r) acc += alpha[r] * gens[r][j];
      resid[j] = acc - v[j];
    }
    for (std::size_t r = 0; r < mgen; ++r) {
      double grad = 0.0;
      for (std::size_t j = 0; j < d; ++j) grad += gens[r][j] * resid[j];
      alpha[r] = std::max(0.0, alpha[r] - step * grad);
    }
  }
  return alpha;
}

}  // namespace detail

struct DualRepOptions {
  long budget = 2000;
  std::uint64_t seed = 0;
  double tol = 1e-8;
};

/// Approximates sup over admissible densities of R(f, .) within an
/// evaluation budget: a deterministic slate of structured candidates
/// (finite-difference supporting direction, uniform and state-concentrated
/// densities, random admissible draws) followed by coordinate refinement of
/// the best coefficient matrix. Candidates are normalized, and R never
/// exceeds the direct evaluation, so gap >= 0 up to bisection tolerance.
inline DualRepresentationResult dual_representation(const RiskMeasure& rm,
                                                    const Position& f,
                                                    const Market& m,
                                                    const DualRepOptions& opt) {
  if (opt.budget < 10)
    throw std::invalid_argument("dual_representation: budget >= 10");
  const int n = m.states(), d = m.dim();
  const auto& dual_gens = m.cone.dual_generators();
  const std::size_t mgen = dual_gens.size();

  DualRepresentationResult out;
  long evals = 0;
  out.primal = evaluate(rm, f, m);
  ++evals;

  WitnessPool pool;
  pool.add(f, out.primal);

  out.dual = -std::numeric_limits<double>::infinity();
  out.best_dual = DualDensity(n, d);

  // Coefficient matrices over the dual generators keep every candidate
  // admissible by construction.
  const auto density_from = [&](const std::vector<double>& alpha) {
    DualDensity h(n, d);
    for (int i = 0; i < n; ++i)
      for (std::size_t r = 0; r < mgen; ++r) {
        const double c = alpha[static_cast<std::size_t>(i) * mgen + r];
        for (int j = 0; j < d; ++j)
          h(i, j) += c * dual_gens[r][static_cast<std::size_t>(j)];
      }
    return h;
  };

  const bool closed = rm.closed_form_support();
  const long sigma_budget =
      closed ? 0 : std::clamp<long>(opt.budget / 25, 40, 400);

  std::uint64_t candidate_counter = 0;
  const auto try_candidate = [&](const std::vector<double>& alpha) -> bool {
    ++candidate_counter;
    const DualDensity h = density_from(alpha);
    if (h.is_zero()) return false;
    RiskFunctionOptions ro;
    ro.tol = opt.tol;
    ro.sigma_budget = sigma_budget;
    ro.pool = &pool;
    ro.seed = Rng::mix(opt.seed, candidate_counter);
    const RiskFunctionValue rv = risk_function(rm, f, h, m, ro);
    evals += rv.evaluations;
    ++out.starts;
    if (rv.value > out.dual) {
      out.dual = rv.value;
      const double nrm = luxemburg_norm(h, m.exponent.conjugate(), m.measure,
                                        1e-12);
      out.best_dual = (1.0 / nrm) * h;
      out.trace.emplace_back(evals, out.dual);
      return true;
    }
    return false;
  };

  std::vector<std::vector<double>> slate;
  const std::size_t asize = static_cast<std::size_t>(n) * mgen;

  // Supporting direction at f from central differences of the risk.
  if (opt.budget > 4 * n * d + 20) {
    Position probe = f;
    std::vector<double> alpha(asize, 0.0);
    bool usable = false;
    for (int i = 0; i < n; ++i) {
      std::vector<double> grad(static_cast<std::size_t>(d));
      for (int j = 0; j < d; ++j) {
        const double delta = 1e-5 * (1.0 + std::abs(f(i, j)));
        probe(i, j) = f(i, j) + delta;
        const double up = evaluate(rm, probe, m);
        probe(i, j) = f(i, j) - delta;
        const double dn = evaluate(rm, probe, m);
        probe(i, j) = f(i, j);
        evals += 2;
        grad[static_cast<std::size_t>(j)] =
            (up - dn) / (2.0 * delta) / m.measure.weight(i);
      }
      const auto fit = detail::nonneg_fit(dual_gens, grad);
      for (std::size_t r = 0; r < mgen; ++r) {
        alpha[static_cast<std::size_t>(i) * mgen + r] = fit[r];
        if (fit[r] > 0.0) usable = true;
      }
    }
    if (usable) slate.push_back(std::move(alpha));
  }

  // Scalarization-aligned shapes: w everywhere and w concentrated on each
  // state (the half-space and worst-state geometries).
  if (rm.kind() != RiskKind::Custom) {
    const auto& w = rm.effective_weights();
    const auto w_fit = detail::nonneg_fit(dual_gens, w);
    bool nonzero = std::any_of(w_fit.begin(), w_fit.end(),
                               [](double c) { return c > 0.0; });
    if (nonzero) {
      std::vector<double> all(asize, 0.0);
      for (int i = 0; i < n; ++i)
        for (std::size_t r = 0; r < mgen; ++r)
          all[static_cast<std::size_t>(i) * mgen + r] = w_fit[r];
      slate.push_back(all);
      for (int i = 0; i < n; ++i) {
        std::vector<double> one(asize, 0.0);
        for (std::size_t r = 0; r < mgen; ++r)
          one[static_cast<std::size_t>(i) * mgen + r] = w_fit[r];
        slate.push_back(std::move(one));
      }
    }
  }

  // Uniform over dual generators, then random admissible draws.
  slate.push_back(std::vector<double>(asize, 1.0));
  Rng rng(Rng::mix(opt.seed, 0xD0));
  const int n_random = 4 + n;
  for (int k = 0; k < n_random; ++k) {
    std::vector<double> alpha(asize, 0.0);
    for (std::size_t a = 0; a < asize; ++a)
      if (rng.uniform() < 0.7) alpha[a] = std::abs(rng.normal());
    slate.push_back(std::move(alpha));
  }

  std::vector<double> best_alpha;
  const long reserve = opt.budget / 3;
  for (const auto& alpha : slate) {
    if (evals >= opt.budget - reserve && !best_alpha.empty()) break;
    if (evals >= opt.budget) break;
    if (try_candidate(alpha) || best_alpha.empty()) best_alpha = alpha;
  }

  // Coordinate refinement of the best coefficient matrix with shrinking
  // steps; keeps admissibility by clamping at zero.
  if (!best_alpha.empty()) {
    double mean = 0.0;
    for (double a : best_alpha) mean += a;
    mean = mean / static_cast<double>(asize) + 0.1;
    double gamma = 0.5;
    while (gamma > 0.02 && evals < opt.budget) {
      bool improved = false;
      for (std::size_t kcoord = 0; kcoord < asize && evals < opt.budget;
           ++kcoord) {
        for (double dir : {+1.0, -1.0}) {
          std::vector<double> alpha = best_alpha;
          alpha[kcoord] = std::max(0.0, alpha[kcoord] + dir * gamma * mean);
          if (alpha == best_alpha) continue;
          if (try_candidate(alpha)) {
            best_alpha = std::move(alpha);
            improved = true;
            break;
          }
        }
      }
      if (!improved) gamma *= 0.5;
    }
  }

  out.gap = out.primal - out.dual;
  out.evaluations = evals;
  if (!(out.gap >= -10.0 * opt.tol))
    throw std::logic_error("dual_representation: weak duality violated");
  return out;
}

struct RiskClassReport {
  AxiomReport monotone;      // B1
  AxiomReport quasiconvex;   // B2
  AxiomReport lsc_surrogate; // B3 (sampled liminf)
  bool passed() const {
    return monotone.passed() && quasiconvex.passed() &&
           lsc_surrogate.passed();
  }
};

/// Sampled verification that the bisected risk function lies in the risk
/// function class: monotone and quasiconvex in the position, plus a
/// finite-sequence lower-semicontinuity surrogate. A shared witness pool
/// keeps the three evaluations per sample consistent, which is what makes
/// the comparisons meaningful at numeric backends.
inline RiskClassReport check_risk_function_class(const RiskMeasure& rm,
                                                 const Market& m, long trials,
                                                 std::uint64_t seed,
                                                 double tol = 1e-6) {
  if (trials < 1)
    throw std::invalid_argument("check_risk_function_class: trials >= 1");
  RiskClassReport report;
  WitnessPool pool;
  RiskFunctionOptions ro;
  ro.tol = tol;
  ro.pool = &pool;

  Rng rng(Rng::mix(seed, 0xB1B2));
  const auto rf = [&](const Position& f, const DualDensity& h,
                      std::uint64_t tag) {
    ro.seed = Rng::mix(seed, tag);
    return risk_function(rm, f, h, m, ro).value;
  };

  report.monotone.trials = trials;
  report.quasiconvex.trials = trials;
  for (long t = 0; t < trials; ++t) {
    {
      const Position f1 = sample_position(rng, m.states(), m.dim(), 2.0);
      const Position f2 =
          f1 + sample_cone_element(rng, m.cone, m.states(), rng.uniform(0.0, 2.0));
      const DualDensity h = sample_dual_density(rng, m.cone, m.states());
      // f2 first: its witnesses certify every level f1 needs.
      const double r2 = rf(f2, h, 2 * static_cast<std::uint64_t>(t) + 1);
      const double r1 = rf(f1, h, 2 * static_cast<std::uint64_t>(t));
      if (r1 > r2 + 2.0 * tol)
        report.monotone.record(r1 - r2, {f1, f2, 0.0, r1, r2});
    }
    {
      const Position f1 = sample_position(rng, m.states(), m.dim(), 2.0);
      const Position f2 = sample_position(rng, m.states(), m.dim(), 2.0);
      const DualDensity h = sample_dual_density(rng, m.cone, m.states());
      const double lambda = rng.uniform();
      const Position mid = lambda * f1 + (1.0 - lambda) * f2;
      const double r1 = rf(f1, h, 1000003 + 3 * static_cast<std::uint64_t>(t));
      const double r2 = rf(f2, h, 1000004 + 3 * static_cast<std::uint64_t>(t));
      const double rmid =
          rf(mid, h, 1000005 + 3 * static_cast<std::uint64_t>(t));
      const double cap = std::max(r1, r2);
      if (rmid > cap + 2.0 * tol)
        report.quasiconvex.record(rmid - cap, {f1, f2, lambda, rmid, cap});
    }
  }

  const long sequences = std::min<long>(trials, 20);
  report.lsc_surrogate.trials = sequences;
  for (long s = 0; s < sequences; ++s) {
    const Position f = sample_position(rng, m.states(), m.dim(), 2.0);
    const DualDensity h = sample_dual_density(rng, m.cone, m.states());
    Position u = sample_position(rng, m.states(), m.dim(), 1.0);
    const double norm = std::max(u.max_abs(), 1e-12);
    u *= 1.0 / norm;
    const double r0 = rf(f, h, 5000001 + 31 * static_cast<std::uint64_t>(s));
    double liminf = std::numeric_limits<double>::infinity();
    for (int k = 8; k <= 10; ++k) {
      const Position fk = f + std::ldexp(1.0, -k) * u;
      liminf = std::min(
          liminf, rf(fk, h, 5005001 + 31 * static_cast<std::uint64_t>(s) +
                                static_cast<std::uint64_t>(k)));
    }
    if (liminf < r0 - 10.0 * tol)
      report.lsc_surrogate.record(r0 - liminf, {f, f, 0.0, liminf, r0});
  }
  return report;
}

}  // namespace vexrisk
