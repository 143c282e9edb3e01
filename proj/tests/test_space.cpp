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

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "vexrisk/rng.hpp"
#include "vexrisk/sampling.hpp"
#include "vexrisk/space.hpp"

using Catch::Approx;
using namespace vexrisk;

namespace {

Market make_market(std::vector<double> mu, std::vector<double> p, int d = 1) {
  return Market(MeasureSpace(std::move(mu)), ExponentFunction(std::move(p)),
                ConeSpace::positive_orthant(d));
}

// Independent scalar root finder: solves g(lambda) = 0 for strictly
// decreasing g by plain interval halving. Used to pin expected Luxemburg
// norms without going through the library path.
double scalar_root(const std::function<double(double)>& g, double lo,
                   double hi) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("measure space invariants") {
  CHECK_THROWS_AS(MeasureSpace({}), std::invalid_argument);
  CHECK_THROWS_AS(MeasureSpace({0.5, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(MeasureSpace({0.5, -1.0}), std::invalid_argument);

  const MeasureSpace prob({0.5, 0.5});
  CHECK(prob.is_probability());
  CHECK(prob.total_mass() == Approx(1.0));

  const MeasureSpace lumpy({0.2, 1.7, 3.0});
  CHECK_FALSE(lumpy.is_probability());
  CHECK(lumpy.total_mass() == Approx(4.9));
}

TEST_CASE("conjugate exponents") {
  CHECK(conjugate_exponent({2.0})[0] == Approx(2.0));
  CHECK(conjugate_exponent({3.0})[0] == Approx(1.5));
  CHECK(conjugate_exponent({1.25})[0] == Approx(5.0));

  CHECK_THROWS_AS(conjugate_exponent({1.0}), std::domain_error);
  CHECK_THROWS_AS(conjugate_exponent({0.5}), std::domain_error);
  CHECK_THROWS_AS(conjugate_exponent({101.0}), std::domain_error);
  CHECK_NOTHROW(conjugate_exponent({101.0}, 120.0));

  Rng rng(7);
  for (int t = 0; t < 200; ++t) {
    const double p = rng.uniform(1.0 + 1e-6, 100.0);
    const double pc = conjugate_exponent({p})[0];
    CHECK(std::abs(1.0 / p + 1.0 / pc - 1.0) <= 1e-12);
  }

  const ExponentFunction ef({2.0, 4.0});
  const ExponentFunction dual = ef.conjugate();
  CHECK(dual.p(0) == Approx(2.0));
  CHECK(dual.p(1) == Approx(4.0 / 3.0));
}

TEST_CASE("cone space construction and defaults") {
  const ConeSpace orthant = ConeSpace::positive_orthant(2);
  CHECK(orthant.generators().size() == 2);
  CHECK(orthant.facets().size() == 2);
  CHECK(orthant.dual_generators().size() == 2);

  // A generator violating a facet must be rejected.
  CHECK_THROWS_AS(ConeSpace(2, {{1.0, -1.0}}, {{0.0, 1.0}}, {{1.0, 0.0}}),
                  std::invalid_argument);
  // A dual generator pairing negatively with a generator must be rejected.
  CHECK_THROWS_AS(ConeSpace(2, {{1.0, 0.0}}, {{1.0, 0.0}}, {{-1.0, 0.0}}),
                  std::invalid_argument);

  // Ice-cream-ish polyhedral cone in 2d: x >= 0, x >= y >= -x is not convex
  // as written; use the proper wedge {y >= 0, x - y >= 0}.
  const ConeSpace wedge(2, {{1.0, 0.0}, {1.0, 1.0}},
                        {{0.0, 1.0}, {1.0, -1.0}},
                        {{0.0, 1.0}, {1.0, -1.0}});
  CHECK(wedge.dim() == 2);
}

TEST_CASE("state fields") {
  Position f = Position::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  CHECK(f.states() == 2);
  CHECK(f.dim() == 2);
  CHECK(f(1, 0) == Approx(3.0));
  CHECK(f.state_norm(0) == Approx(std::sqrt(5.0)));

  CHECK_THROWS_AS(Position::from_flat(2, 2, {1.0, 2.0}),
                  std::invalid_argument);
  const Position g = Position::column({1.0, 2.0});
  CHECK_THROWS_AS(f += g, std::invalid_argument);

  Position h = 2.0 * g;
  CHECK(h(1, 0) == Approx(4.0));
  CHECK_FALSE(h.is_zero());
  CHECK(Position(3, 2).is_zero());
}

TEST_CASE("market shape consistency") {
  CHECK_THROWS_AS(Market(MeasureSpace({1.0, 1.0}), ExponentFunction({2.0}),
                         ConeSpace::positive_orthant(1)),
                  std::invalid_argument);
}

TEST_CASE("modular examples") {
  const Market m = make_market({0.5, 0.5}, {2.0, 3.0});

  CHECK(modular(Position(2, 1), m.exponent, m.measure) == 0.0);

  // probability weights, unit-norm states: the modular is the total mass.
  CHECK(modular(Position::column({1.0, 1.0}), m.exponent, m.measure) ==
        Approx(1.0));
  CHECK(modular(Position::column({1.0, -1.0}), m.exponent, m.measure) ==
        Approx(1.0));

  // 0.5 * 2^2 + 0.5 * 1^3
  CHECK(modular(Position::column({2.0, 1.0}), m.exponent, m.measure) ==
        Approx(2.5));

  CHECK_THROWS_AS(modular(Position(3, 1), m.exponent, m.measure),
                  std::invalid_argument);
}

TEST_CASE("modular monotone in statewise norms") {
  const Market m = make_market({0.3, 0.9, 1.1}, {2.0, 5.0, 1.5}, 2);
  Rng rng(21);
  for (int t = 0; t < 100; ++t) {
    const Position f = sample_position(rng, 3, 2, 2.0);
    Position g = f;
    for (int i = 0; i < 3; ++i) {
      const double blow = rng.uniform(1.0, 3.0);
      for (int j = 0; j < 2; ++j) g(i, j) *= blow;
    }
    CHECK(modular(f, m.exponent, m.measure) <=
          modular(g, m.exponent, m.measure) + 1e-12);
  }
}

TEST_CASE("luxemburg norm examples") {
  const Market m = make_market({0.5, 0.5}, {2.0, 2.0});

  CHECK(luxemburg_norm(Position(2, 1), m.exponent, m.measure) == 0.0);
  CHECK(luxemburg_norm(Position::column({1.0, 1.0}), m.exponent, m.measure) ==
        Approx(1.0));

  // Independent check: 0.5 (2/l)^2 + 0.5 (2/l)^2 = 1 has root l = 2.
  const double expected = scalar_root(
      [](double l) { return 0.5 * std::pow(2.0 / l, 2.0) * 2.0 - 1.0; }, 0.1,
      10.0);
  REQUIRE(expected == Approx(2.0).epsilon(1e-10));
  CHECK(luxemburg_norm(Position::column({2.0, 2.0}), m.exponent, m.measure) ==
        Approx(2.0).epsilon(1e-9));

  // Mixed exponents against the same scalar root finder.
  const Market mm = make_market({0.25, 0.75}, {2.0, 3.0});
  const Position f = Position::column({3.0, -1.0});
  const double root = scalar_root(
      [](double l) {
        return 0.25 * std::pow(3.0 / l, 2.0) + 0.75 * std::pow(1.0 / l, 3.0) -
               1.0;
      },
      0.1, 50.0);
  CHECK(luxemburg_norm(f, mm.exponent, mm.measure) ==
        Approx(root).epsilon(1e-8));

  Position bad = Position::column({1.0, 2.0});
  bad(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(luxemburg_norm(bad, m.exponent, m.measure),
                  std::domain_error);
}

TEST_CASE("luxemburg norm properties") {
  const Market m = make_market({0.4, 0.8, 0.3}, {1.7, 2.0, 6.0}, 2);
  const double tol = 1e-10;
  Rng rng(99);

  SECTION("unit modular identity") {
    for (int t = 0; t < 100; ++t) {
      const Position f = sample_position(rng, 3, 2, rng.uniform(0.1, 10.0));
      if (f.is_zero()) continue;
      const double norm = luxemburg_norm(f, m.exponent, m.measure, tol);
      const Position unit = (1.0 / norm) * f;
      CHECK(std::abs(modular(unit, m.exponent, m.measure) - 1.0) <= 10 * tol);
    }
  }

  SECTION("absolute homogeneity") {
    for (int t = 0; t < 100; ++t) {
      const Position f = sample_position(rng, 3, 2, 1.5);
      const double a = rng.uniform(-10.0, 10.0);
      const double lhs = luxemburg_norm(a * f, m.exponent, m.measure, tol);
      const double rhs =
          std::abs(a) * luxemburg_norm(f, m.exponent, m.measure, tol);
      CHECK(std::abs(lhs - rhs) <= 10 * tol * (1.0 + rhs));
    }
  }

  SECTION("triangle inequality") {
    for (int t = 0; t < 100; ++t) {
      const Position f = sample_position(rng, 3, 2, 2.0);
      const Position g = sample_position(rng, 3, 2, 2.0);
      const double sum = luxemburg_norm(f + g, m.exponent, m.measure, tol);
      const double parts = luxemburg_norm(f, m.exponent, m.measure, tol) +
                           luxemburg_norm(g, m.exponent, m.measure, tol);
      CHECK(sum <= parts + 10 * tol);
    }
  }
}

TEST_CASE("pairing examples and bilinearity") {
  const Market m = make_market({0.5, 0.5}, {2.0, 2.0});

  CHECK(pairing(DualDensity(2, 1), Position::column({1.0, 3.0}), m.measure) ==
        0.0);
  CHECK(pairing(DualDensity::column({1.0, 1.0}), Position(2, 1), m.measure) ==
        0.0);
  CHECK(pairing(DualDensity::column({1.0, 1.0}), Position::column({1.0, 3.0}),
                m.measure) == Approx(2.0));

  const MeasureSpace one({1.0});
  CHECK(pairing(DualDensity::from_rows({{1.0, 2.0}}),
                Position::from_rows({{3.0, 4.0}}),
                one) == Approx(11.0));

  CHECK_THROWS_AS(pairing(DualDensity(3, 1), Position(2, 1), m.measure),
                  std::invalid_argument);
  CHECK_THROWS_AS(pairing(DualDensity(2, 2), Position(2, 1), m.measure),
                  std::invalid_argument);

  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const DualDensity h1 = sample_dual_density(rng, m.cone, 2, 2.0);
    const DualDensity h2 = sample_dual_density(rng, m.cone, 2, 2.0);
    const Position f = sample_position(rng, 2, 1, 2.0);
    const double a = rng.uniform(-3.0, 3.0);
    const double b = rng.uniform(-3.0, 3.0);
    const double lhs = pairing(a * h1 + b * h2, f, m.measure);
    const double rhs =
        a * pairing(h1, f, m.measure) + b * pairing(h2, f, m.measure);
    CHECK(lhs == Approx(rhs).margin(1e-10));
  }
}

TEST_CASE("holder type bound with constant 2") {
  const Market m = make_market({0.2, 0.5, 0.3, 0.9}, {1.5, 2.0, 3.0, 8.0});
  const ExponentFunction dual = m.exponent.conjugate();
  Rng rng(31);
  for (int t = 0; t < 100; ++t) {
    const Position f = sample_position(rng, 4, 1, rng.uniform(0.1, 5.0));
    DualDensity h(4, 1);
    for (int i = 0; i < 4; ++i) h(i, 0) = rng.normal() * 2.0;
    const double lhs = std::abs(pairing(h, f, m.measure));
    const double rhs = 2.0 * luxemburg_norm(f, m.exponent, m.measure) *
                       luxemburg_norm(h, dual, m.measure);
    CHECK(lhs <= rhs + 1e-12);
  }
}

TEST_CASE("dual cone membership") {
  const ConeSpace orthant = ConeSpace::positive_orthant(2);

  CHECK(in_dual_cone(DualDensity::from_rows({{1.0, 0.5}, {0.0, 2.0}}), orthant,
                     0.0));
  CHECK_FALSE(
      in_dual_cone(DualDensity::from_rows({{1.0, -0.5}}), orthant, 0.0));
  CHECK(in_dual_cone(DualDensity(3, 2), orthant, 0.0));
  CHECK(in_dual_cone(DualDensity::from_rows({{1.0, -1e-12}}), orthant, 1e-9));
}

TEST_CASE("cone order") {
  const ConeSpace line = ConeSpace::positive_orthant(1);

  const Position f = Position::column({0.0, 0.0});
  CHECK(cone_leq(f, f, line, 0.0));
  CHECK(cone_leq(f, Position::column({1.0, 2.0}), line, 0.0));
  CHECK_FALSE(
      cone_leq(Position::column({0.0, 3.0}), Position::column({1.0, 2.0}),
               line, 0.0));

  // transitivity on sampled triples
  Rng rng(13);
  const ConeSpace orthant = ConeSpace::positive_orthant(3);
  for (int t = 0; t < 50; ++t) {
    const Position a = sample_position(rng, 2, 3, 1.0);
    const Position b = a + sample_cone_element(rng, orthant, 2, 1.0);
    const Position c = b + sample_cone_element(rng, orthant, 2, 1.0);
    CHECK(cone_leq(a, b, orthant, 1e-12));
    CHECK(cone_leq(b, c, orthant, 1e-12));
    CHECK(cone_leq(a, c, orthant, 1e-12));
  }
}
