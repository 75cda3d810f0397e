#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>

#include "ccup/rng.hpp"
#include "ccup/transport.hpp"

using namespace ccup;

namespace {

// Independent 3x3 oracle: enumerate the basic feasible solutions of the
// transport polytope (5-cell bases) by direct linear solves.
double brute_force_ot_3x3(const std::vector<double>& mu, const std::vector<double>& nu,
                          const CostMatrix& cost) {
  double best = std::numeric_limits<double>::infinity();
  std::array<int, 9> cells;
  for (int i = 0; i < 9; ++i) cells[i] = i;
  std::vector<int> basis(5);
  std::function<void(int, int)> choose = [&](int from, int depth) {
    if (depth == 5) {
      // Solve the 6x5 marginal system restricted to the basis by least
      // squares via normal-equation-free Gaussian elimination on 6 rows.
      double A[6][6] = {};  // 5 unknowns + rhs
      for (int r = 0; r < 6; ++r) {
        for (int k = 0; k < 5; ++k) {
          const int i = basis[k] / 3, j = basis[k] % 3;
          A[r][k] = (r < 3) ? (i == r ? 1.0 : 0.0) : (j == r - 3 ? 1.0 : 0.0);
        }
        A[r][5] = r < 3 ? mu[r] : nu[r - 3];
      }
      int rank = 0;
      for (int col = 0; col < 5 && rank < 6; ++col) {
        int pivot = -1;
        for (int r = rank; r < 6; ++r) {
          if (std::abs(A[r][col]) > 1e-12) { pivot = r; break; }
        }
        if (pivot < 0) return;  // rank-deficient basis
        std::swap_ranges(A[pivot], A[pivot] + 6, A[rank]);
        for (int r = 0; r < 6; ++r) {
          if (r == rank) continue;
          const double f = A[r][col] / A[rank][col];
          for (int k = col; k < 6; ++k) A[r][k] -= f * A[rank][k];
        }
        ++rank;
      }
      for (int r = rank; r < 6; ++r) {
        if (std::abs(A[r][5]) > 1e-9) return;  // inconsistent
      }
      double x[5];
      for (int k = 0; k < 5; ++k) x[k] = A[k][5] / A[k][k];
      double total = 0.0;
      for (int k = 0; k < 5; ++k) {
        if (x[k] < -1e-10) return;  // infeasible vertex
        total += x[k] * cost.c(basis[k] / 3, basis[k] % 3);
      }
      best = std::min(best, total);
      return;
    }
    for (int i = from; i < 9; ++i) {
      basis[depth] = i;
      choose(i + 1, depth + 1);
    }
  };
  choose(0, 0);
  return best;
}

}  // namespace

TEST_CASE("sinkhorn basics") {
  const Alphabet a = Alphabet::indexed(3);
  const CostMatrix zo = CostMatrix::zero_one(a);
  Rng rng(5);
  const Dist mu(a, rng.simplex(3));

  SUBCASE("identical marginals stay near the diagonal") {
    SinkhornOptions opts;
    opts.reg = 0.01;
    opts.max_iter = 100000;
    const TransportPlan plan = sinkhorn(mu, mu, zo, opts);
    CHECK(plan.cost < 0.01);
    CHECK(plan.marginal_residual < 1e-9);
    for (std::size_t i = 0; i < 3; ++i) CHECK(plan.at(i, i) > 0.9 * mu.p(i));
  }
  SUBCASE("forced mass move costs the full unit") {
    const Alphabet b = Alphabet::indexed(2);
    const Dist p(b, {1.0, 0.0}), q(b, {0.0, 1.0});
    const TransportPlan plan = sinkhorn(p, q, CostMatrix::zero_one(b), {0.05, 1e-9, 20000});
    CHECK(plan.cost == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("marginal feasibility on seeded instances") {
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 2 + rng.index(5);
      const Alphabet an = Alphabet::indexed(n);
      const Dist p(an, rng.simplex(n)), q(an, rng.simplex(n));
      const TransportPlan plan = sinkhorn(p, q, CostMatrix::zero_one(an));
      for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0, col = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          row += plan.at(i, j);
          col += plan.at(j, i);
        }
        CHECK(row == doctest::Approx(p.p(i)).epsilon(1e-6));
        CHECK(col == doctest::Approx(q.p(i)).epsilon(1e-6));
      }
      // The tracked residual shrinks to the tolerance by the final sweep.
      REQUIRE(!plan.residual_history.empty());
      CHECK(plan.residual_history.back() < 1e-9);
    }
  }
  SUBCASE("nonconvergence throws with the residual attached") {
    const Dist p(a, rng.simplex(3)), q(a, rng.simplex(3));
    SinkhornOptions opts;
    opts.reg = 0.01;
    opts.max_iter = 2;
    CHECK_THROWS_AS(sinkhorn(p, q, zo, opts), TransportNonConvergence);
  }
}

TEST_CASE("exact transport") {
  const Alphabet a = Alphabet::indexed(3);
  Rng rng(9);

  SUBCASE("identity instance costs nothing") {
    const Dist mu(a, rng.simplex(3));
    CHECK(exact_ot(mu, mu, CostMatrix::zero_one(a)).cost ==
          doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("symmetric 2x2 with uniform marginals") {
    const Alphabet b = Alphabet::indexed(2);
    const Dist u = Dist::uniform(b);
    CHECK(exact_ot(u, u, CostMatrix(b, b, {0, 1, 1, 0})).cost ==
          doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("matches vertex enumeration on seeded 3x3 instances") {
    for (int trial = 0; trial < 25; ++trial) {
      const std::vector<double> mu = rng.simplex(3), nu = rng.simplex(3);
      std::vector<double> costs(9);
      for (double& c : costs) c = rng.uniform(0.0, 3.0);
      const CostMatrix cost(a, a, costs);
      const double oracle = brute_force_ot_3x3(mu, nu, cost);
      const TransportPlan plan = exact_ot(Dist(a, mu), Dist(a, nu), cost);
      CHECK(plan.cost == doctest::Approx(oracle).epsilon(1e-6));
    }
  }
  SUBCASE("fixed rational instance") {
    const Dist mu(a, {0.5, 0.3, 0.2}), nu(a, {0.2, 0.5, 0.3});
    const CostMatrix cost(a, a, {0, 1, 2, 1, 0, 1, 2, 1, 0});
    CHECK(exact_ot(mu, nu, cost).cost == doctest::Approx(0.4).epsilon(1e-7));
    SinkhornOptions opts;
    opts.reg = 0.01;
    opts.max_iter = 200000;
    opts.tol = 1e-8;
    CHECK(std::abs(sinkhorn(mu, nu, cost, opts).cost - 0.4) < 0.02);
  }
  SUBCASE("oversized instances are rejected") {
    const Alphabet big = Alphabet::indexed(33);
    const Dist u = Dist::uniform(big);
    CHECK_THROWS_AS(exact_ot(u, u, CostMatrix::zero_one(big)), InstanceTooLarge);
  }
}

TEST_CASE("ot_divergence") {
  const Alphabet a = Alphabet::indexed(2);
  const CostMatrix zo = CostMatrix::zero_one(a);
  Rng rng(13);
  SUBCASE("identity is near zero") {
    const Dist p(a, rng.simplex(2));
    SinkhornOptions opts;
    opts.reg = 0.01;
    opts.max_iter = 100000;
    CHECK(ot_divergence(p, p, zo, opts) < 1e-6);
  }
  SUBCASE("disjoint point masses cost one") {
    const Dist p = Dist::point_mass(a, 0), q = Dist::point_mass(a, 1);
    CHECK(ot_divergence(p, q, zo, {0.05, 1e-9, 20000}) ==
          doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("0/1 cost recovers total variation up to the entropic bias") {
    const Dist p(a, {0.7, 0.3}), q(a, {0.3, 0.7});
    SinkhornOptions opts;
    opts.reg = 0.01;
    opts.max_iter = 200000;
    opts.tol = 1e-8;
    CHECK(std::abs(ot_divergence(p, q, zo, opts) - 0.4) <= 0.02);
  }
  SUBCASE("symmetry in the arguments") {
    const Dist p(a, rng.simplex(2)), q(a, rng.simplex(2));
    CHECK(ot_divergence(p, q, zo) == doctest::Approx(ot_divergence(q, p, zo)).epsilon(1e-6));
  }
}

TEST_CASE("entropic bias is bounded against the exact cost") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + rng.index(4);
    const Alphabet a = Alphabet::indexed(n);
    const Dist p(a, rng.simplex(n)), q(a, rng.simplex(n));
    const CostMatrix zo = CostMatrix::zero_one(a);
    SinkhornOptions opts;
    opts.reg = 0.01;
    opts.max_iter = 300000;
    opts.tol = 1e-8;
    const double approx = sinkhorn(p, q, zo, opts).cost;
    const double exact = exact_ot(p, q, zo).cost;
    CHECK(std::abs(approx - exact) <= 0.02);
    CHECK(approx >= exact - 1e-6);  // entropic plans never beat the optimum
  }
}
