#pragma once

#include <optional>
#include <vector>

#include "ccup/prob.hpp"

namespace ccup {

struct IBSolution {
  Kernel encoder;            // source -> Z
  double compression = 0.0;  // I(source; Z) nats
  double relevance = 0.0;    // I(Z; target) nats
  double beta = 0.0;
  int iterations = 0;
  std::vector<double> objective_history;  // I(X;Z) - beta * I(Z;Y) per iteration
};

struct IBOptions {
  int max_iter = 10000;
  double tol = 1e-10;         // stop when |objective delta| drops below this
  std::uint64_t init_seed = 0;  // used when no explicit init kernel is given
  bool throw_on_nonconvergence = true;
};

// Self-consistent IB equations solved by alternating encoder / marginal /
// decoder updates. Minimizes I(X;Z) - beta * I(Z;Y) for the given joint
// p(X, Y) with X = rows.
IBSolution ib_fixed_point(const Joint& joint, std::size_t z_size, double beta,
                          const std::optional<Kernel>& init = std::nullopt,
                          const IBOptions& opts = {});

struct BetaGrid {
  double beta_min = 1e-3;
  double beta_max = 1e3;
  int points = 24;  // geometric spacing

  std::vector<double> values() const;
};

// Sweeps the beta grid and returns the minimum-compression solution whose
// relevance reaches the floor. Throws Infeasible when no grid point does.
IBSolution constrained_ib(const Joint& joint, std::size_t z_size,
                          double relevance_floor, const BetaGrid& grid = {},
                          const IBOptions& opts = {});

// E_{psi ~ psi_dist}[ E_{q(z|psi)}[-log p(psi|z)] + KL(q(.|psi) || prior(.|phi)) ].
// Upper-bounds -E[log p(psi | phi)] under the generative chain prior, likelihood.
double variational_free_energy(const Kernel& recognition, const Kernel& likelihood,
                               const Kernel& prior, std::size_t phi,
                               const Dist& psi_dist);

}  // namespace ccup
