#pragma once

#include <vector>

#include "ccup/prob.hpp"

namespace ccup {

// Nonnegative finite ground costs over row_alphabet x col_alphabet.
class CostMatrix {
 public:
  CostMatrix(Alphabet row_alphabet, Alphabet col_alphabet, std::vector<double> costs);

  // Off-diagonal 1, diagonal 0 (square).
  static CostMatrix zero_one(const Alphabet& a);
  // |x - y|_1 over per-label coordinate embeddings.
  static CostMatrix grid_l1(const Alphabet& a,
                            const std::map<std::string, std::vector<double>>& coords);

  const Alphabet& row_alphabet() const { return rows_; }
  const Alphabet& col_alphabet() const { return cols_; }
  double c(std::size_t r, std::size_t c) const { return costs_[r * cols_.size() + c]; }
  const std::vector<double>& costs() const { return costs_; }

 private:
  Alphabet rows_, cols_;
  std::vector<double> costs_;
};

struct TransportPlan {
  std::vector<double> plan;  // row-major, rows = source alphabet
  std::size_t n_rows = 0, n_cols = 0;
  double cost = 0.0;
  double reg_strength = 0.0;
  int iterations_used = 0;
  double marginal_residual = 0.0;        // final L1 marginal error
  std::vector<double> residual_history;  // one entry per Sinkhorn iteration

  double at(std::size_t r, std::size_t c) const { return plan[r * n_cols + c]; }
};

struct SinkhornOptions {
  double reg = 0.05;
  double tol = 1e-9;
  int max_iter = 10000;
  // When false, hitting max_iter returns the best plan instead of throwing.
  bool throw_on_nonconvergence = true;
};

// Log-domain (stabilized) Sinkhorn. Terminates when the L1 marginal error
// drops below opts.tol; throws TransportNonConvergence at max_iter.
TransportPlan sinkhorn(const Dist& mu, const Dist& nu, const CostMatrix& c,
                       const SinkhornOptions& opts = {});

// Exact optimal transport via successive-shortest-path min-cost flow over
// integer-scaled masses. Desk-scale oracle: alphabets up to 32 symbols.
TransportPlan exact_ot(const Dist& mu, const Dist& nu, const CostMatrix& c);

// Sinkhorn cost between two Dists on the same alphabet with a square cost.
double ot_divergence(const Dist& p, const Dist& q, const CostMatrix& c,
                     const SinkhornOptions& opts = {});

}  // namespace ccup
