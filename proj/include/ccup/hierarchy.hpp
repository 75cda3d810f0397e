#pragma once

#include <vector>

#include "ccup/dynamics.hpp"
#include "ccup/prob.hpp"

namespace ccup {

// Deterministic composition of `arity` child labels into a parent label.
// The table is row-major over child index tuples (last child fastest).
struct LayerSpec {
  int level = 1;
  std::size_t arity = 1;
  Alphabet child_alphabet;
  Alphabet parent_alphabet;
  std::vector<std::size_t> compose_table;  // size |child|^arity

  double lambda_space = 1.0;
};

std::size_t compose_layer(const std::vector<std::size_t>& children, const LayerSpec& spec);

struct LayerEntropyCheck {
  double parent = 0.0;     // H(Psi_l | Phi_l)
  double child_sum = 0.0;  // sum_i H(Psi_{l-1}^i | Phi_{l-1}^i)
  bool satisfied = false;  // strict inequality parent < child_sum
};

// Both entropies are exact mixture conditional entropies E_phi[H(row)].
LayerEntropyCheck layer_entropy_check(
    const Dist& parent_phi, const Kernel& parent_context,
    const std::vector<std::pair<Dist, Kernel>>& children);

struct LevelState {
  Dist phi;               // content distribution at this level
  Kernel context;         // p(Psi | Phi)
  Kernel temporal_prior;  // p(Z_t | Phi)
  Kernel spatial_prior;   // p(Z_l | Phi)
};

struct LevelRecognition {
  Kernel temporal;  // q(Z_t | Psi)
  Kernel spatial;   // q(Z_l | Phi)
};

struct LossTerms {
  double cond_entropy = 0.0;
  double temporal_kl = 0.0;
  double spatial_kl = 0.0;
  double total(double lambda_temp, double lambda_space) const {
    return cond_entropy + lambda_temp * temporal_kl + lambda_space * spatial_kl;
  }
};

LossTerms level_loss(const LevelState& state, const LevelRecognition& recognition);

struct SpatiotemporalLoss {
  double total = 0.0;
  std::vector<std::vector<LossTerms>> terms;  // [time][level]
};

// Sum over time steps and levels of H(Psi|Phi) + lambda_temp KL + lambda_space KL.
// AbsoluteContinuityViolation reports the offending (t, level).
SpatiotemporalLoss spatiotemporal_loss(
    const std::vector<std::vector<std::pair<LevelState, LevelRecognition>>>& steps,
    double lambda_temp, double lambda_space);

// One node of the tower above the leaves: composes `spec.arity` consecutive
// nodes of the level below and carries its own context kernel.
struct HierarchyNode {
  LayerSpec spec;
  Kernel context;
  double epsilon_drift = 0.1;  // KL drift bound between successive conditionals
};

struct LeafInstance {
  Kernel context;  // p(Psi | Phi) over the leaf candidate set
  UpdateSpec update;
  std::size_t initial_state = 0;
};

struct HierarchyScenario {
  std::vector<LeafInstance> leaves;
  std::vector<std::vector<HierarchyNode>> upper_levels;  // level 2, 3, ...
};

struct HierarchicalRunResult {
  std::vector<InferenceTrace> leaf_traces;
  // [level][t] summed conditional entropy over nodes, level 0 = leaves.
  std::vector<std::vector<double>> level_entropy;
  // [level][node] final label index, level 0 = leaves.
  std::vector<std::vector<std::size_t>> fixed_points;
  // Levels whose KL drift between successive conditionals exceeded the bound.
  std::vector<int> kl_drift_exceeded;
};

// Runs inverted_update on every leaf each step, recomposing parents bottom-up
// and tracking per-level entropy sequences and KL drift. Drift violations are
// flagged; the run continues.
HierarchicalRunResult hierarchical_run(const HierarchyScenario& scenario, int T);

// Strict comparison of Corollary form: recursion iff H(Psi) > H_flat.
bool recursion_threshold(double context_entropy, double flat_budget);

// Minimum achievable E[H(Psi | code)] for a uniform context of n symbols
// under a single-layer deterministic code of at most `code_size` cells.
// Exhausts integer partitions; cell sizes are all that matter here.
double flat_code_residual(std::size_t n_contexts, std::size_t code_size);

}  // namespace ccup
