#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ccup/prob.hpp"
#include "ccup/rng.hpp"
#include "ccup/transport.hpp"

namespace ccup {

enum class VerdictKind { kConverged, kDiverged, kLimitCycle };

struct Verdict {
  VerdictKind kind = VerdictKind::kDiverged;
  int t_star = -1;  // convergence step (kConverged)
  int period = 0;   // detected period (kLimitCycle)
};

struct TraceStep {
  int t = 0;
  std::string state_label;    // set for label-valued dynamics
  std::vector<double> state;  // embedded state / probability vector
  double objective = std::numeric_limits<double>::quiet_NaN();
  double cond_entropy = std::numeric_limits<double>::quiet_NaN();
  double kl_step = std::numeric_limits<double>::quiet_NaN();
  double variance = std::numeric_limits<double>::quiet_NaN();
};

struct InferenceTrace {
  std::vector<TraceStep> steps;
  Verdict verdict;
};

struct ConvergenceThresholds {
  double state_tol = 1e-9;      // per-step state delta
  int persistence = 10;         // consecutive small deltas required
  double variance_cut = 1e-8;   // delta diagnostics
  double kl_cut = 1e-10;        // delta diagnostics
  double divergence_norm = 1e9; // early divergence cut on the state norm
};

using StateUpdate = std::function<std::vector<double>(const std::vector<double>&)>;

// Generic bootstrapped iteration V_{t+1} = F(V_t) with verdict detection:
// converged (small deltas persist), diverged (norm blow-up or max_t), or
// limit_cycle (autocorrelation peak at lag 2..8 over the tail).
InferenceTrace bootstrap_iterate(const StateUpdate& F, const std::vector<double>& v0,
                                 int max_t, double tol,
                                 const ConvergenceThresholds& thresholds = {});

struct ContractionEstimate {
  double gamma_hat = 0.0;
  int sample_pairs = 0;
};

using DomainSampler = std::function<std::vector<double>(Rng&)>;

// Sampled supremum of ||F(x1)-F(x2)|| / ||x1-x2|| over n_pairs seeded pairs.
// Coincident pairs are skipped.
ContractionEstimate contraction_estimate(const StateUpdate& F,
                                         const DomainSampler& sampler, int n_pairs,
                                         std::uint64_t seed);

// Closed-form Gibbs step for the proximal objective
//   argmin_Psi [ sum_s Psi(s) H(Phi|S=s) + lambda KL(Psi || psi) ]:
//   Psi'(s) proportional to psi(s) exp(-H(Phi|S=s) / lambda).
Dist temporal_update(const Dist& psi, const std::vector<double>& per_structure_entropy,
                     double lambda);

// Iterated temporal updates with full diagnostics. The variance column uses
// the given embedding (defaults to the symbol index on the real line).
InferenceTrace run_temporal(const Dist& init, const std::vector<double>& per_structure_entropy,
                            double lambda, int max_t,
                            const ConvergenceThresholds& thresholds = {},
                            const std::map<std::string, std::vector<double>>* embedding = nullptr);

enum class ProximalKind { kKlProx, kOtProx };

struct UpdateSpec {
  double lambda = 0.5;
  ProximalKind regularizer = ProximalKind::kOtProx;
  std::optional<CostMatrix> cost;  // required for kOtProx
  // Proximal solves run many small transport problems on near-degenerate
  // marginals whose L1 residual floors around 1e-8 in double precision, so
  // the tolerance is looser than the generic solver default.
  SinkhornOptions sinkhorn_opts{.reg = 0.05, .tol = 1e-7, .max_iter = 200000};
};

// Exact argmin over the candidate set of
//   H(Psi|Phi) + lambda * D(p(Psi|Phi), p(Psi|Phi_t)),
// ties broken toward the lowest index. KL candidates violating absolute
// continuity are excluded (treated as +inf).
std::size_t inverted_update(std::size_t phi_t, const Kernel& psi_kernel,
                            const UpdateSpec& spec);

// The stationary objective value for a candidate against the current state.
double inverted_objective(std::size_t candidate, std::size_t phi_t,
                          const Kernel& psi_kernel, const UpdateSpec& spec);

InferenceTrace run_inverted(std::size_t phi_0, const Kernel& psi_kernel,
                            const UpdateSpec& spec, int max_t);

struct HalfCycleResult {
  std::size_t phi_next = 0;
  Dist psi_prediction;   // exposed for prediction-error metrics
  Dist phi_posterior;    // composed distribution over content
};

// One half-cycle-right sweep Phi -> Z -> Psi_hat -> Z_hat -> Phi'. Expected
// mode composes the kernels exactly; passing an Rng samples each stage.
HalfCycleResult half_cycle_step(std::size_t phi_t, const Kernel& pz_given_phi,
                                const Kernel& ppsi_given_z, const Kernel& qz_given_psi,
                                const Kernel& qphi_given_z, Rng* rng = nullptr);

struct DeltaDiagnostics {
  bool converged = false;
  double final_variance = 0.0;
  bool entropy_monotone = true;
  std::optional<int> period;
};

DeltaDiagnostics delta_diagnostics(const InferenceTrace& trace,
                                   const ConvergenceThresholds& thresholds = {});

struct SbsResult {
  std::size_t phi_star = 0;
  std::vector<Dist> bindings;  // per-context posterior over candidates
};

// Structure-before-Specificity: stage 1 picks the candidate minimizing the
// average cross-entropy of the contexts; stage 2 binds each context to a
// posterior over candidates (uniform prior over the candidate set).
SbsResult sbs_two_stage(const std::vector<Dist>& contexts, const Kernel& psi_kernel);

// Factored context world for the dimensionality benchmark: contexts are D
// independent bits given the latent, so one half-cycle step costs
// O(k*|Z| + |Z|*D) while exact conditional entropies need a 2^D sweep.
class FactoredHalfCycle {
 public:
  FactoredHalfCycle(std::vector<double> pz_phi, std::vector<double> bit_prob,
                    std::size_t n_content, std::size_t n_latent, std::size_t n_bits);

  std::size_t n_content() const { return k_; }
  std::size_t n_bits() const { return d_; }

  // Mean-field half cycle: predicted per-bit marginals, naive-Bayes latent
  // posterior, then content argmax. Never touches the 2^D context space.
  std::size_t step(std::size_t phi) const;

  // Exact H(Psi | Phi = phi) by full enumeration of all 2^D contexts.
  double exhaustive_conditional_entropy(std::size_t phi) const;

 private:
  std::size_t k_, z_, d_;
  std::vector<double> pz_phi_;   // k x Z
  std::vector<double> bit_;      // Z x D, P(bit=1 | z)
  std::vector<double> qphi_z_;   // Z x k, Bayes inversion under uniform content
};

}  // namespace ccup
