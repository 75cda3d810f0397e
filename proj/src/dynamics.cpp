#include "ccup/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ccup {

namespace {

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dist2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Autocorrelation peak over lags 2..8 on the mean-centered tail of a state
// series. Returns the lag when the tail oscillates with amplitude > 1e-3.
std::optional<int> detect_period(const std::vector<std::vector<double>>& states) {
  if (states.size() < 12) return std::nullopt;
  const std::size_t tail_len = std::min<std::size_t>(states.size(), 128);
  const std::size_t start = states.size() - tail_len;
  const std::size_t dim = states[0].size();

  std::vector<double> mean(dim, 0.0);
  for (std::size_t t = start; t < states.size(); ++t)
    for (std::size_t k = 0; k < dim; ++k) mean[k] += states[t][k];
  for (double& x : mean) x /= static_cast<double>(tail_len);

  double power = 0.0;
  for (std::size_t t = start; t < states.size(); ++t) {
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = states[t][k] - mean[k];
      power += d * d;
    }
  }
  const double amplitude = std::sqrt(power / static_cast<double>(tail_len));
  if (amplitude <= 1e-3) return std::nullopt;

  int best_lag = 0;
  double best_r = -2.0;
  for (int lag = 2; lag <= 8; ++lag) {
    if (static_cast<std::size_t>(lag) + 2 > tail_len) break;
    double acc = 0.0;
    for (std::size_t t = start; t + lag < states.size(); ++t) {
      for (std::size_t k = 0; k < dim; ++k) {
        acc += (states[t][k] - mean[k]) * (states[t + lag][k] - mean[k]);
      }
    }
    const double r = acc / power;
    if (r > best_r) {
      best_r = r;
      best_lag = lag;
    }
  }
  if (best_r > 0.1) return best_lag;
  return std::nullopt;
}

}  // namespace

InferenceTrace bootstrap_iterate(const StateUpdate& F, const std::vector<double>& v0,
                                 int max_t, double tol,
                                 const ConvergenceThresholds& thresholds) {
  InferenceTrace trace;
  std::vector<std::vector<double>> states{v0};
  trace.steps.push_back({0, "", v0, norm2(v0), {}, {}, {}});

  std::vector<double> v = v0;
  int consecutive = 0;
  for (int t = 1; t <= max_t; ++t) {
    std::vector<double> next = F(v);
    const double delta = dist2(next, v);
    v = std::move(next);
    states.push_back(v);
    TraceStep step;
    step.t = t;
    step.state = v;
    step.objective = norm2(v);
    step.kl_step = delta;
    trace.steps.push_back(std::move(step));

    if (norm2(v) > thresholds.divergence_norm) {
      trace.verdict = {VerdictKind::kDiverged, -1, 0};
      return trace;
    }
    consecutive = delta < tol ? consecutive + 1 : 0;
    if (consecutive >= thresholds.persistence) {
      trace.verdict = {VerdictKind::kConverged, t, 0};
      return trace;
    }
  }
  if (auto period = detect_period(states)) {
    trace.verdict = {VerdictKind::kLimitCycle, -1, *period};
  } else {
    trace.verdict = {VerdictKind::kDiverged, -1, 0};
  }
  return trace;
}

ContractionEstimate contraction_estimate(const StateUpdate& F,
                                         const DomainSampler& sampler, int n_pairs,
                                         std::uint64_t seed) {
  if (n_pairs < 100) {
    throw InvalidDistribution("contraction_estimate: need at least 100 pairs");
  }
  Rng rng(seed);
  double gamma = 0.0;
  int used = 0;
  for (int i = 0; i < n_pairs; ++i) {
    const std::vector<double> x1 = sampler(rng);
    const std::vector<double> x2 = sampler(rng);
    const double denom = dist2(x1, x2);
    if (denom == 0.0) continue;  // degenerate pair
    gamma = std::max(gamma, dist2(F(x1), F(x2)) / denom);
    ++used;
  }
  return {gamma, used};
}

Dist temporal_update(const Dist& psi, const std::vector<double>& per_structure_entropy,
                     double lambda) {
  if (per_structure_entropy.size() != psi.size()) {
    throw AlphabetMismatch("temporal_update: entropy vector length != alphabet size");
  }
  if (!(lambda > 0.0)) throw InvalidDistribution("temporal_update: lambda must be positive");
  // Shift by the minimum before exponentiating; the Gibbs weights are
  // invariant to it.
  const double h_min = *std::min_element(per_structure_entropy.begin(),
                                         per_structure_entropy.end());
  std::vector<double> next(psi.size(), 0.0);
  double total = 0.0;
  for (std::size_t s = 0; s < psi.size(); ++s) {
    next[s] = psi.p(s) * std::exp(-(per_structure_entropy[s] - h_min) / lambda);
    total += next[s];
  }
  for (double& x : next) x /= total;
  return Dist(psi.alphabet(), std::move(next));
}

InferenceTrace run_temporal(const Dist& init, const std::vector<double>& per_structure_entropy,
                            double lambda, int max_t,
                            const ConvergenceThresholds& thresholds,
                            const std::map<std::string, std::vector<double>>* embedding) {
  std::map<std::string, std::vector<double>> index_embedding;
  if (!embedding) {
    for (std::size_t i = 0; i < init.size(); ++i) {
      index_embedding[init.alphabet().label(i)] = {static_cast<double>(i)};
    }
    embedding = &index_embedding;
  }
  auto objective = [&](const Dist& d) {
    double o = 0.0;
    for (std::size_t s = 0; s < d.size(); ++s) o += d.p(s) * per_structure_entropy[s];
    return o;
  };

  InferenceTrace trace;
  Dist cur = init;
  trace.steps.push_back({0, "", cur.probs(), objective(cur), objective(cur),
                         std::numeric_limits<double>::quiet_NaN(),
                         dist_variance(cur, *embedding)});
  int consecutive = 0;
  for (int t = 1; t <= max_t; ++t) {
    Dist next = temporal_update(cur, per_structure_entropy, lambda);
    double kl_step;
    try {
      kl_step = kl_divergence(next, cur);
    } catch (const AbsoluteContinuityViolation&) {
      kl_step = std::numeric_limits<double>::infinity();
    }
    cur = std::move(next);
    trace.steps.push_back({t, "", cur.probs(), objective(cur), objective(cur), kl_step,
                           dist_variance(cur, *embedding)});
    consecutive = kl_step < thresholds.kl_cut ? consecutive + 1 : 0;
    if (consecutive >= thresholds.persistence &&
        trace.steps.back().variance < thresholds.variance_cut) {
      trace.verdict = {VerdictKind::kConverged, t, 0};
      return trace;
    }
  }
  trace.verdict = {VerdictKind::kDiverged, -1, 0};
  return trace;
}

double inverted_objective(std::size_t candidate, std::size_t phi_t,
                          const Kernel& psi_kernel, const UpdateSpec& spec) {
  const Dist row = psi_kernel.row(candidate);
  const Dist current = psi_kernel.row(phi_t);
  double prox;
  if (spec.regularizer == ProximalKind::kKlProx) {
    try {
      prox = kl_divergence(row, current);
    } catch (const AbsoluteContinuityViolation&) {
      return std::numeric_limits<double>::infinity();
    }
  } else {
    if (!spec.cost) throw InvalidDistribution("inverted_objective: OT proximal needs a cost");
    prox = ot_divergence(row, current, *spec.cost, spec.sinkhorn_opts);
  }
  return entropy(row) + spec.lambda * prox;
}

std::size_t inverted_update(std::size_t phi_t, const Kernel& psi_kernel,
                            const UpdateSpec& spec) {
  const std::size_t n = psi_kernel.from_alphabet().size();
  std::size_t best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < n; ++c) {
    const double val = inverted_objective(c, phi_t, psi_kernel, spec);
    if (val < best_val - 1e-15) {
      best_val = val;
      best = c;
    }
  }
  return best;
}

InferenceTrace run_inverted(std::size_t phi_0, const Kernel& psi_kernel,
                            const UpdateSpec& spec, int max_t) {
  InferenceTrace trace;
  std::size_t cur = phi_0;
  std::vector<std::size_t> visited{cur};
  auto record = [&](int t, std::size_t state, double objective) {
    TraceStep step;
    step.t = t;
    step.state_label = psi_kernel.from_alphabet().label(state);
    step.state = {static_cast<double>(state)};
    step.objective = objective;
    step.cond_entropy = entropy(psi_kernel.row(state));
    trace.steps.push_back(std::move(step));
  };
  record(0, cur, entropy(psi_kernel.row(cur)));
  for (int t = 1; t <= max_t; ++t) {
    const std::size_t next = inverted_update(cur, psi_kernel, spec);
    record(t, next, inverted_objective(next, cur, psi_kernel, spec));
    if (next == cur) {
      trace.verdict = {VerdictKind::kConverged, t, 0};
      return trace;
    }
    // Revisiting a non-fixed state on the deterministic map closes a cycle.
    for (std::size_t back = 0; back < visited.size(); ++back) {
      if (visited[back] == next) {
        trace.verdict = {VerdictKind::kLimitCycle, -1,
                         static_cast<int>(visited.size() - back)};
        return trace;
      }
    }
    visited.push_back(next);
    cur = next;
  }
  trace.verdict = {VerdictKind::kDiverged, -1, 0};
  return trace;
}

HalfCycleResult half_cycle_step(std::size_t phi_t, const Kernel& pz_given_phi,
                                const Kernel& ppsi_given_z, const Kernel& qz_given_psi,
                                const Kernel& qphi_given_z, Rng* rng) {
  if (pz_given_phi.to_alphabet() != ppsi_given_z.from_alphabet() ||
      ppsi_given_z.to_alphabet() != qz_given_psi.from_alphabet() ||
      qz_given_psi.to_alphabet() != qphi_given_z.from_alphabet() ||
      qphi_given_z.to_alphabet() != pz_given_phi.from_alphabet()) {
    throw AlphabetMismatch("half_cycle_step: kernel chain does not close");
  }
  if (rng) {
    auto draw = [&](const Dist& d) {
      double u = rng->uniform();
      for (std::size_t i = 0; i < d.size(); ++i) {
        u -= d.p(i);
        if (u <= 0.0) return i;
      }
      return d.size() - 1;
    };
    const std::size_t z = draw(pz_given_phi.row(phi_t));
    const std::size_t psi = draw(ppsi_given_z.row(z));
    const std::size_t z_hat = draw(qz_given_psi.row(psi));
    const std::size_t phi_next = draw(qphi_given_z.row(z_hat));
    return {phi_next, ppsi_given_z.row(z),
            Dist::point_mass(qphi_given_z.to_alphabet(), phi_next)};
  }
  const Dist z = pz_given_phi.row(phi_t);
  const Dist psi_hat = pushforward(z, ppsi_given_z);
  const Dist z_hat = pushforward(psi_hat, qz_given_psi);
  const Dist phi_dist = pushforward(z_hat, qphi_given_z);
  return {phi_dist.argmax(), psi_hat, phi_dist};
}

DeltaDiagnostics delta_diagnostics(const InferenceTrace& trace,
                                   const ConvergenceThresholds& thresholds) {
  if (trace.steps.empty()) {
    throw InvalidDistribution("delta_diagnostics: empty trace");
  }
  DeltaDiagnostics out;
  out.final_variance = trace.steps.back().variance;
  if (std::isnan(out.final_variance)) out.final_variance = 0.0;

  bool kl_quiet = trace.steps.size() > 1;
  const std::size_t n = trace.steps.size();
  const std::size_t window = std::min<std::size_t>(10, n - (n > 0 ? 1 : 0));
  for (std::size_t i = n - window; i < n; ++i) {
    const double kl = trace.steps[i].kl_step;
    if (!std::isnan(kl) && kl >= thresholds.kl_cut) kl_quiet = false;
  }
  out.converged = out.final_variance < thresholds.variance_cut && kl_quiet;

  double prev = std::numeric_limits<double>::quiet_NaN();
  for (const auto& step : trace.steps) {
    if (!std::isnan(step.cond_entropy)) {
      if (!std::isnan(prev) && step.cond_entropy > prev + 1e-12) out.entropy_monotone = false;
      prev = step.cond_entropy;
    }
  }

  std::vector<std::vector<double>> states;
  states.reserve(trace.steps.size());
  for (const auto& step : trace.steps) states.push_back(step.state);
  if (!states.empty() && !states[0].empty()) {
    out.period = detect_period(states);
  }
  return out;
}

SbsResult sbs_two_stage(const std::vector<Dist>& contexts, const Kernel& psi_kernel) {
  if (contexts.empty()) throw InvalidDistribution("sbs_two_stage: no contexts");
  const std::size_t n_candidates = psi_kernel.from_alphabet().size();
  const double inf = std::numeric_limits<double>::infinity();

  // Cross-entropy of context j under candidate row c; +inf when the row
  // misses support the context needs.
  auto cross_entropy = [&](const Dist& ctx, std::size_t c) {
    double ce = 0.0;
    for (std::size_t psi = 0; psi < ctx.size(); ++psi) {
      if (ctx.p(psi) > 0.0) {
        const double k = psi_kernel.p(c, psi);
        if (k <= 0.0) return inf;
        ce -= ctx.p(psi) * std::log(k);
      }
    }
    return ce;
  };

  SbsResult out;
  double best = inf;
  for (std::size_t c = 0; c < n_candidates; ++c) {
    double avg = 0.0;
    for (const Dist& ctx : contexts) {
      if (ctx.alphabet() != psi_kernel.to_alphabet()) {
        throw AlphabetMismatch("sbs_two_stage: context alphabet != kernel target");
      }
      avg += cross_entropy(ctx, c);
    }
    avg /= static_cast<double>(contexts.size());
    if (avg < best - 1e-15) {
      best = avg;
      out.phi_star = c;
    }
  }

  // Stage 2: per-context posterior over candidates from a uniform prior with
  // geometric-likelihood weights exp(-cross_entropy).
  for (const Dist& ctx : contexts) {
    std::vector<double> w(n_candidates, 0.0);
    double lo = inf;
    for (std::size_t c = 0; c < n_candidates; ++c) lo = std::min(lo, cross_entropy(ctx, c));
    double total = 0.0;
    for (std::size_t c = 0; c < n_candidates; ++c) {
      const double ce = cross_entropy(ctx, c);
      w[c] = ce == inf ? 0.0 : std::exp(lo - ce);
      total += w[c];
    }
    for (double& x : w) x /= total;
    out.bindings.emplace_back(psi_kernel.from_alphabet(), std::move(w));
  }
  return out;
}

FactoredHalfCycle::FactoredHalfCycle(std::vector<double> pz_phi,
                                     std::vector<double> bit_prob,
                                     std::size_t n_content, std::size_t n_latent,
                                     std::size_t n_bits)
    : k_(n_content), z_(n_latent), d_(n_bits),
      pz_phi_(std::move(pz_phi)), bit_(std::move(bit_prob)) {
  if (pz_phi_.size() != k_ * z_ || bit_.size() != z_ * d_) {
    throw InvalidDistribution("FactoredHalfCycle: table shape mismatch");
  }
  // Bayes inversion of p(Z|Phi) under a uniform content prior.
  qphi_z_.assign(z_ * k_, 0.0);
  for (std::size_t z = 0; z < z_; ++z) {
    double marginal = 0.0;
    for (std::size_t p = 0; p < k_; ++p) marginal += pz_phi_[p * z_ + z];
    if (marginal <= 0.0) continue;
    for (std::size_t p = 0; p < k_; ++p) qphi_z_[z * k_ + p] = pz_phi_[p * z_ + z] / marginal;
  }
}

std::size_t FactoredHalfCycle::step(std::size_t phi) const {
  // Predicted per-bit marginals under the current content.
  std::vector<double> marg(d_, 0.0);
  for (std::size_t z = 0; z < z_; ++z) {
    const double w = pz_phi_[phi * z_ + z];
    if (w <= 0.0) continue;
    for (std::size_t dd = 0; dd < d_; ++dd) marg[dd] += w * bit_[z * d_ + dd];
  }
  // Naive-Bayes latent posterior from expected per-bit log-likelihoods.
  std::vector<double> logit(z_, 0.0);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t z = 0; z < z_; ++z) {
    double score = 0.0;
    for (std::size_t dd = 0; dd < d_; ++dd) {
      const double p = bit_[z * d_ + dd];
      score += marg[dd] * std::log(std::max(p, 1e-300)) +
               (1.0 - marg[dd]) * std::log(std::max(1.0 - p, 1e-300));
    }
    logit[z] = score;
    best = std::max(best, score);
  }
  double total = 0.0;
  std::vector<double> post(z_);
  for (std::size_t z = 0; z < z_; ++z) {
    post[z] = std::exp(logit[z] - best);
    total += post[z];
  }
  // Content scores through the inverted codebook; lowest index wins ties.
  std::size_t arg = 0;
  double top = -1.0;
  for (std::size_t p = 0; p < k_; ++p) {
    double s = 0.0;
    for (std::size_t z = 0; z < z_; ++z) s += (post[z] / total) * qphi_z_[z * k_ + p];
    if (s > top + 1e-15) {
      top = s;
      arg = p;
    }
  }
  return arg;
}

double FactoredHalfCycle::exhaustive_conditional_entropy(std::size_t phi) const {
  double h = 0.0;
  const std::uint64_t n_ctx = std::uint64_t{1} << d_;
  for (std::uint64_t ctx = 0; ctx < n_ctx; ++ctx) {
    double p_ctx = 0.0;
    for (std::size_t z = 0; z < z_; ++z) {
      const double w = pz_phi_[phi * z_ + z];
      if (w <= 0.0) continue;
      double prod = w;
      for (std::size_t dd = 0; dd < d_; ++dd) {
        const double b = bit_[z * d_ + dd];
        prod *= (ctx >> dd) & 1 ? b : 1.0 - b;
      }
      p_ctx += prod;
    }
    if (p_ctx > 0.0) h -= p_ctx * std::log(p_ctx);
  }
  return h;
}

}  // namespace ccup
