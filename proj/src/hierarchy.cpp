#include "ccup/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ccup {

std::size_t compose_layer(const std::vector<std::size_t>& children, const LayerSpec& spec) {
  if (children.size() != spec.arity) {
    std::ostringstream os;
    os << "compose_layer: got " << children.size() << " children, arity is " << spec.arity;
    throw ArityMismatch(os.str());
  }
  std::size_t idx = 0;
  for (std::size_t child : children) {
    if (child >= spec.child_alphabet.size()) {
      throw AlphabetMismatch("compose_layer: child index out of range");
    }
    idx = idx * spec.child_alphabet.size() + child;
  }
  return spec.compose_table.at(idx);
}

LayerEntropyCheck layer_entropy_check(
    const Dist& parent_phi, const Kernel& parent_context,
    const std::vector<std::pair<Dist, Kernel>>& children) {
  LayerEntropyCheck out;
  out.parent = expected_row_entropy(parent_phi, parent_context);
  for (const auto& [phi, ctx] : children) {
    out.child_sum += expected_row_entropy(phi, ctx);
  }
  out.satisfied = out.parent < out.child_sum;
  return out;
}

LossTerms level_loss(const LevelState& state, const LevelRecognition& recognition) {
  if (state.context.from_alphabet() != state.phi.alphabet() ||
      state.temporal_prior.from_alphabet() != state.phi.alphabet() ||
      state.spatial_prior.from_alphabet() != state.phi.alphabet() ||
      recognition.temporal.from_alphabet() != state.context.to_alphabet() ||
      recognition.temporal.to_alphabet() != state.temporal_prior.to_alphabet() ||
      recognition.spatial.from_alphabet() != state.phi.alphabet() ||
      recognition.spatial.to_alphabet() != state.spatial_prior.to_alphabet()) {
    throw AlphabetMismatch("level_loss: inconsistent alphabet chain");
  }
  LossTerms terms;
  terms.cond_entropy = expected_row_entropy(state.phi, state.context);
  for (std::size_t phi = 0; phi < state.phi.size(); ++phi) {
    const double w = state.phi.p(phi);
    if (w <= 0.0) continue;
    // Temporal term averages the recognition-vs-prior KL over the contexts
    // this content generates.
    double temporal = 0.0;
    for (std::size_t psi = 0; psi < state.context.to_alphabet().size(); ++psi) {
      const double wc = state.context.p(phi, psi);
      if (wc <= 0.0) continue;
      temporal += wc * kl_divergence(recognition.temporal.row(psi),
                                     state.temporal_prior.row(phi));
    }
    terms.temporal_kl += w * temporal;
    terms.spatial_kl +=
        w * kl_divergence(recognition.spatial.row(phi), state.spatial_prior.row(phi));
  }
  return terms;
}

SpatiotemporalLoss spatiotemporal_loss(
    const std::vector<std::vector<std::pair<LevelState, LevelRecognition>>>& steps,
    double lambda_temp, double lambda_space) {
  SpatiotemporalLoss out;
  for (std::size_t t = 0; t < steps.size(); ++t) {
    out.terms.emplace_back();
    for (std::size_t level = 0; level < steps[t].size(); ++level) {
      try {
        const LossTerms terms = level_loss(steps[t][level].first, steps[t][level].second);
        out.terms.back().push_back(terms);
        out.total += terms.total(lambda_temp, lambda_space);
      } catch (const AbsoluteContinuityViolation& e) {
        std::ostringstream os;
        os << e.what() << " at (t=" << t << ", level=" << level << ")";
        throw AbsoluteContinuityViolation(os.str());
      }
    }
  }
  return out;
}

HierarchicalRunResult hierarchical_run(const HierarchyScenario& scenario, int T) {
  if (T < 1) throw InvalidDistribution("hierarchical_run: T must be >= 1");
  const std::size_t n_levels = 1 + scenario.upper_levels.size();

  HierarchicalRunResult out;
  out.level_entropy.assign(n_levels, {});
  out.fixed_points.assign(n_levels, {});
  out.leaf_traces.resize(scenario.leaves.size());

  std::vector<std::size_t> leaf_state(scenario.leaves.size());
  for (std::size_t i = 0; i < scenario.leaves.size(); ++i) {
    leaf_state[i] = scenario.leaves[i].initial_state;
    TraceStep step;
    step.t = 0;
    step.state_label = scenario.leaves[i].context.from_alphabet().label(leaf_state[i]);
    step.state = {static_cast<double>(leaf_state[i])};
    step.cond_entropy = entropy(scenario.leaves[i].context.row(leaf_state[i]));
    out.leaf_traces[i].steps.push_back(std::move(step));
  }

  // Previous per-node context conditionals, for the drift check.
  std::vector<std::vector<Dist>> prev_rows(n_levels);

  auto record_levels = [&](int t) {
    // Level 0: leaves.
    double leaf_h = 0.0;
    for (std::size_t i = 0; i < scenario.leaves.size(); ++i) {
      leaf_h += entropy(scenario.leaves[i].context.row(leaf_state[i]));
    }
    out.level_entropy[0].push_back(leaf_h);

    std::vector<std::size_t> below = leaf_state;
    std::vector<Dist> below_rows;
    for (std::size_t i = 0; i < scenario.leaves.size(); ++i) {
      below_rows.push_back(scenario.leaves[i].context.row(leaf_state[i]));
    }
    prev_rows[0] = below_rows;  // drift is bounded per upper-level node only

    for (std::size_t lvl = 0; lvl < scenario.upper_levels.size(); ++lvl) {
      const auto& nodes = scenario.upper_levels[lvl];
      std::vector<std::size_t> composed;
      std::vector<Dist> rows;
      double level_h = 0.0;
      std::size_t cursor = 0;
      for (const HierarchyNode& node : nodes) {
        std::vector<std::size_t> kids(below.begin() + cursor,
                                      below.begin() + cursor + node.spec.arity);
        cursor += node.spec.arity;
        const std::size_t parent = compose_layer(kids, node.spec);
        composed.push_back(parent);
        rows.push_back(node.context.row(parent));
        level_h += entropy(rows.back());
      }
      out.level_entropy[lvl + 1].push_back(level_h);
      if (t > 0) {
        for (std::size_t n = 0; n < nodes.size(); ++n) {
          double drift;
          try {
            drift = kl_divergence(rows[n], prev_rows[lvl + 1][n]);
          } catch (const AbsoluteContinuityViolation&) {
            drift = std::numeric_limits<double>::infinity();
          }
          if (drift > nodes[n].epsilon_drift) {
            const int level_id = static_cast<int>(lvl) + 2;
            if (std::find(out.kl_drift_exceeded.begin(), out.kl_drift_exceeded.end(),
                          level_id) == out.kl_drift_exceeded.end()) {
              out.kl_drift_exceeded.push_back(level_id);
            }
          }
        }
      }
      prev_rows[lvl + 1] = rows;
      below = std::move(composed);
    }
    return below;  // top-level labels
  };

  record_levels(0);
  for (int t = 1; t <= T; ++t) {
    for (std::size_t i = 0; i < scenario.leaves.size(); ++i) {
      const auto& leaf = scenario.leaves[i];
      const std::size_t next = inverted_update(leaf_state[i], leaf.context, leaf.update);
      TraceStep step;
      step.t = t;
      step.state_label = leaf.context.from_alphabet().label(next);
      step.state = {static_cast<double>(next)};
      step.objective = inverted_objective(next, leaf_state[i], leaf.context, leaf.update);
      step.cond_entropy = entropy(leaf.context.row(next));
      if (next == leaf_state[i] && out.leaf_traces[i].verdict.kind != VerdictKind::kConverged) {
        out.leaf_traces[i].verdict = {VerdictKind::kConverged, t, 0};
      }
      leaf_state[i] = next;
      out.leaf_traces[i].steps.push_back(std::move(step));
    }
    record_levels(t);
  }

  out.fixed_points[0] = leaf_state;
  std::vector<std::size_t> below = leaf_state;
  for (std::size_t lvl = 0; lvl < scenario.upper_levels.size(); ++lvl) {
    std::vector<std::size_t> composed;
    std::size_t cursor = 0;
    for (const HierarchyNode& node : scenario.upper_levels[lvl]) {
      std::vector<std::size_t> kids(below.begin() + cursor,
                                    below.begin() + cursor + node.spec.arity);
      cursor += node.spec.arity;
      composed.push_back(compose_layer(kids, node.spec));
    }
    out.fixed_points[lvl + 1] = composed;
    below = std::move(composed);
  }
  return out;
}

bool recursion_threshold(double context_entropy, double flat_budget) {
  if (context_entropy < 0.0 || flat_budget < 0.0) {
    throw InvalidDistribution("recursion_threshold: entropies must be nonnegative");
  }
  return context_entropy > flat_budget;
}

namespace {

void partitions_rec(std::size_t remaining, std::size_t max_part, std::size_t parts_left,
                    double acc, std::size_t total, double& best) {
  if (remaining == 0) {
    best = std::min(best, acc);
    return;
  }
  if (parts_left == 0) return;
  for (std::size_t part = std::min(remaining, max_part); part >= 1; --part) {
    // A cell of `part` uniform contexts contributes (part/total) * ln(part).
    const double h = part > 1
        ? (static_cast<double>(part) / static_cast<double>(total)) *
              std::log(static_cast<double>(part))
        : 0.0;
    partitions_rec(remaining - part, part, parts_left - 1, acc + h, total, best);
  }
}

}  // namespace

double flat_code_residual(std::size_t n_contexts, std::size_t code_size) {
  if (n_contexts == 0 || code_size == 0) {
    throw InvalidDistribution("flat_code_residual: sizes must be positive");
  }
  if (code_size >= n_contexts) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  partitions_rec(n_contexts, n_contexts, code_size, 0.0, n_contexts, best);
  return best;
}

}  // namespace ccup
