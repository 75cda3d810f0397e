#include "ccup/agents.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace ccup {

void World::validate() const {
  if (factors.empty()) throw InvalidDistribution("World: needs at least one factor");
  if (vocab.size() != factors.size()) {
    throw InvalidDistribution("World: one vocabulary per factor required");
  }
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (vocab[i].size() < factors[i].size()) {
      throw InvalidDistribution("World: vocabulary smaller than factor " +
                                std::to_string(i) + "; game unsolvable");
    }
  }
}

AgentState::AgentState(const World& world, double smoothing) : smoothing_(smoothing) {
  if (!(smoothing > 0.0)) {
    throw InvalidDistribution("AgentState: smoothing must be positive");
  }
  for (std::size_t i = 0; i < world.n_slots(); ++i) {
    meanings_.push_back(world.factors[i].size());
    symbols_.push_back(world.vocab[i].size());
    counts_.emplace_back(meanings_.back() * symbols_.back(), 0.0);
  }
}

double AgentState::count(std::size_t slot, std::size_t meaning, std::size_t symbol) const {
  return counts_.at(slot)[meaning * symbols_[slot] + symbol];
}

void AgentState::add_count(std::size_t slot, std::size_t meaning, std::size_t symbol,
                           double amount) {
  counts_.at(slot)[meaning * symbols_[slot] + symbol] += amount;
}

void AgentState::decay_conflicts(std::size_t slot, std::size_t meaning, std::size_t symbol,
                                 double rate) {
  auto& table = counts_.at(slot);
  const std::size_t ns = symbols_[slot];
  for (std::size_t z = 0; z < ns; ++z) {
    if (z != symbol) table[meaning * ns + z] *= 1.0 - rate;
  }
  for (std::size_t m = 0; m < meanings_[slot]; ++m) {
    if (m != meaning) table[m * ns + symbol] *= 1.0 - rate;
  }
}

std::vector<double> AgentState::encoder_row(std::size_t slot, std::size_t meaning) const {
  const std::size_t ns = symbols_[slot];
  std::vector<double> row(ns);
  double total = 0.0;
  for (std::size_t z = 0; z < ns; ++z) {
    row[z] = count(slot, meaning, z) + smoothing_;
    total += row[z];
  }
  for (double& x : row) x /= total;
  return row;
}

std::vector<double> AgentState::decoder_row(std::size_t slot, std::size_t symbol) const {
  const std::size_t nm = meanings_[slot];
  std::vector<double> row(nm);
  double total = 0.0;
  for (std::size_t m = 0; m < nm; ++m) {
    row[m] = count(slot, m, symbol) + smoothing_;
    total += row[m];
  }
  for (double& x : row) x /= total;
  return row;
}

std::size_t AgentState::greedy_symbol(std::size_t slot, std::size_t meaning) const {
  const auto row = encoder_row(slot, meaning);
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

std::size_t AgentState::greedy_meaning(std::size_t slot, std::size_t symbol) const {
  const auto row = decoder_row(slot, symbol);
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

Kernel AgentState::encoder_kernel(const World& world, std::size_t slot) const {
  std::vector<double> rows;
  for (std::size_t m = 0; m < meanings_[slot]; ++m) {
    const auto row = encoder_row(slot, m);
    rows.insert(rows.end(), row.begin(), row.end());
  }
  return Kernel(world.factors[slot], world.vocab[slot], std::move(rows));
}

Kernel AgentState::decoder_kernel(const World& world, std::size_t slot) const {
  std::vector<double> rows;
  for (std::size_t z = 0; z < symbols_[slot]; ++z) {
    const auto row = decoder_row(slot, z);
    rows.insert(rows.end(), row.begin(), row.end());
  }
  return Kernel(world.vocab[slot], world.factors[slot], std::move(rows));
}

RoundOutcome communication_round(AgentState& speaker, AgentState& listener,
                                 std::size_t speaker_id, std::size_t listener_id,
                                 const World& world, const GameParams& params,
                                 double epsilon, Rng& rng) {
  RoundOutcome outcome;
  outcome.speaker = speaker_id;
  outcome.listener = listener_id;
  const std::size_t k = world.n_slots();
  outcome.meaning.resize(k);
  outcome.message.resize(k);
  outcome.reconstruction.resize(k);
  outcome.slot_correct.resize(k);

  for (std::size_t i = 0; i < k; ++i) {
    outcome.meaning[i] = rng.index(world.factors[i].size());
    outcome.message[i] = rng.uniform() < epsilon
                             ? rng.index(world.vocab[i].size())
                             : speaker.greedy_symbol(i, outcome.meaning[i]);
    // Listener explores too: greedy decoding alone deadlocks on the
    // symmetric initialization since ties always resolve to meaning 0.
    outcome.reconstruction[i] = rng.uniform() < epsilon
                                    ? rng.index(world.factors[i].size())
                                    : listener.greedy_meaning(i, outcome.message[i]);
    outcome.slot_correct[i] = outcome.reconstruction[i] == outcome.meaning[i];
  }
  outcome.reward = std::all_of(outcome.slot_correct.begin(), outcome.slot_correct.end(),
                               [](bool b) { return b; });
  if (outcome.reward) {
    for (std::size_t i = 0; i < k; ++i) {
      speaker.add_count(i, outcome.meaning[i], outcome.message[i], params.eta);
      speaker.decay_conflicts(i, outcome.meaning[i], outcome.message[i], params.decay);
      listener.add_count(i, outcome.meaning[i], outcome.message[i], params.eta);
      listener.decay_conflicts(i, outcome.meaning[i], outcome.message[i], params.decay);
    }
  }
  return outcome;
}

double slot_objective(const AgentState& agent, std::size_t slot,
                      std::size_t candidate, std::size_t current, double lambda) {
  const auto cand = agent.decoder_row(slot, candidate);
  const auto cur = agent.decoder_row(slot, current);
  double tv = 0.0;
  for (std::size_t m = 0; m < cand.size(); ++m) tv += std::abs(cand[m] - cur[m]);
  return entropy(cand) + lambda * 0.5 * tv;
}

std::vector<std::size_t> slot_update(AgentState& agent, const World& world,
                                     std::size_t slot, double lambda) {
  const std::size_t nm = world.factors[slot].size();
  const std::size_t ns = world.vocab[slot].size();
  double total = 0.0;
  for (std::size_t m = 0; m < nm; ++m) {
    for (std::size_t z = 0; z < ns; ++z) total += agent.count(slot, m, z);
  }
  if (total <= 0.0) {
    throw EmptySlot("slot_update: no observations for slot " + std::to_string(slot));
  }

  std::vector<std::size_t> assignment(nm);
  for (std::size_t m = 0; m < nm; ++m) {
    // Current symbol for this meaning is the greedy encoder choice.
    const std::size_t current = agent.greedy_symbol(slot, m);
    const auto cur_row = agent.decoder_row(slot, current);
    std::size_t best = current;
    double best_val = std::numeric_limits<double>::infinity();
    for (std::size_t z = 0; z < ns; ++z) {
      const auto cand = agent.decoder_row(slot, z);
      double tv = 0.0;
      for (std::size_t mm = 0; mm < cand.size(); ++mm) tv += std::abs(cand[mm] - cur_row[mm]);
      const double val = entropy(cand) + lambda * 0.5 * tv;
      if (val < best_val - 1e-15) {
        best_val = val;
        best = z;
      }
    }
    assignment[m] = best;
  }
  return assignment;
}

PopulationMetrics population_metrics(const std::vector<AgentState>& agents,
                                     const World& world, double lambda) {
  if (agents.size() < 2) {
    throw InvalidDistribution("population_metrics: need at least one agent pair");
  }
  const std::size_t k = world.n_slots();
  PopulationMetrics out;
  out.slot_conditional_entropy.assign(k, 0.0);

  // Exact success probability averaged over ordered (speaker, listener)
  // pairs under greedy encode/decode and the uniform meaning prior.
  double accuracy = 0.0;
  std::size_t n_pairs = 0;
  for (std::size_t s = 0; s < agents.size(); ++s) {
    for (std::size_t l = 0; l < agents.size(); ++l) {
      if (s == l) continue;
      ++n_pairs;
      double pair_acc = 1.0;
      for (std::size_t i = 0; i < k; ++i) {
        double slot_acc = 0.0;
        for (std::size_t m = 0; m < world.factors[i].size(); ++m) {
          const std::size_t z = agents[s].greedy_symbol(i, m);
          slot_acc += agents[l].greedy_meaning(i, z) == m ? 1.0 : 0.0;
        }
        pair_acc *= slot_acc / static_cast<double>(world.factors[i].size());
      }
      accuracy += pair_acc;
    }
  }
  out.accuracy = accuracy / static_cast<double>(n_pairs);

  // Per-slot informational quantities from the smoothed encoder kernels,
  // averaged over agents as speakers. I(Phi;Z) sums over independent slots.
  double mi = 0.0;
  std::vector<double> slot_h(k, 0.0);
  for (const AgentState& agent : agents) {
    for (std::size_t i = 0; i < k; ++i) {
      const Joint joint = Joint::from_kernel(Dist::uniform(world.factors[i]),
                                             agent.encoder_kernel(world, i));
      mi += mutual_information(joint);
      slot_h[i] += conditional_entropy(joint.transposed(), Direction::kColGivenRow);
    }
  }
  out.mutual_information = mi / static_cast<double>(agents.size());
  for (std::size_t i = 0; i < k; ++i) {
    out.slot_conditional_entropy[i] = slot_h[i] / static_cast<double>(agents.size());
  }

  // Deltaness and compositionality from agent-averaged decoder peaks.
  double deltaness = std::numeric_limits<double>::infinity();
  std::size_t bijective_slots = 0;
  for (std::size_t i = 0; i < k; ++i) {
    double slot_peak = std::numeric_limits<double>::infinity();
    bool bijective_all = true;
    for (const AgentState& agent : agents) {
      double peak = 0.0;
      std::vector<bool> hit(world.factors[i].size(), false);
      bool bijective = world.vocab[i].size() >= world.factors[i].size();
      for (std::size_t z = 0; z < world.vocab[i].size(); ++z) {
        const auto row = agent.decoder_row(i, z);
        peak = std::max(peak, *std::max_element(row.begin(), row.end()));
      }
      for (std::size_t m = 0; m < world.factors[i].size(); ++m) {
        const std::size_t z = agent.greedy_symbol(i, m);
        const std::size_t back = agent.greedy_meaning(i, z);
        if (back != m) bijective = false;
        if (hit[back]) bijective = false;
        hit[back] = true;
      }
      slot_peak = std::min(slot_peak, peak);
      bijective_all = bijective_all && bijective;
    }
    deltaness = std::min(deltaness, slot_peak);
    if (bijective_all) ++bijective_slots;
  }
  out.deltaness = deltaness;
  out.compositionality = static_cast<double>(bijective_slots) / static_cast<double>(k);

  // Alignment objective: per ordered pair, compression of the speaker's code
  // plus the transport mismatch between the two decoders (0/1 cost -> TV).
  double objective = 0.0;
  for (std::size_t s = 0; s < agents.size(); ++s) {
    for (std::size_t l = 0; l < agents.size(); ++l) {
      if (s == l) continue;
      double pair_obj = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        pair_obj += mutual_information(Joint::from_kernel(
            Dist::uniform(world.factors[i]), agents[s].encoder_kernel(world, i)));
        double tv = 0.0;
        for (std::size_t z = 0; z < world.vocab[i].size(); ++z) {
          const auto a = agents[s].decoder_row(i, z);
          const auto b = agents[l].decoder_row(i, z);
          double row_tv = 0.0;
          for (std::size_t m = 0; m < a.size(); ++m) row_tv += std::abs(a[m] - b[m]);
          tv += 0.5 * row_tv;
        }
        pair_obj += lambda * tv / static_cast<double>(world.vocab[i].size());
      }
      objective += pair_obj;
    }
  }
  out.objective = objective / static_cast<double>(n_pairs);
  return out;
}

EmergenceResult run_emergence(const EmergenceConfig& config, std::uint64_t seed) {
  config.world.validate();
  if (config.n_agents < 2) {
    throw InvalidDistribution("run_emergence: need at least 2 agents");
  }
  Rng rng(seed);
  EmergenceResult result;
  result.seed = seed;
  for (std::size_t i = 0; i < config.n_agents; ++i) {
    result.agents.emplace_back(config.world, config.params.smoothing);
  }

  std::deque<bool> window;
  int window_hits = 0;
  int since_sample = 0, since_hits = 0;
  const double half = std::max(1.0, config.rounds / 2.0);
  for (int round = 1; round <= config.rounds; ++round) {
    // Linear exploration decay over the first half of the run; the final
    // verdict window runs greedy so the solved check measures the learned
    // code rather than residual exploration noise.
    const double frac = std::min(1.0, static_cast<double>(round) / half);
    double epsilon = config.params.epsilon_start +
                     frac * (config.params.epsilon_end - config.params.epsilon_start);
    if (round > config.rounds - config.verdict_window) epsilon = 0.0;
    std::size_t speaker = rng.index(config.n_agents);
    std::size_t listener = rng.index(config.n_agents - 1);
    if (listener >= speaker) ++listener;
    RoundOutcome outcome = communication_round(
        result.agents[speaker], result.agents[listener], speaker, listener,
        config.world, config.params, epsilon, rng);

    window.push_back(outcome.reward);
    window_hits += outcome.reward ? 1 : 0;
    if (static_cast<int>(window.size()) > config.verdict_window) {
      window_hits -= window.front() ? 1 : 0;
      window.pop_front();
    }
    ++since_sample;
    since_hits += outcome.reward ? 1 : 0;
    if (round % config.metrics_every == 0 || round == config.rounds) {
      MetricsSample sample;
      sample.round = round;
      sample.empirical_accuracy = static_cast<double>(since_hits) / since_sample;
      sample.metrics = population_metrics(result.agents, config.world, config.params.lambda);
      result.series.push_back(std::move(sample));
      since_sample = 0;
      since_hits = 0;
    }
  }

  result.trailing_accuracy =
      window.empty() ? 0.0 : static_cast<double>(window_hits) / window.size();
  result.solved = static_cast<int>(window.size()) >= config.verdict_window &&
                  result.trailing_accuracy >= config.solved_accuracy;
  for (std::size_t i = 0; i < config.world.n_slots(); ++i) {
    std::vector<std::size_t> map(config.world.factors[i].size());
    for (std::size_t m = 0; m < map.size(); ++m) {
      map[m] = result.agents[0].greedy_symbol(i, m);
    }
    result.codebook.push_back(std::move(map));
  }
  return result;
}

}  // namespace ccup
