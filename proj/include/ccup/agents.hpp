#pragma once

#include <vector>

#include "ccup/prob.hpp"
#include "ccup/rng.hpp"

namespace ccup {

// Factored meaning space: Phi = (phi_1, ..., phi_k) with a product prior.
struct World {
  std::vector<Alphabet> factors;
  std::vector<Alphabet> vocab;  // per-slot symbol alphabets L_i

  std::size_t n_slots() const { return factors.size(); }
  std::size_t n_meanings() const {
    std::size_t n = 1;
    for (const auto& f : factors) n *= f.size();
    return n;
  }
  void validate() const;
};

// Per-slot count tables with Laplace smoothing; encoder/decoder kernels are
// derived views over the counts.
class AgentState {
 public:
  AgentState(const World& world, double smoothing);

  double count(std::size_t slot, std::size_t meaning, std::size_t symbol) const;
  void add_count(std::size_t slot, std::size_t meaning, std::size_t symbol, double amount);
  // Multiplies every count in the symbol's column and the meaning's row,
  // except the reinforced cell, by (1 - rate).
  void decay_conflicts(std::size_t slot, std::size_t meaning, std::size_t symbol, double rate);

  // Smoothed p(z | phi_i) row for one meaning value.
  std::vector<double> encoder_row(std::size_t slot, std::size_t meaning) const;
  // Smoothed p(phi_i | z) column posterior for one symbol.
  std::vector<double> decoder_row(std::size_t slot, std::size_t symbol) const;

  std::size_t greedy_symbol(std::size_t slot, std::size_t meaning) const;   // lowest index ties
  std::size_t greedy_meaning(std::size_t slot, std::size_t symbol) const;   // lowest index ties

  Kernel encoder_kernel(const World& world, std::size_t slot) const;
  Kernel decoder_kernel(const World& world, std::size_t slot) const;

  double smoothing() const { return smoothing_; }

 private:
  double smoothing_;
  std::vector<std::size_t> meanings_, symbols_;   // per-slot sizes
  std::vector<std::vector<double>> counts_;       // per slot, meaning-major
};

struct RoundOutcome {
  std::size_t speaker = 0, listener = 0;
  std::vector<std::size_t> meaning;         // per-slot meaning values
  std::vector<std::size_t> message;         // per-slot symbols
  std::vector<std::size_t> reconstruction;  // listener decode
  bool reward = false;
  std::vector<bool> slot_correct;
};

struct GameParams {
  double smoothing = 0.1;        // Laplace alpha
  double eta = 1.0;              // count increment on rewarded rounds
  double decay = 0.05;           // conflict decay rate on rewarded rounds
  double epsilon_start = 0.3;    // exploration, linear decay ...
  double epsilon_end = 0.05;     // ... over the first half of the run
  double lambda = 0.5;           // proximal weight for slot_update
};

// One referential round: the speaker encodes each slot (epsilon-greedy), the
// listener decodes per slot by posterior argmax, and both parties reinforce
// their tables only when the full meaning is reconstructed.
RoundOutcome communication_round(AgentState& speaker, AgentState& listener,
                                 std::size_t speaker_id, std::size_t listener_id,
                                 const World& world, const GameParams& params,
                                 double epsilon, Rng& rng);

// Exact argmin re-assignment of each meaning's symbol in one slot:
//   z' = argmin_z [ H(p(phi_i|z)) + lambda * TV(p(phi_i|z), p(phi_i|z_cur)) ],
// the 0/1-cost OT objective; ties break toward the lowest symbol index.
// Returns the meaning -> symbol assignment after the update.
std::vector<std::size_t> slot_update(AgentState& agent, const World& world,
                                     std::size_t slot, double lambda);

// The objective above for a single (candidate, current) symbol pair.
double slot_objective(const AgentState& agent, std::size_t slot,
                      std::size_t candidate, std::size_t current, double lambda);

struct PopulationMetrics {
  double accuracy = 0.0;         // exact kernel-based round success probability
  double mutual_information = 0.0;  // I(Phi; Z) nats, speaker-averaged
  std::vector<double> slot_conditional_entropy;  // H(phi_i | z_i) per slot
  double deltaness = 0.0;        // min over slots of max_z max_phi p(phi|z)
  double compositionality = 0.0; // fraction of slots with bijective argmax maps
  double objective = 0.0;        // multiagent alignment objective value
};

PopulationMetrics population_metrics(const std::vector<AgentState>& agents,
                                     const World& world, double lambda);

struct EmergenceConfig {
  World world;
  std::size_t n_agents = 2;
  int rounds = 20000;
  GameParams params;
  int metrics_every = 100;
  int verdict_window = 500;      // trailing rounds for the solved check
  double solved_accuracy = 0.99;
};

struct MetricsSample {
  int round = 0;
  double empirical_accuracy = 0.0;  // over rounds since the last sample
  PopulationMetrics metrics;
};

struct EmergenceResult {
  std::uint64_t seed = 0;
  bool solved = false;
  double trailing_accuracy = 0.0;
  std::vector<MetricsSample> series;
  std::vector<AgentState> agents;
  // Final per-slot greedy meaning -> symbol maps of agent 0.
  std::vector<std::vector<std::size_t>> codebook;
};

EmergenceResult run_emergence(const EmergenceConfig& config, std::uint64_t seed);

}  // namespace ccup
