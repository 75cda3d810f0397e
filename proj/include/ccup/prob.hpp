#pragma once

#include <map>
#include <string>
#include <vector>

#include "ccup/errors.hpp"
#include "json.hpp"

namespace ccup {

// Construction tolerances: a probability vector whose sum deviates from 1 by
// less than kRenormTol is renormalized; larger deviations are rejected.
inline constexpr double kProbTol = 1e-9;
inline constexpr double kRenormTol = 1e-6;

// Ordered finite symbol set. Index <-> label is a bijection.
class Alphabet {
 public:
  Alphabet() = default;
  explicit Alphabet(std::vector<std::string> labels);

  // Convenience: "a0", "a1", ... with the given prefix.
  static Alphabet indexed(std::size_t n, const std::string& prefix = "a");

  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t index_of(const std::string& label) const;
  bool contains(const std::string& label) const;

  bool operator==(const Alphabet& other) const { return labels_ == other.labels_; }
  bool operator!=(const Alphabet& other) const { return !(*this == other); }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, std::size_t> index_;
};

// Probability vector over an Alphabet. Immutable after construction.
class Dist {
 public:
  Dist(Alphabet alphabet, std::vector<double> probs);

  static Dist uniform(const Alphabet& a);
  static Dist point_mass(const Alphabet& a, std::size_t atom);

  const Alphabet& alphabet() const { return alphabet_; }
  std::size_t size() const { return probs_.size(); }
  double p(std::size_t i) const { return probs_.at(i); }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t argmax() const;  // lowest index on ties

  nlohmann::json to_json() const;
  static Dist from_json(const nlohmann::json& j);

 private:
  Alphabet alphabet_;
  std::vector<double> probs_;
};

// Joint distribution over row_alphabet x col_alphabet, row-major table.
class Joint {
 public:
  Joint(Alphabet row_alphabet, Alphabet col_alphabet, std::vector<double> table);

  const Alphabet& row_alphabet() const { return rows_; }
  const Alphabet& col_alphabet() const { return cols_; }
  double p(std::size_t r, std::size_t c) const { return table_[r * cols_.size() + c]; }
  const std::vector<double>& table() const { return table_; }

  Dist row_marginal() const;
  Dist col_marginal() const;
  Joint transposed() const;

  // prior over rows combined with a row->col kernel.
  static Joint from_kernel(const Dist& prior, const class Kernel& k);

  nlohmann::json to_json() const;
  static Joint from_json(const nlohmann::json& j);

 private:
  Alphabet rows_, cols_;
  std::vector<double> table_;  // row-major
};

// Row-stochastic conditional table from_alphabet -> to_alphabet.
class Kernel {
 public:
  Kernel(Alphabet from_alphabet, Alphabet to_alphabet, std::vector<double> rows);

  static Kernel identity(const Alphabet& a);
  // Deterministic kernel from an index map (one 1.0 per row).
  static Kernel deterministic(const Alphabet& from, const Alphabet& to,
                              const std::vector<std::size_t>& target);

  const Alphabet& from_alphabet() const { return from_; }
  const Alphabet& to_alphabet() const { return to_; }
  double p(std::size_t from, std::size_t to) const {
    return table_[from * to_.size() + to];
  }
  Dist row(std::size_t from) const;
  const std::vector<double>& table() const { return table_; }
  bool is_deterministic() const;

  nlohmann::json to_json() const;
  static Kernel from_json(const nlohmann::json& j);

 private:
  Alphabet from_, to_;
  std::vector<double> table_;  // row-major
};

enum class Direction { kColGivenRow, kRowGivenCol };

// All measures in nats.
double entropy(const Dist& d);
double entropy(const std::vector<double>& probs);  // raw vector form
double joint_entropy(const Joint& j);
double conditional_entropy(const Joint& j, Direction direction);
double mutual_information(const Joint& j);
double kl_divergence(const Dist& p, const Dist& q);
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

// Marginal of `k` applied to `prior`.
Dist pushforward(const Dist& prior, const Kernel& k);
// Exact Bayes posterior kernel to_alphabet -> from_alphabet.
Kernel bayes_invert(const Kernel& k, const Dist& prior);

// Trace of the covariance of the embedded random variable.
double dist_variance(const Dist& d,
                     const std::map<std::string, std::vector<double>>& embedding);

// E_{phi ~ prior} H(row_phi): conditional entropy of a kernel's output.
double expected_row_entropy(const Dist& prior, const Kernel& k);

// Total variation distance 0.5 * ||p - q||_1 (same alphabet required).
double total_variation(const Dist& p, const Dist& q);

}  // namespace ccup
