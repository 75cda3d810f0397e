#include "ccup/prob.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ccup {

namespace {

double vector_sum(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0);
}

// Renormalize if within kRenormTol of the expected total, else reject.
void normalize_or_throw(std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      std::ostringstream os;
      os << what << ": negative or non-finite entry " << x;
      throw InvalidDistribution(os.str());
    }
  }
  const double total = vector_sum(v);
  if (std::abs(total - 1.0) >= kRenormTol) {
    std::ostringstream os;
    os << what << ": mass " << total << " deviates from 1 by more than " << kRenormTol;
    throw InvalidDistribution(os.str());
  }
  for (double& x : v) x /= total;
}

}  // namespace

Alphabet::Alphabet(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) throw InvalidDistribution("Alphabet: empty label set");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (!index_.emplace(labels_[i], i).second) {
      throw InvalidDistribution("Alphabet: duplicate label '" + labels_[i] + "'");
    }
  }
}

Alphabet Alphabet::indexed(std::size_t n, const std::string& prefix) {
  std::vector<std::string> labels;
  labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) labels.push_back(prefix + std::to_string(i));
  return Alphabet(std::move(labels));
}

std::size_t Alphabet::index_of(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) throw AlphabetMismatch("Alphabet: unknown label '" + label + "'");
  return it->second;
}

bool Alphabet::contains(const std::string& label) const {
  return index_.count(label) != 0;
}

Dist::Dist(Alphabet alphabet, std::vector<double> probs)
    : alphabet_(std::move(alphabet)), probs_(std::move(probs)) {
  if (probs_.size() != alphabet_.size()) {
    throw InvalidDistribution("Dist: probs length != alphabet size");
  }
  normalize_or_throw(probs_, "Dist");
}

Dist Dist::uniform(const Alphabet& a) {
  return Dist(a, std::vector<double>(a.size(), 1.0 / static_cast<double>(a.size())));
}

Dist Dist::point_mass(const Alphabet& a, std::size_t atom) {
  std::vector<double> v(a.size(), 0.0);
  v.at(atom) = 1.0;
  return Dist(a, std::move(v));
}

std::size_t Dist::argmax() const {
  return static_cast<std::size_t>(
      std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

Joint::Joint(Alphabet row_alphabet, Alphabet col_alphabet, std::vector<double> table)
    : rows_(std::move(row_alphabet)), cols_(std::move(col_alphabet)), table_(std::move(table)) {
  if (table_.size() != rows_.size() * cols_.size()) {
    throw InvalidDistribution("Joint: table size != |rows| * |cols|");
  }
  normalize_or_throw(table_, "Joint");
}

Dist Joint::row_marginal() const {
  std::vector<double> m(rows_.size(), 0.0);
  for (std::size_t r = 0; r < rows_.size(); ++r)
    for (std::size_t c = 0; c < cols_.size(); ++c) m[r] += p(r, c);
  return Dist(rows_, std::move(m));
}

Dist Joint::col_marginal() const {
  std::vector<double> m(cols_.size(), 0.0);
  for (std::size_t r = 0; r < rows_.size(); ++r)
    for (std::size_t c = 0; c < cols_.size(); ++c) m[c] += p(r, c);
  return Dist(cols_, std::move(m));
}

Joint Joint::transposed() const {
  std::vector<double> t(table_.size());
  for (std::size_t r = 0; r < rows_.size(); ++r)
    for (std::size_t c = 0; c < cols_.size(); ++c) t[c * rows_.size() + r] = p(r, c);
  return Joint(cols_, rows_, std::move(t));
}

Joint Joint::from_kernel(const Dist& prior, const Kernel& k) {
  if (prior.alphabet() != k.from_alphabet()) {
    throw AlphabetMismatch("Joint::from_kernel: prior alphabet != kernel source");
  }
  const std::size_t n = prior.size(), m = k.to_alphabet().size();
  std::vector<double> t(n * m);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) t[r * m + c] = prior.p(r) * k.p(r, c);
  return Joint(prior.alphabet(), k.to_alphabet(), std::move(t));
}

Kernel::Kernel(Alphabet from_alphabet, Alphabet to_alphabet, std::vector<double> rows)
    : from_(std::move(from_alphabet)), to_(std::move(to_alphabet)), table_(std::move(rows)) {
  if (table_.size() != from_.size() * to_.size()) {
    throw InvalidDistribution("Kernel: table size != |from| * |to|");
  }
  for (std::size_t r = 0; r < from_.size(); ++r) {
    std::vector<double> row(table_.begin() + r * to_.size(),
                            table_.begin() + (r + 1) * to_.size());
    normalize_or_throw(row, "Kernel row");
    std::copy(row.begin(), row.end(), table_.begin() + r * to_.size());
  }
}

Kernel Kernel::identity(const Alphabet& a) {
  std::vector<std::size_t> target(a.size());
  std::iota(target.begin(), target.end(), std::size_t{0});
  return deterministic(a, a, target);
}

Kernel Kernel::deterministic(const Alphabet& from, const Alphabet& to,
                             const std::vector<std::size_t>& target) {
  if (target.size() != from.size()) {
    throw InvalidDistribution("Kernel::deterministic: target length != |from|");
  }
  std::vector<double> t(from.size() * to.size(), 0.0);
  for (std::size_t r = 0; r < from.size(); ++r) t[r * to.size() + target.at(r)] = 1.0;
  return Kernel(from, to, std::move(t));
}

Dist Kernel::row(std::size_t from) const {
  return Dist(to_, std::vector<double>(table_.begin() + from * to_.size(),
                                       table_.begin() + (from + 1) * to_.size()));
}

bool Kernel::is_deterministic() const {
  for (std::size_t r = 0; r < from_.size(); ++r) {
    std::size_t ones = 0;
    for (std::size_t c = 0; c < to_.size(); ++c) {
      if (p(r, c) == 1.0) ++ones;
      else if (p(r, c) != 0.0) return false;
    }
    if (ones != 1) return false;
  }
  return true;
}

double entropy(const std::vector<double>& probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h < 0.0 ? 0.0 : h;
}

double entropy(const Dist& d) { return entropy(d.probs()); }

double joint_entropy(const Joint& j) { return entropy(j.table()); }

double conditional_entropy(const Joint& j, Direction direction) {
  // H(Y|X) = H(X,Y) - H(X), exact chain rule.
  const Dist cond_on =
      direction == Direction::kColGivenRow ? j.row_marginal() : j.col_marginal();
  double h = joint_entropy(j) - entropy(cond_on);
  return h < 0.0 ? 0.0 : h;
}

double mutual_information(const Joint& j) {
  double mi = entropy(j.row_marginal()) + entropy(j.col_marginal()) - joint_entropy(j);
  return mi < 0.0 ? 0.0 : mi;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw AlphabetMismatch("kl_divergence: size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      if (q[i] <= 0.0) {
        throw AbsoluteContinuityViolation(
            "kl_divergence: q has zero mass on the support of p (index " +
            std::to_string(i) + ")");
      }
      d += p[i] * std::log(p[i] / q[i]);
    }
  }
  return d < 0.0 ? 0.0 : d;
}

double kl_divergence(const Dist& p, const Dist& q) {
  if (p.alphabet() != q.alphabet()) throw AlphabetMismatch("kl_divergence: alphabets differ");
  return kl_divergence(p.probs(), q.probs());
}

Dist pushforward(const Dist& prior, const Kernel& k) {
  if (prior.alphabet() != k.from_alphabet()) {
    throw AlphabetMismatch("pushforward: prior alphabet != kernel source");
  }
  std::vector<double> out(k.to_alphabet().size(), 0.0);
  for (std::size_t r = 0; r < prior.size(); ++r)
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += prior.p(r) * k.p(r, c);
  return Dist(k.to_alphabet(), std::move(out));
}

Kernel bayes_invert(const Kernel& k, const Dist& prior) {
  const Dist marginal = pushforward(prior, k);
  const std::size_t n = k.from_alphabet().size(), m = k.to_alphabet().size();
  std::vector<double> post(m * n, 0.0);
  for (std::size_t c = 0; c < m; ++c) {
    if (marginal.p(c) <= 0.0) {
      throw ZeroMarginal("bayes_invert: symbol '" + k.to_alphabet().label(c) +
                         "' is unreachable under the prior");
    }
    for (std::size_t r = 0; r < n; ++r) {
      post[c * n + r] = prior.p(r) * k.p(r, c) / marginal.p(c);
    }
  }
  return Kernel(k.to_alphabet(), k.from_alphabet(), std::move(post));
}

double dist_variance(const Dist& d,
                     const std::map<std::string, std::vector<double>>& embedding) {
  std::size_t dim = 0;
  std::vector<const std::vector<double>*> points(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto it = embedding.find(d.alphabet().label(i));
    if (it == embedding.end()) {
      throw MissingEmbedding("dist_variance: no embedding for label '" +
                             d.alphabet().label(i) + "'");
    }
    points[i] = &it->second;
    if (i == 0) dim = it->second.size();
    else if (it->second.size() != dim) {
      throw MissingEmbedding("dist_variance: inconsistent embedding dimension");
    }
  }
  double var = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    double mean = 0.0, second = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double x = (*points[i])[k];
      mean += d.p(i) * x;
      second += d.p(i) * x * x;
    }
    var += second - mean * mean;
  }
  return var < 0.0 ? 0.0 : var;
}

double expected_row_entropy(const Dist& prior, const Kernel& k) {
  if (prior.alphabet() != k.from_alphabet()) {
    throw AlphabetMismatch("expected_row_entropy: prior alphabet != kernel source");
  }
  double h = 0.0;
  for (std::size_t r = 0; r < prior.size(); ++r) {
    if (prior.p(r) > 0.0) h += prior.p(r) * entropy(k.row(r));
  }
  return h;
}

double total_variation(const Dist& p, const Dist& q) {
  if (p.alphabet() != q.alphabet()) throw AlphabetMismatch("total_variation: alphabets differ");
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p.p(i) - q.p(i));
  return 0.5 * tv;
}

nlohmann::json Dist::to_json() const {
  return {{"labels", alphabet_.labels()}, {"probs", probs_}};
}

Dist Dist::from_json(const nlohmann::json& j) {
  return Dist(Alphabet(j.at("labels").get<std::vector<std::string>>()),
              j.at("probs").get<std::vector<double>>());
}

nlohmann::json Joint::to_json() const {
  return {{"row_labels", rows_.labels()},
          {"col_labels", cols_.labels()},
          {"table", table_}};
}

Joint Joint::from_json(const nlohmann::json& j) {
  return Joint(Alphabet(j.at("row_labels").get<std::vector<std::string>>()),
               Alphabet(j.at("col_labels").get<std::vector<std::string>>()),
               j.at("table").get<std::vector<double>>());
}

nlohmann::json Kernel::to_json() const {
  return {{"from_labels", from_.labels()},
          {"to_labels", to_.labels()},
          {"rows", table_}};
}

Kernel Kernel::from_json(const nlohmann::json& j) {
  return Kernel(Alphabet(j.at("from_labels").get<std::vector<std::string>>()),
                Alphabet(j.at("to_labels").get<std::vector<std::string>>()),
                j.at("rows").get<std::vector<double>>());
}

}  // namespace ccup
