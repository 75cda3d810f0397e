#include "ccup/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

namespace ccup {

CostMatrix::CostMatrix(Alphabet row_alphabet, Alphabet col_alphabet,
                       std::vector<double> costs)
    : rows_(std::move(row_alphabet)), cols_(std::move(col_alphabet)), costs_(std::move(costs)) {
  if (costs_.size() != rows_.size() * cols_.size()) {
    throw InvalidDistribution("CostMatrix: size != |rows| * |cols|");
  }
  for (double x : costs_) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw InvalidDistribution("CostMatrix: entries must be nonnegative and finite");
    }
  }
}

CostMatrix CostMatrix::zero_one(const Alphabet& a) {
  const std::size_t n = a.size();
  std::vector<double> c(n * n, 1.0);
  for (std::size_t i = 0; i < n; ++i) c[i * n + i] = 0.0;
  return CostMatrix(a, a, std::move(c));
}

CostMatrix CostMatrix::grid_l1(const Alphabet& a,
                               const std::map<std::string, std::vector<double>>& coords) {
  const std::size_t n = a.size();
  std::vector<const std::vector<double>*> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto it = coords.find(a.label(i));
    if (it == coords.end()) {
      throw MissingEmbedding("grid_l1: no coordinates for label '" + a.label(i) + "'");
    }
    pts[i] = &it->second;
  }
  std::vector<double> c(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < pts[i]->size(); ++k) {
        d += std::abs((*pts[i])[k] - (*pts[j])[k]);
      }
      c[i * n + j] = d;
    }
  }
  return CostMatrix(a, a, std::move(c));
}

namespace {

double logsumexp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

TransportPlan sinkhorn(const Dist& mu, const Dist& nu, const CostMatrix& c,
                       const SinkhornOptions& opts) {
  if (mu.alphabet() != c.row_alphabet() || nu.alphabet() != c.col_alphabet()) {
    throw AlphabetMismatch("sinkhorn: alphabets do not match cost matrix");
  }
  if (!(opts.reg > 0.0)) throw InvalidDistribution("sinkhorn: reg must be positive");

  const std::size_t n = mu.size(), m = nu.size();
  const double inf = std::numeric_limits<double>::infinity();
  // Dual potentials in log domain; zero-mass symbols carry -inf and are
  // excluded from every update.
  std::vector<double> f(n, 0.0), g(m, 0.0);
  std::vector<double> log_mu(n), log_nu(m);
  for (std::size_t i = 0; i < n; ++i) log_mu[i] = mu.p(i) > 0.0 ? std::log(mu.p(i)) : -inf;
  for (std::size_t j = 0; j < m; ++j) log_nu[j] = nu.p(j) > 0.0 ? std::log(nu.p(j)) : -inf;
  for (std::size_t i = 0; i < n; ++i) if (log_mu[i] == -inf) f[i] = -inf;
  for (std::size_t j = 0; j < m; ++j) if (log_nu[j] == -inf) g[j] = -inf;

  TransportPlan result;
  result.n_rows = n;
  result.n_cols = m;
  result.reg_strength = opts.reg;
  result.plan.assign(n * m, 0.0);

  auto fill_plan = [&]() {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double e = f[i] + g[j] - c.c(i, j);
        result.plan[i * m + j] = std::isfinite(e) ? std::exp(e / opts.reg) : 0.0;
      }
    }
  };
  auto residual = [&]() {
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < m; ++j) row += result.plan[i * m + j];
      err += std::abs(row - mu.p(i));
    }
    for (std::size_t j = 0; j < m; ++j) {
      double col = 0.0;
      for (std::size_t i = 0; i < n; ++i) col += result.plan[i * m + j];
      err += std::abs(col - nu.p(j));
    }
    return err;
  };

  std::vector<double> scratch(std::max(n, m));
  double err = inf;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    // f-update: exact row marginals afterwards.
    for (std::size_t i = 0; i < n; ++i) {
      if (log_mu[i] == -inf) continue;
      scratch.resize(m);
      for (std::size_t j = 0; j < m; ++j) {
        scratch[j] = g[j] == -inf ? -inf : (g[j] - c.c(i, j)) / opts.reg;
      }
      f[i] = opts.reg * (log_mu[i] - logsumexp(scratch)) ;
    }
    // g-update: exact column marginals afterwards.
    for (std::size_t j = 0; j < m; ++j) {
      if (log_nu[j] == -inf) continue;
      scratch.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        scratch[i] = f[i] == -inf ? -inf : (f[i] - c.c(i, j)) / opts.reg;
      }
      g[j] = opts.reg * (log_nu[j] - logsumexp(scratch));
    }
    fill_plan();
    err = residual();
    result.residual_history.push_back(err);
    if (err < opts.tol) {
      ++it;
      break;
    }
  }

  result.iterations_used = it;
  result.marginal_residual = err;
  result.cost = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) result.cost += result.plan[i * m + j] * c.c(i, j);
  }
  if (err >= opts.tol && opts.throw_on_nonconvergence) {
    std::ostringstream os;
    os << "sinkhorn: marginal residual " << err << " above tol " << opts.tol
       << " after " << it << " iterations";
    throw TransportNonConvergence(os.str(), err, it);
  }
  return result;
}

TransportPlan exact_ot(const Dist& mu, const Dist& nu, const CostMatrix& c) {
  if (mu.alphabet() != c.row_alphabet() || nu.alphabet() != c.col_alphabet()) {
    throw AlphabetMismatch("exact_ot: alphabets do not match cost matrix");
  }
  const std::size_t n = mu.size(), m = nu.size();
  if (n > 32 || m > 32) {
    throw InstanceTooLarge("exact_ot: alphabets larger than 32 symbols");
  }

  // Rational scaling of the masses; the largest entry absorbs rounding so
  // that supplies and demands balance exactly.
  constexpr std::int64_t kScale = 1'000'000'000;
  auto to_integers = [](const Dist& d) {
    std::vector<std::int64_t> v(d.size());
    std::int64_t total = 0;
    std::size_t biggest = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      v[i] = static_cast<std::int64_t>(std::llround(d.p(i) * kScale));
      total += v[i];
      if (d.p(i) > d.p(biggest)) biggest = i;
    }
    v[biggest] += kScale - total;
    return v;
  };
  std::vector<std::int64_t> supply = to_integers(mu), demand = to_integers(nu);

  // Successive shortest augmenting paths with Bellman-Ford on the residual
  // bipartite graph. Node layout: 0 = source, 1..n = left, n+1..n+m = right,
  // n+m+1 = sink.
  const std::size_t source = 0, sink = n + m + 1, nodes = n + m + 2;
  struct Edge {
    std::size_t to;
    std::int64_t cap;
    double cost;
    std::size_t rev;
  };
  std::vector<std::vector<Edge>> graph(nodes);
  auto add_edge = [&](std::size_t a, std::size_t b, std::int64_t cap, double cost) {
    graph[a].push_back({b, cap, cost, graph[b].size()});
    graph[b].push_back({a, 0, -cost, graph[a].size() - 1});
  };
  for (std::size_t i = 0; i < n; ++i) add_edge(source, 1 + i, supply[i], 0.0);
  for (std::size_t j = 0; j < m; ++j) add_edge(1 + n + j, sink, demand[j], 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      add_edge(1 + i, 1 + n + j, std::numeric_limits<std::int64_t>::max() / 4, c.c(i, j));
    }
  }

  const double inf = std::numeric_limits<double>::infinity();
  std::int64_t remaining = kScale;
  while (remaining > 0) {
    std::vector<double> dist(nodes, inf);
    std::vector<std::size_t> prev_node(nodes, nodes), prev_edge(nodes, 0);
    dist[source] = 0.0;
    for (std::size_t pass = 0; pass + 1 < nodes; ++pass) {
      bool changed = false;
      for (std::size_t u = 0; u < nodes; ++u) {
        if (dist[u] == inf) continue;
        for (std::size_t e = 0; e < graph[u].size(); ++e) {
          const Edge& ed = graph[u][e];
          if (ed.cap > 0 && dist[u] + ed.cost < dist[ed.to] - 1e-15) {
            dist[ed.to] = dist[u] + ed.cost;
            prev_node[ed.to] = u;
            prev_edge[ed.to] = e;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (dist[sink] == inf) break;  // all supply routed
    std::int64_t push = remaining;
    for (std::size_t v = sink; v != source; v = prev_node[v]) {
      push = std::min(push, graph[prev_node[v]][prev_edge[v]].cap);
    }
    for (std::size_t v = sink; v != source; v = prev_node[v]) {
      Edge& ed = graph[prev_node[v]][prev_edge[v]];
      ed.cap -= push;
      graph[v][ed.rev].cap += push;
    }
    remaining -= push;
  }

  TransportPlan result;
  result.n_rows = n;
  result.n_cols = m;
  result.reg_strength = 0.0;
  result.plan.assign(n * m, 0.0);
  result.cost = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (const Edge& ed : graph[1 + i]) {
      if (ed.to >= 1 + n && ed.to < 1 + n + m) {
        // Reverse edge capacity equals routed flow.
        const std::int64_t flow = graph[ed.to][ed.rev].cap;
        if (flow > 0) {
          const std::size_t j = ed.to - 1 - n;
          const double mass = static_cast<double>(flow) / static_cast<double>(kScale);
          result.plan[i * m + j] = mass;
          result.cost += mass * c.c(i, j);
        }
      }
    }
  }
  result.iterations_used = 0;
  result.marginal_residual = 0.0;
  return result;
}

double ot_divergence(const Dist& p, const Dist& q, const CostMatrix& c,
                     const SinkhornOptions& opts) {
  if (p.alphabet() != q.alphabet()) {
    throw AlphabetMismatch("ot_divergence: distributions on different alphabets");
  }
  if (c.row_alphabet() != p.alphabet() || c.col_alphabet() != p.alphabet()) {
    throw AlphabetMismatch("ot_divergence: cost must be square on the shared alphabet");
  }
  return sinkhorn(p, q, c, opts).cost;
}

}  // namespace ccup
