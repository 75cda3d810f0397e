#include "ccup/ib.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ccup/rng.hpp"

namespace ccup {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Kernel random_encoder_init(const Alphabet& from, std::size_t z_size, std::uint64_t seed) {
  // Perturbed uniform rows; symmetric inits stall at saddle points.
  Rng rng(seed);
  const Alphabet z = Alphabet::indexed(z_size, "z");
  std::vector<double> rows(from.size() * z_size);
  for (std::size_t r = 0; r < from.size(); ++r) {
    double total = 0.0;
    for (std::size_t k = 0; k < z_size; ++k) {
      rows[r * z_size + k] = 1.0 + 0.2 * rng.uniform();
      total += rows[r * z_size + k];
    }
    for (std::size_t k = 0; k < z_size; ++k) rows[r * z_size + k] /= total;
  }
  return Kernel(from, z, std::move(rows));
}

}  // namespace

IBSolution ib_fixed_point(const Joint& joint, std::size_t z_size, double beta,
                          const std::optional<Kernel>& init, const IBOptions& opts) {
  if (z_size < 1) throw InvalidDistribution("ib_fixed_point: z_size must be >= 1");
  if (!(beta > 0.0)) throw InvalidDistribution("ib_fixed_point: beta must be positive");

  const std::size_t nx = joint.row_alphabet().size();
  const std::size_t ny = joint.col_alphabet().size();
  const Dist px = joint.row_marginal();

  // p(y|x), rows of the data channel; zero-mass x rows are left uniform.
  std::vector<double> py_x(nx * ny, 0.0);
  for (std::size_t x = 0; x < nx; ++x) {
    if (px.p(x) > 0.0) {
      for (std::size_t y = 0; y < ny; ++y) py_x[x * ny + y] = joint.p(x, y) / px.p(x);
    } else {
      for (std::size_t y = 0; y < ny; ++y) py_x[x * ny + y] = 1.0 / static_cast<double>(ny);
    }
  }

  Kernel enc = init ? *init : random_encoder_init(joint.row_alphabet(), z_size, opts.init_seed);
  if (enc.from_alphabet() != joint.row_alphabet() || enc.to_alphabet().size() != z_size) {
    throw AlphabetMismatch("ib_fixed_point: init encoder shape mismatch");
  }
  std::vector<double> q = enc.table();  // q(z|x), row-major nx x z
  std::vector<double> qz(z_size), qy_z(z_size * ny);

  auto refresh_marginals = [&]() {
    std::fill(qz.begin(), qz.end(), 0.0);
    std::fill(qy_z.begin(), qy_z.end(), 0.0);
    for (std::size_t x = 0; x < nx; ++x) {
      for (std::size_t z = 0; z < z_size; ++z) {
        const double w = px.p(x) * q[x * z_size + z];
        qz[z] += w;
        for (std::size_t y = 0; y < ny; ++y) qy_z[z * ny + y] += w * py_x[x * ny + y];
      }
    }
    for (std::size_t z = 0; z < z_size; ++z) {
      if (qz[z] > 0.0) {
        for (std::size_t y = 0; y < ny; ++y) qy_z[z * ny + y] /= qz[z];
      }
    }
  };

  auto objective = [&]() {
    // I(X;Z) - beta * I(Z;Y) from the current encoder and its marginals.
    double ixz = 0.0, izy = 0.0;
    std::vector<double> qy(ny, 0.0);
    for (std::size_t z = 0; z < z_size; ++z) {
      for (std::size_t y = 0; y < ny; ++y) qy[y] += qz[z] * qy_z[z * ny + y];
    }
    for (std::size_t x = 0; x < nx; ++x) {
      for (std::size_t z = 0; z < z_size; ++z) {
        const double v = q[x * z_size + z];
        if (px.p(x) > 0.0 && v > 0.0 && qz[z] > 0.0) {
          ixz += px.p(x) * v * std::log(v / qz[z]);
        }
      }
    }
    for (std::size_t z = 0; z < z_size; ++z) {
      for (std::size_t y = 0; y < ny; ++y) {
        const double v = qy_z[z * ny + y];
        if (qz[z] > 0.0 && v > 0.0 && qy[y] > 0.0) {
          izy += qz[z] * v * std::log(v / qy[y]);
        }
      }
    }
    return ixz - beta * izy;
  };

  refresh_marginals();
  IBSolution out{enc, 0.0, 0.0, beta, 0, {}};
  out.objective_history.push_back(objective());

  double last_delta = kInf;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    // Encoder update: q(z|x) proportional to q(z) exp(-beta KL(p(y|x) || q(y|z))).
    for (std::size_t x = 0; x < nx; ++x) {
      double best = -kInf;
      std::vector<double> logits(z_size, -kInf);
      for (std::size_t z = 0; z < z_size; ++z) {
        if (qz[z] <= 0.0) continue;
        double kl = 0.0;
        bool feasible = true;
        for (std::size_t y = 0; y < ny; ++y) {
          const double p = py_x[x * ny + y];
          if (p > 0.0) {
            const double v = qy_z[z * ny + y];
            if (v <= 0.0) { feasible = false; break; }
            kl += p * std::log(p / v);
          }
        }
        if (!feasible) continue;
        logits[z] = std::log(qz[z]) - beta * kl;
        best = std::max(best, logits[z]);
      }
      if (best == -kInf) continue;  // no feasible cluster, keep the row
      double total = 0.0;
      for (std::size_t z = 0; z < z_size; ++z) {
        const double e = logits[z] == -kInf ? 0.0 : std::exp(logits[z] - best);
        q[x * z_size + z] = e;
        total += e;
      }
      for (std::size_t z = 0; z < z_size; ++z) q[x * z_size + z] /= total;
    }
    refresh_marginals();
    const double obj = objective();
    last_delta = std::abs(out.objective_history.back() - obj);
    out.objective_history.push_back(obj);
    if (last_delta < opts.tol) {
      ++it;
      break;
    }
  }
  if (last_delta >= opts.tol && opts.throw_on_nonconvergence) {
    std::ostringstream os;
    os << "ib_fixed_point: objective delta " << last_delta << " above tol "
       << opts.tol << " after " << it << " iterations";
    throw IBNonConvergence(os.str(), last_delta);
  }

  out.encoder = Kernel(joint.row_alphabet(), Alphabet::indexed(z_size, "z"), q);
  out.iterations = it;
  out.compression = mutual_information(Joint::from_kernel(px, out.encoder));
  // Relevance from the induced (Z, Y) joint.
  {
    std::vector<double> zy(z_size * ny, 0.0);
    for (std::size_t z = 0; z < z_size; ++z) {
      for (std::size_t y = 0; y < ny; ++y) zy[z * ny + y] = qz[z] * qy_z[z * ny + y];
    }
    out.relevance = mutual_information(
        Joint(Alphabet::indexed(z_size, "z"), joint.col_alphabet(), std::move(zy)));
  }
  return out;
}

std::vector<double> BetaGrid::values() const {
  std::vector<double> v(points);
  if (points == 1) {
    v[0] = beta_min;
    return v;
  }
  const double step = std::log(beta_max / beta_min) / static_cast<double>(points - 1);
  for (int i = 0; i < points; ++i) v[i] = beta_min * std::exp(step * i);
  return v;
}

IBSolution constrained_ib(const Joint& joint, std::size_t z_size,
                          double relevance_floor, const BetaGrid& grid,
                          const IBOptions& opts) {
  const double total_mi = mutual_information(joint);
  if (relevance_floor > total_mi + 1e-9) {
    throw Infeasible("constrained_ib: relevance floor exceeds I(X;Y)");
  }
  std::optional<IBSolution> best;
  for (double beta : grid.values()) {
    IBOptions point_opts = opts;
    point_opts.throw_on_nonconvergence = false;  // a stalled grid point is skipped
    IBSolution sol = ib_fixed_point(joint, z_size, beta, std::nullopt, point_opts);
    if (sol.relevance + 1e-12 >= relevance_floor) {
      if (!best || sol.compression < best->compression) best = std::move(sol);
    }
  }
  if (!best) {
    throw Infeasible("constrained_ib: no beta on the grid meets the relevance floor");
  }
  return *best;
}

double variational_free_energy(const Kernel& recognition, const Kernel& likelihood,
                               const Kernel& prior, std::size_t phi,
                               const Dist& psi_dist) {
  // recognition: Psi -> Z, likelihood: Z -> Psi, prior: Phi -> Z.
  if (recognition.to_alphabet() != likelihood.from_alphabet() ||
      recognition.to_alphabet() != prior.to_alphabet() ||
      recognition.from_alphabet() != likelihood.to_alphabet() ||
      psi_dist.alphabet() != recognition.from_alphabet()) {
    throw AlphabetMismatch("variational_free_energy: inconsistent alphabet chain");
  }
  if (phi >= prior.from_alphabet().size()) {
    throw AlphabetMismatch("variational_free_energy: phi index out of range");
  }
  const std::size_t nz = recognition.to_alphabet().size();
  double total = 0.0;
  for (std::size_t psi = 0; psi < psi_dist.size(); ++psi) {
    if (psi_dist.p(psi) <= 0.0) continue;
    double term = 0.0;
    for (std::size_t z = 0; z < nz; ++z) {
      const double qz = recognition.p(psi, z);
      if (qz <= 0.0) continue;
      const double like = likelihood.p(z, psi);
      if (like <= 0.0) {
        throw ZeroLikelihood("variational_free_energy: p(psi|z) = 0 on evaluated entry");
      }
      const double pz = prior.p(phi, z);
      if (pz <= 0.0) {
        throw AbsoluteContinuityViolation(
            "variational_free_energy: q(z|psi) > 0 where prior p(z|phi) = 0");
      }
      term += qz * (-std::log(like) + std::log(qz / pz));
    }
    total += psi_dist.p(psi) * term;
  }
  return total;
}

}  // namespace ccup
