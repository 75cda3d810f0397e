#include "ccup/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "ccup/agents.hpp"
#include "ccup/dynamics.hpp"
#include "ccup/hierarchy.hpp"
#include "ccup/ib.hpp"
#include "ccup/prob.hpp"
#include "ccup/transport.hpp"

namespace ccup {

const char* kLibraryVersion = "ccup-lab 0.1.0";

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  return buf;
}

namespace {

const std::vector<std::string> kKinds = {"temporal",  "inverted", "half_cycle",
                                         "hierarchy", "emergence", "oscillator",
                                         "ib_curve",  "ot_check"};

void check_field(const json& cfg, const std::string& kind, const std::string& field,
                 const char* type, std::vector<std::string>& errors) {
  if (!cfg.contains(field)) {
    errors.push_back("missing field '" + field + "' for kind '" + kind + "'");
    return;
  }
  const json& v = cfg.at(field);
  const std::string t = type;
  bool ok = (t == "number" && v.is_number()) || (t == "integer" && v.is_number_integer()) ||
            (t == "string" && v.is_string()) || (t == "array" && v.is_array()) ||
            (t == "object" && v.is_object()) || (t == "boolean" && v.is_boolean());
  if (!ok) {
    errors.push_back("field '" + field + "' for kind '" + kind + "' must be a " + t);
  }
}

bool has_seed(const json& cfg) {
  return cfg.contains("seed") || cfg.contains("seeds");
}

std::vector<std::uint64_t> resolve_seeds(const json& cfg, const RunOptions& opts) {
  if (opts.seed_range_override) {
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = opts.seed_range_override->first;
         s <= opts.seed_range_override->second; ++s) {
      seeds.push_back(s);
    }
    return seeds;
  }
  if (opts.seed_override) return {*opts.seed_override};
  if (cfg.contains("seeds")) {
    const json& block = cfg.at("seeds");
    std::vector<std::uint64_t> seeds;
    if (block.is_array()) {
      for (const auto& s : block) seeds.push_back(s.get<std::uint64_t>());
    } else {
      for (std::uint64_t s = block.at("from").get<std::uint64_t>();
           s <= block.at("to").get<std::uint64_t>(); ++s) {
        seeds.push_back(s);
      }
    }
    return seeds;
  }
  return {cfg.at("seed").get<std::uint64_t>()};
}

int thread_cap(const RunOptions& opts) {
  if (opts.max_threads > 0) return opts.max_threads;
  if (const char* env = std::getenv("CCUP_LAB_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

Alphabet alphabet_from(const json& labels) {
  return Alphabet(labels.get<std::vector<std::string>>());
}

std::vector<double> flatten_matrix(const json& rows) {
  std::vector<double> flat;
  for (const auto& row : rows) {
    for (const auto& v : row) flat.push_back(v.get<double>());
  }
  return flat;
}

Kernel kernel_from(const json& rows, const Alphabet& from, const Alphabet& to) {
  return Kernel(from, to, flatten_matrix(rows));
}

CostMatrix cost_from(const json& spec, const Alphabet& a) {
  if (spec.is_string()) {
    if (spec.get<std::string>() == "zero_one") return CostMatrix::zero_one(a);
    throw ConfigError("unknown cost preset '" + spec.get<std::string>() + "'");
  }
  return CostMatrix(a, a, flatten_matrix(spec));
}

void validate_matrix(const json& cfg, const std::string& kind, const std::string& field,
                     std::size_t rows, std::size_t cols,
                     std::vector<std::string>& errors) {
  if (!cfg.contains(field) || !cfg.at(field).is_array()) return;  // caught elsewhere
  const json& m = cfg.at(field);
  if (m.size() != rows) {
    errors.push_back("field '" + field + "' for kind '" + kind + "': declared " +
                     std::to_string(rows) + " rows but matrix has " +
                     std::to_string(m.size()));
    return;
  }
  for (const auto& row : m) {
    if (!row.is_array() || row.size() != cols) {
      errors.push_back("field '" + field + "' for kind '" + kind + "': declared " +
                       std::to_string(cols) + " columns but a row has " +
                       std::to_string(row.size()));
      return;
    }
  }
}

// ---------------------------------------------------------------------------
// Trace output

void write_trace(const InferenceTrace& trace, const std::string& path,
                 const std::string& format) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file " + path);
  auto verdict_text = [&]() -> std::string {
    switch (trace.verdict.kind) {
      case VerdictKind::kConverged:
        return "converged(t=" + std::to_string(trace.verdict.t_star) + ")";
      case VerdictKind::kLimitCycle:
        return "limit_cycle(period=" + std::to_string(trace.verdict.period) + ")";
      default:
        return "diverged";
    }
  };
  if (format == "json") {
    json steps = json::array();
    for (const auto& s : trace.steps) {
      json step{{"t", s.t}};
      step["state_label"] = s.state_label;
      step["objective"] = std::isnan(s.objective) ? json() : json(s.objective);
      step["cond_entropy_nats"] = std::isnan(s.cond_entropy) ? json() : json(s.cond_entropy);
      step["kl_step_nats"] = std::isnan(s.kl_step) ? json() : json(s.kl_step);
      step["variance"] = std::isnan(s.variance) ? json() : json(s.variance);
      steps.push_back(std::move(step));
    }
    out << json{{"steps", steps}, {"verdict", verdict_text()}}.dump(2) << "\n";
    return;
  }
  out << "t,state_label,objective,cond_entropy_nats,kl_step_nats,variance\n";
  auto cell = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
  for (const auto& s : trace.steps) {
    out << s.t << "," << s.state_label << "," << cell(s.objective) << ","
        << cell(s.cond_entropy) << "," << cell(s.kl_step) << "," << cell(s.variance)
        << "\n";
  }
  out << "# verdict," << verdict_text() << "\n";
}

void write_manifest(const json& config, const std::string& out_dir,
                    const std::string& verdict) {
  json manifest{{"config", config}, {"library_version", kLibraryVersion},
                {"verdict", verdict}};
  std::ofstream out(fs::path(out_dir) / "manifest.json");
  out << manifest.dump(2) << "\n";
}

int verdict_exit(const Verdict& v) {
  return v.kind == VerdictKind::kConverged ? 0 : 2;
}

std::string verdict_word(const Verdict& v) {
  switch (v.kind) {
    case VerdictKind::kConverged: return "converged";
    case VerdictKind::kLimitCycle: return "limit_cycle";
    default: return "diverged";
  }
}

// ---------------------------------------------------------------------------
// Per-kind validators

void validate_oscillator(const json& cfg, std::vector<std::string>& errors) {
  check_field(cfg, "oscillator", "radius", "number", errors);
  check_field(cfg, "oscillator", "omega", "number", errors);
  check_field(cfg, "oscillator", "x0", "array", errors);
  check_field(cfg, "oscillator", "max_t", "integer", errors);
  check_field(cfg, "oscillator", "tol", "number", errors);
  if (cfg.contains("x0") && cfg.at("x0").is_array() && cfg.at("x0").size() != 2) {
    errors.push_back("field 'x0' for kind 'oscillator' must have 2 entries");
  }
}

void validate_temporal(const json& cfg, std::vector<std::string>& errors) {
  check_field(cfg, "temporal", "labels", "array", errors);
  check_field(cfg, "temporal", "entropies", "array", errors);
  check_field(cfg, "temporal", "lambda", "number", errors);
  check_field(cfg, "temporal", "max_t", "integer", errors);
  if (cfg.contains("labels") && cfg.contains("entropies") && cfg.at("labels").is_array() &&
      cfg.at("entropies").is_array() &&
      cfg.at("labels").size() != cfg.at("entropies").size()) {
    errors.push_back("kind 'temporal': declared " + std::to_string(cfg.at("labels").size()) +
                     " labels but " + std::to_string(cfg.at("entropies").size()) +
                     " entropies");
  }
}

void validate_inverted(const json& cfg, std::vector<std::string>& errors) {
  check_field(cfg, "inverted", "candidates", "array", errors);
  check_field(cfg, "inverted", "psi_labels", "array", errors);
  check_field(cfg, "inverted", "kernel", "array", errors);
  check_field(cfg, "inverted", "lambda", "number", errors);
  check_field(cfg, "inverted", "regularizer", "string", errors);
  check_field(cfg, "inverted", "start", "string", errors);
  check_field(cfg, "inverted", "max_t", "integer", errors);
  if (cfg.contains("candidates") && cfg.contains("psi_labels") &&
      cfg.at("candidates").is_array() && cfg.at("psi_labels").is_array()) {
    validate_matrix(cfg, "inverted", "kernel", cfg.at("candidates").size(),
                    cfg.at("psi_labels").size(), errors);
  }
  if (cfg.contains("regularizer") && cfg.at("regularizer").is_string()) {
    const std::string r = cfg.at("regularizer").get<std::string>();
    if (r != "kl" && r != "ot") {
      errors.push_back("kind 'inverted': regularizer must be 'kl' or 'ot'");
    }
  }
}

void validate_half_cycle(const json& cfg, std::vector<std::string>& errors) {
  for (const char* f : {"phi_labels", "z_labels", "psi_labels", "pz_phi", "ppsi_z"}) {
    check_field(cfg, "half_cycle", f, "array", errors);
  }
  check_field(cfg, "half_cycle", "start", "string", errors);
  check_field(cfg, "half_cycle", "max_t", "integer", errors);
  check_field(cfg, "half_cycle", "mode", "string", errors);
  if (cfg.contains("phi_labels") && cfg.contains("z_labels") && cfg.contains("psi_labels") &&
      cfg.at("phi_labels").is_array() && cfg.at("z_labels").is_array() &&
      cfg.at("psi_labels").is_array()) {
    validate_matrix(cfg, "half_cycle", "pz_phi", cfg.at("phi_labels").size(),
                    cfg.at("z_labels").size(), errors);
    validate_matrix(cfg, "half_cycle", "ppsi_z", cfg.at("z_labels").size(),
                    cfg.at("psi_labels").size(), errors);
  }
}

void validate_hierarchy(const json& cfg, std::vector<std::string>& errors) {
  check_field(cfg, "hierarchy", "leaves", "array", errors);
  check_field(cfg, "hierarchy", "levels", "array", errors);
  check_field(cfg, "hierarchy", "steps", "integer", errors);
  if (!cfg.contains("leaves") || !cfg.at("leaves").is_array()) return;
  std::size_t idx = 0;
  for (const auto& leaf : cfg.at("leaves")) {
    const std::string ctx = "hierarchy leaf " + std::to_string(idx++);
    for (const char* f : {"labels", "psi_labels", "kernel"}) {
      if (!leaf.contains(f)) errors.push_back("missing field '" + std::string(f) + "' in " + ctx);
    }
    if (!leaf.contains("lambda") || !leaf.at("lambda").is_number()) {
      errors.push_back("missing field 'lambda' in " + ctx);
    }
    if (leaf.contains("labels") && leaf.contains("psi_labels") && leaf.contains("kernel") &&
        leaf.at("labels").is_array() && leaf.at("psi_labels").is_array()) {
      validate_matrix(leaf, ctx, "kernel", leaf.at("labels").size(),
                      leaf.at("psi_labels").size(), errors);
    }
  }
  if (cfg.contains("levels") && cfg.at("levels").is_array()) {
    idx = 0;
    for (const auto& level : cfg.at("levels")) {
      const std::string ctx = "hierarchy level " + std::to_string(idx++);
      for (const char* f : {"arity", "child_labels", "parent_labels", "compose",
                            "psi_labels", "kernel"}) {
        if (!level.contains(f)) {
          errors.push_back("missing field '" + std::string(f) + "' in " + ctx);
        }
      }
    }
  }
}

void validate_emergence(const json& cfg, std::vector<std::string>& errors) {
  check_field(cfg, "emergence", "factors", "array", errors);
  check_field(cfg, "emergence", "vocab", "array", errors);
  check_field(cfg, "emergence", "n_agents", "integer", errors);
  check_field(cfg, "emergence", "rounds", "integer", errors);
  check_field(cfg, "emergence", "lambda", "number", errors);
  if (cfg.contains("factors") && cfg.contains("vocab") && cfg.at("factors").is_array() &&
      cfg.at("vocab").is_array()) {
    if (cfg.at("factors").size() != cfg.at("vocab").size()) {
      errors.push_back("kind 'emergence': declared " +
                       std::to_string(cfg.at("factors").size()) + " factors but " +
                       std::to_string(cfg.at("vocab").size()) + " vocabularies");
    } else {
      for (std::size_t i = 0; i < cfg.at("factors").size(); ++i) {
        if (cfg.at("vocab")[i].size() < cfg.at("factors")[i].size()) {
          errors.push_back("kind 'emergence': vocabulary " + std::to_string(i) +
                           " has " + std::to_string(cfg.at("vocab")[i].size()) +
                           " symbols for " + std::to_string(cfg.at("factors")[i].size()) +
                           " meanings");
        }
      }
    }
  }
}

void validate_ib_curve(const json& cfg, std::vector<std::string>& errors) {
  check_field(cfg, "ib_curve", "joint", "object", errors);
  check_field(cfg, "ib_curve", "z_size", "integer", errors);
  if (cfg.contains("joint") && cfg.at("joint").is_object()) {
    for (const char* f : {"row_labels", "col_labels", "table"}) {
      if (!cfg.at("joint").contains(f)) {
        errors.push_back("missing field 'joint." + std::string(f) + "' for kind 'ib_curve'");
      }
    }
  }
}

void validate_ot_check(const json& cfg, std::vector<std::string>& errors) {
  check_field(cfg, "ot_check", "mu", "object", errors);
  check_field(cfg, "ot_check", "nu", "object", errors);
  check_field(cfg, "ot_check", "reg", "number", errors);
  if (!cfg.contains("cost")) {
    errors.push_back("missing field 'cost' for kind 'ot_check'");
  }
  for (const char* d : {"mu", "nu"}) {
    if (cfg.contains(d) && cfg.at(d).is_object()) {
      for (const char* f : {"labels", "probs"}) {
        if (!cfg.at(d).contains(f)) {
          errors.push_back("missing field '" + std::string(d) + "." + f +
                           "' for kind 'ot_check'");
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Per-kind runners (validated configs only)

int run_oscillator(const json& cfg, const RunOptions& opts) {
  const double radius = cfg.at("radius").get<double>();
  const double omega = cfg.at("omega").get<double>();
  const double gain = cfg.value("stim_gain", 1.0);
  const std::vector<double> x0 = cfg.at("x0").get<std::vector<double>>();
  const double scale = radius * gain;
  StateUpdate F = [scale, omega](const std::vector<double>& v) {
    return std::vector<double>{scale * (std::cos(omega) * v[0] - std::sin(omega) * v[1]),
                               scale * (std::sin(omega) * v[0] + std::cos(omega) * v[1])};
  };
  const InferenceTrace trace = bootstrap_iterate(F, x0, cfg.at("max_t").get<int>(),
                                                 cfg.at("tol").get<double>());
  write_trace(trace, (fs::path(opts.out_dir) / ("trace." + opts.format)).string(),
              opts.format);
  write_manifest(cfg, opts.out_dir, verdict_word(trace.verdict));
  return verdict_exit(trace.verdict);
}

int run_temporal_kind(const json& cfg, const RunOptions& opts) {
  const Alphabet a = alphabet_from(cfg.at("labels"));
  Dist init = cfg.contains("init") && cfg.at("init").is_array()
                  ? Dist(a, cfg.at("init").get<std::vector<double>>())
                  : Dist::uniform(a);
  const InferenceTrace trace =
      run_temporal(init, cfg.at("entropies").get<std::vector<double>>(),
                   cfg.at("lambda").get<double>(), cfg.at("max_t").get<int>());
  write_trace(trace, (fs::path(opts.out_dir) / ("trace." + opts.format)).string(),
              opts.format);
  write_manifest(cfg, opts.out_dir, verdict_word(trace.verdict));
  return verdict_exit(trace.verdict);
}

int run_inverted_kind(const json& cfg, const RunOptions& opts) {
  const Alphabet candidates = alphabet_from(cfg.at("candidates"));
  const Alphabet psi = alphabet_from(cfg.at("psi_labels"));
  const Kernel kernel = kernel_from(cfg.at("kernel"), candidates, psi);
  UpdateSpec spec;
  spec.lambda = cfg.at("lambda").get<double>();
  if (cfg.at("regularizer").get<std::string>() == "kl") {
    spec.regularizer = ProximalKind::kKlProx;
  } else {
    spec.regularizer = ProximalKind::kOtProx;
    spec.cost = cost_from(cfg.value("cost", json("zero_one")), psi);
    spec.sinkhorn_opts.reg = cfg.value("reg", 0.05);
  }
  const std::size_t start = candidates.index_of(cfg.at("start").get<std::string>());
  const InferenceTrace trace = run_inverted(start, kernel, spec, cfg.at("max_t").get<int>());
  write_trace(trace, (fs::path(opts.out_dir) / ("trace." + opts.format)).string(),
              opts.format);
  write_manifest(cfg, opts.out_dir, verdict_word(trace.verdict));
  return verdict_exit(trace.verdict);
}

int run_half_cycle_kind(const json& cfg, const RunOptions& opts) {
  const Alphabet phi = alphabet_from(cfg.at("phi_labels"));
  const Alphabet z = alphabet_from(cfg.at("z_labels"));
  const Alphabet psi = alphabet_from(cfg.at("psi_labels"));
  const Kernel pz_phi = kernel_from(cfg.at("pz_phi"), phi, z);
  const Kernel ppsi_z = kernel_from(cfg.at("ppsi_z"), z, psi);
  const Kernel qz_psi = cfg.contains("qz_psi") && cfg.at("qz_psi").is_array()
                            ? kernel_from(cfg.at("qz_psi"), psi, z)
                            : bayes_invert(ppsi_z, Dist::uniform(z));
  const Kernel qphi_z = cfg.contains("qphi_z") && cfg.at("qphi_z").is_array()
                            ? kernel_from(cfg.at("qphi_z"), z, phi)
                            : bayes_invert(pz_phi, Dist::uniform(phi));
  const bool sampled = cfg.at("mode").get<std::string>() == "sampled";
  Rng rng(cfg.value("seed", std::uint64_t{0}));

  InferenceTrace trace;
  std::size_t cur = phi.index_of(cfg.at("start").get<std::string>());
  auto record = [&](int t, std::size_t state, double err) {
    TraceStep step;
    step.t = t;
    step.state_label = phi.label(state);
    step.state = {static_cast<double>(state)};
    step.cond_entropy = entropy(
        pushforward(pz_phi.row(state), ppsi_z));
    step.objective = err;
    trace.steps.push_back(std::move(step));
  };
  record(0, cur, std::numeric_limits<double>::quiet_NaN());
  const int max_t = cfg.at("max_t").get<int>();
  for (int t = 1; t <= max_t; ++t) {
    const HalfCycleResult res =
        half_cycle_step(cur, pz_phi, ppsi_z, qz_psi, qphi_z, sampled ? &rng : nullptr);
    record(t, res.phi_next, total_variation(res.psi_prediction,
                                            pushforward(pz_phi.row(res.phi_next), ppsi_z)));
    if (!sampled && res.phi_next == cur) {
      trace.verdict = {VerdictKind::kConverged, t, 0};
      break;
    }
    cur = res.phi_next;
  }
  if (trace.verdict.kind != VerdictKind::kConverged && sampled) {
    trace.verdict = {VerdictKind::kConverged, max_t, 0};  // sampled runs report the path
  }
  write_trace(trace, (fs::path(opts.out_dir) / ("trace." + opts.format)).string(),
              opts.format);
  write_manifest(cfg, opts.out_dir, verdict_word(trace.verdict));
  return verdict_exit(trace.verdict);
}

int run_hierarchy_kind(const json& cfg, const RunOptions& opts) {
  HierarchyScenario scenario;
  for (const auto& leaf : cfg.at("leaves")) {
    const Alphabet labels = alphabet_from(leaf.at("labels"));
    const Alphabet psi = alphabet_from(leaf.at("psi_labels"));
    UpdateSpec spec;
    spec.lambda = leaf.at("lambda").get<double>();
    spec.regularizer = ProximalKind::kOtProx;
    spec.cost = cost_from(leaf.value("cost", json("zero_one")), psi);
    spec.sinkhorn_opts.reg = leaf.value("reg", 0.05);
    scenario.leaves.push_back({kernel_from(leaf.at("kernel"), labels, psi), spec,
                               labels.index_of(leaf.at("start").get<std::string>())});
  }
  for (const auto& level : cfg.at("levels")) {
    LayerSpec spec;
    spec.arity = level.at("arity").get<std::size_t>();
    spec.child_alphabet = alphabet_from(level.at("child_labels"));
    spec.parent_alphabet = alphabet_from(level.at("parent_labels"));
    for (const auto& label : level.at("compose")) {
      spec.compose_table.push_back(spec.parent_alphabet.index_of(label.get<std::string>()));
    }
    const Alphabet psi = alphabet_from(level.at("psi_labels"));
    HierarchyNode node{spec, kernel_from(level.at("kernel"), spec.parent_alphabet, psi),
                       level.value("epsilon_drift", 0.1)};
    scenario.upper_levels.push_back({std::move(node)});
  }
  const HierarchicalRunResult result = hierarchical_run(scenario, cfg.at("steps").get<int>());

  bool all_converged = true;
  for (std::size_t i = 0; i < result.leaf_traces.size(); ++i) {
    write_trace(result.leaf_traces[i],
                (fs::path(opts.out_dir) / ("trace_L1_leaf" + std::to_string(i) + "." +
                                           opts.format)).string(),
                opts.format);
    all_converged =
        all_converged && result.leaf_traces[i].verdict.kind == VerdictKind::kConverged;
  }
  for (std::size_t level = 0; level < result.level_entropy.size(); ++level) {
    std::ofstream out(fs::path(opts.out_dir) /
                      ("trace_L" + std::to_string(level + 1) + ".csv"));
    out << "t,cond_entropy_nats\n";
    for (std::size_t t = 0; t < result.level_entropy[level].size(); ++t) {
      out << t << "," << format_double(result.level_entropy[level][t]) << "\n";
    }
  }
  json fixed = json::array();
  for (const auto& level : result.fixed_points) fixed.push_back(level);
  json summary{{"fixed_points", fixed},
               {"kl_drift_exceeded", result.kl_drift_exceeded},
               {"all_leaves_converged", all_converged}};
  std::ofstream(fs::path(opts.out_dir) / "summary.json") << summary.dump(2) << "\n";
  write_manifest(cfg, opts.out_dir, all_converged ? "converged" : "diverged");
  return all_converged ? 0 : 2;
}

int run_emergence_kind(const json& cfg, const RunOptions& opts) {
  EmergenceConfig config;
  for (const auto& factor : cfg.at("factors")) {
    config.world.factors.push_back(alphabet_from(factor));
  }
  for (const auto& vocab : cfg.at("vocab")) {
    config.world.vocab.push_back(alphabet_from(vocab));
  }
  config.n_agents = cfg.at("n_agents").get<std::size_t>();
  config.rounds = cfg.at("rounds").get<int>();
  config.params.lambda = cfg.at("lambda").get<double>();
  config.params.smoothing = cfg.value("alpha", 0.1);
  config.params.eta = cfg.value("eta", 1.0);
  config.params.decay = cfg.value("decay", 0.05);
  config.params.epsilon_start = cfg.value("epsilon_start", 0.3);
  config.params.epsilon_end = cfg.value("epsilon_end", 0.05);
  config.metrics_every = cfg.value("metrics_every", 100);

  const std::vector<std::uint64_t> seeds = resolve_seeds(cfg, opts);
  std::vector<EmergenceResult> results(seeds.size());
  const int cap = std::max(1, thread_cap(opts));
  std::size_t next = 0;
  std::mutex mutex;
  auto worker = [&]() {
    for (;;) {
      std::size_t idx;
      {
        std::lock_guard<std::mutex> lock(mutex);
        if (next >= seeds.size()) return;
        idx = next++;
      }
      results[idx] = run_emergence(config, seeds[idx]);
    }
  };
  std::vector<std::thread> pool;
  for (int i = 0; i < std::min<int>(cap, static_cast<int>(seeds.size())); ++i) {
    pool.emplace_back(worker);
  }
  for (auto& t : pool) t.join();

  // Deterministic ordered join over seed order.
  std::ofstream out(fs::path(opts.out_dir) / ("emergence." + opts.format));
  if (opts.format == "json") {
    json rows = json::array();
    for (const auto& r : results) {
      for (const auto& s : r.series) {
        rows.push_back({{"seed", r.seed}, {"round", s.round},
                        {"accuracy", s.metrics.accuracy},
                        {"mi_nats", s.metrics.mutual_information},
                        {"deltaness", s.metrics.deltaness},
                        {"compositionality", s.metrics.compositionality},
                        {"objective", s.metrics.objective}});
      }
    }
    out << rows.dump(2) << "\n";
  } else {
    out << "seed,round,accuracy,mi_nats,deltaness,compositionality,objective\n";
    for (const auto& r : results) {
      for (const auto& s : r.series) {
        out << r.seed << "," << s.round << "," << format_double(s.metrics.accuracy) << ","
            << format_double(s.metrics.mutual_information) << ","
            << format_double(s.metrics.deltaness) << ","
            << format_double(s.metrics.compositionality) << ","
            << format_double(s.metrics.objective) << "\n";
      }
    }
  }

  std::size_t solved = 0;
  json codebooks = json::array();
  for (const auto& r : results) {
    solved += r.solved ? 1 : 0;
    json maps = json::array();
    for (std::size_t slot = 0; slot < r.codebook.size(); ++slot) {
      json map;
      for (std::size_t m = 0; m < r.codebook[slot].size(); ++m) {
        map[config.world.factors[slot].label(m)] =
            config.world.vocab[slot].label(r.codebook[slot][m]);
      }
      maps.push_back(std::move(map));
    }
    codebooks.push_back({{"seed", r.seed}, {"solved", r.solved},
                         {"trailing_accuracy", r.trailing_accuracy},
                         {"slots", std::move(maps)}});
  }
  const double fraction = static_cast<double>(solved) / static_cast<double>(seeds.size());
  json summary{{"seeds", seeds.size()}, {"solved", solved},
               {"solved_fraction", fraction}};
  std::ofstream(fs::path(opts.out_dir) / "summary.json") << summary.dump(2) << "\n";
  std::ofstream(fs::path(opts.out_dir) / "codebooks.json") << codebooks.dump(2) << "\n";
  const bool ok = fraction >= cfg.value("solved_fraction_min", 0.8);
  write_manifest(cfg, opts.out_dir, ok ? "solved" : "unsolved");
  return ok ? 0 : 2;
}

int run_ib_curve_kind(const json& cfg, const RunOptions& opts) {
  // The table may be given flat or as nested rows.
  const json& jj = cfg.at("joint");
  const json& table = jj.at("table");
  const Joint joint(Alphabet(jj.at("row_labels").get<std::vector<std::string>>()),
                    Alphabet(jj.at("col_labels").get<std::vector<std::string>>()),
                    !table.empty() && table.front().is_array()
                        ? flatten_matrix(table)
                        : table.get<std::vector<double>>());
  const std::size_t z_size = cfg.at("z_size").get<std::size_t>();
  BetaGrid grid;
  if (cfg.contains("beta_grid")) {
    grid.beta_min = cfg.at("beta_grid").value("min", 1e-3);
    grid.beta_max = cfg.at("beta_grid").value("max", 1e3);
    grid.points = cfg.at("beta_grid").value("points", 24);
  }
  IBOptions ib_opts;
  ib_opts.max_iter = cfg.value("max_iter", 10000);
  ib_opts.tol = cfg.value("tol", 1e-10);
  ib_opts.init_seed = cfg.value("init_seed", std::uint64_t{0});
  ib_opts.throw_on_nonconvergence = false;

  std::ofstream out(fs::path(opts.out_dir) / "ib_curve.csv");
  out << "beta,compression_nats,relevance_nats,iterations\n";
  for (double beta : grid.values()) {
    const IBSolution sol = ib_fixed_point(joint, z_size, beta, std::nullopt, ib_opts);
    out << format_double(beta) << "," << format_double(sol.compression) << ","
        << format_double(sol.relevance) << "," << sol.iterations << "\n";
  }
  write_manifest(cfg, opts.out_dir, "converged");
  return 0;
}

int run_ot_check_kind(const json& cfg, const RunOptions& opts) {
  const Dist mu = Dist::from_json(cfg.at("mu"));
  const Dist nu = Dist::from_json(cfg.at("nu"));
  const CostMatrix cost = cfg.at("cost").is_string()
                              ? cost_from(cfg.at("cost"), mu.alphabet())
                              : CostMatrix(mu.alphabet(), nu.alphabet(),
                                           flatten_matrix(cfg.at("cost")));
  SinkhornOptions sk;
  sk.reg = cfg.at("reg").get<double>();
  sk.tol = cfg.value("tol", 1e-9);
  sk.max_iter = cfg.value("max_iter", 10000);
  const TransportPlan approx = sinkhorn(mu, nu, cost, sk);
  const TransportPlan exact = exact_ot(mu, nu, cost);

  std::ofstream out(fs::path(opts.out_dir) / "ot_check.csv");
  out << "sinkhorn_cost,exact_cost,gap,marginal_residual,iterations\n";
  out << format_double(approx.cost) << "," << format_double(exact.cost) << ","
      << format_double(approx.cost - exact.cost) << ","
      << format_double(approx.marginal_residual) << "," << approx.iterations_used << "\n";
  write_manifest(cfg, opts.out_dir, "converged");
  return 0;
}

}  // namespace

ValidationReport validate_config(const json& config) {
  ValidationReport report;
  if (!config.is_object()) {
    report.errors.push_back("config root must be an object");
    return report;
  }
  if (!config.contains("schema_version")) {
    report.errors.push_back("missing field 'schema_version'");
  } else if (config.at("schema_version") != 1) {
    report.errors.push_back("unsupported schema_version (expected 1)");
  }
  if (!config.contains("kind") || !config.at("kind").is_string()) {
    report.errors.push_back("missing or non-string field 'kind'");
    return report;
  }
  const std::string kind = config.at("kind").get<std::string>();
  if (std::find(kKinds.begin(), kKinds.end(), kind) == kKinds.end()) {
    report.errors.push_back("unknown kind '" + kind + "'");
    return report;
  }
  if (!has_seed(config) && kind != "ib_curve" && kind != "ot_check") {
    report.errors.push_back("missing field 'seed' (or 'seeds') for kind '" + kind +
                            "'; wall-clock defaults are not allowed");
  }
  if (kind == "oscillator") validate_oscillator(config, report.errors);
  else if (kind == "temporal") validate_temporal(config, report.errors);
  else if (kind == "inverted") validate_inverted(config, report.errors);
  else if (kind == "half_cycle") validate_half_cycle(config, report.errors);
  else if (kind == "hierarchy") validate_hierarchy(config, report.errors);
  else if (kind == "emergence") validate_emergence(config, report.errors);
  else if (kind == "ib_curve") validate_ib_curve(config, report.errors);
  else if (kind == "ot_check") validate_ot_check(config, report.errors);
  return report;
}

nlohmann::json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // Convert the byte offset into a line number for the message.
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i) {
      if (text[i] == '\n') ++line;
    }
    throw ConfigError(path + ":" + std::to_string(line) + ": " + e.what());
  }
}

int run_scenario(const json& config, const RunOptions& options) {
  const ValidationReport report = validate_config(config);
  if (!report.ok()) {
    std::string all;
    for (const auto& e : report.errors) all += e + "\n";
    throw ConfigError(all);
  }
  fs::create_directories(options.out_dir);
  const std::string kind = config.at("kind").get<std::string>();

  // Single-trace kinds with several seeds fan out into per-seed directories.
  if (kind != "emergence" && kind != "ib_curve" && kind != "ot_check") {
    const std::vector<std::uint64_t> seeds = resolve_seeds(config, options);
    if (seeds.size() > 1) {
      int worst = 0;
      for (std::uint64_t seed : seeds) {
        RunOptions sub = options;
        sub.out_dir = (fs::path(options.out_dir) / ("seed_" + std::to_string(seed))).string();
        sub.seed_override = seed;
        sub.seed_range_override.reset();
        fs::create_directories(sub.out_dir);
        json sub_cfg = config;
        sub_cfg.erase("seeds");
        sub_cfg["seed"] = seed;
        worst = std::max(worst, run_scenario(sub_cfg, sub));
      }
      return worst;
    }
    json cfg = config;
    cfg["seed"] = seeds.front();
    cfg.erase("seeds");
    if (kind == "oscillator") return run_oscillator(cfg, options);
    if (kind == "temporal") return run_temporal_kind(cfg, options);
    if (kind == "inverted") return run_inverted_kind(cfg, options);
    if (kind == "half_cycle") return run_half_cycle_kind(cfg, options);
    if (kind == "hierarchy") return run_hierarchy_kind(cfg, options);
  }
  if (kind == "emergence") return run_emergence_kind(config, options);
  if (kind == "ib_curve") return run_ib_curve_kind(config, options);
  return run_ot_check_kind(config, options);
}

}  // namespace ccup
