#include "cltlab/rate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "cltlab/cf.hpp"
#include "cltlab/chain.hpp"
#include "cltlab/chain_io.hpp"
#include "cltlab/fourier.hpp"
#include "cltlab/normal.hpp"
#include "cltlab/poisson.hpp"

namespace cltlab {

namespace {

// ---------------------------------------------------------------------------
// Deterministic seeding and worker scheduling
// ---------------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                          std::uint64_t b) {
  return splitmix64(splitmix64(seed ^ (a * 0x9e3779b97f4a7c15ULL)) ^ b);
}

int worker_count(std::size_t items) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("CLTLAB_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(cap));
  }
  return static_cast<int>(std::min<std::size_t>(hw, items));
}

// Runs f(0..count-1); results must be written to index-addressed slots so
// the outcome does not depend on scheduling.
template <typename F>
void parallel_for(std::size_t count, F&& f) {
  const int workers = worker_count(count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto run = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

struct RawEntry {
  std::string value;
  int line = 0;
};

using RawConfig = std::map<std::string, RawEntry>;  // "section.key" -> value

RawConfig tokenize_config(const std::string& text) {
  RawConfig raw;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw Error(ErrorCode::ParseError,
                    "line " + std::to_string(line_no) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw Error(ErrorCode::ParseError,
                    "line " + std::to_string(line_no) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + ": empty key");
    if (section.empty())
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + ": key outside a section");
    raw[section + "." + key] = RawEntry{value, line_no};
  }
  return raw;
}

double to_double(const RawEntry& e, const std::string& field) {
  try {
    std::size_t used = 0;
    const double v = std::stod(e.value, &used);
    if (used != e.value.size()) throw std::invalid_argument(e.value);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ValidationError,
                field + ": not a number ('" + e.value + "')");
  }
}

long long to_int(const RawEntry& e, const std::string& field) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(e.value, &used);
    if (used != e.value.size()) throw std::invalid_argument(e.value);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ValidationError,
                field + ": not an integer ('" + e.value + "')");
  }
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::string current;
  for (char c : value) {
    if (c == ',') {
      items.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  items.push_back(current);
  for (std::string& s : items) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
  }
  return items;
}

const std::map<std::string, std::vector<std::string>>& known_keys() {
  static const std::map<std::string, std::vector<std::string>> keys = {
      {"model",
       {"preset", "a", "b", "grid_size", "drift", "ar_coeff", "noise",
        "noise_lo", "noise_hi", "noise_mu", "noise_sigma", "noise_radius",
        "disc_grid", "disc_radius", "path", "A", "dim"}},
      {"observable", {"kind", "values", "center"}},
      {"experiment",
       {"method", "n_grid", "mc_samples_per_n", "seed", "mu0", "t_grid",
        "lattice_scale", "esseen_T", "burn_in", "audit_n_max",
        "audit_weight"}},
      {"output", {"dir"}},
  };
  return keys;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  const RawConfig raw = tokenize_config(text);

  for (const auto& [full_key, entry] : raw) {
    const auto dot = full_key.find('.');
    const std::string section = full_key.substr(0, dot);
    const std::string key = full_key.substr(dot + 1);
    const auto it = known_keys().find(section);
    if (it == known_keys().end())
      throw Error(ErrorCode::ValidationError,
                  "unknown section [" + section + "] (line " +
                      std::to_string(entry.line) + ")");
    if (std::find(it->second.begin(), it->second.end(), key) ==
        it->second.end())
      throw Error(ErrorCode::ValidationError,
                  "unknown key '" + key + "' in [" + section + "] (line " +
                      std::to_string(entry.line) + ")");
  }

  ExperimentConfig cfg;
  auto get = [&](const std::string& key) -> const RawEntry* {
    const auto it = raw.find(key);
    return it == raw.end() ? nullptr : &it->second;
  };

  if (const RawEntry* e = get("model.preset")) {
    if (e->value == "two_state") cfg.preset = ModelPreset::TwoState;
    else if (e->value == "birth_death_V") cfg.preset = ModelPreset::BirthDeathV;
    else if (e->value == "ar1_scalar") cfg.preset = ModelPreset::Ar1Scalar;
    else if (e->value == "ar1_vector") cfg.preset = ModelPreset::Ar1Vector;
    else if (e->value == "chain_file") cfg.preset = ModelPreset::ChainFile;
    else
      throw Error(ErrorCode::ValidationError,
                  "model.preset: unknown preset '" + e->value + "'");
  }
  if (const RawEntry* e = get("model.a")) cfg.a = to_double(*e, "model.a");
  if (const RawEntry* e = get("model.b")) cfg.b = to_double(*e, "model.b");
  if (const RawEntry* e = get("model.grid_size"))
    cfg.grid_size = static_cast<int>(to_int(*e, "model.grid_size"));
  if (const RawEntry* e = get("model.drift"))
    cfg.drift = to_double(*e, "model.drift");
  if (const RawEntry* e = get("model.ar_coeff"))
    cfg.ar_coeff = to_double(*e, "model.ar_coeff");
  if (const RawEntry* e = get("model.disc_grid"))
    cfg.disc_grid = static_cast<int>(to_int(*e, "model.disc_grid"));
  if (const RawEntry* e = get("model.disc_radius"))
    cfg.disc_radius = to_double(*e, "model.disc_radius");
  if (const RawEntry* e = get("model.path")) cfg.chain_path = e->value;
  if (const RawEntry* e = get("model.dim"))
    cfg.dim = static_cast<int>(to_int(*e, "model.dim"));

  {
    std::string noise_kind = "uniform_sign";
    if (const RawEntry* e = get("model.noise")) noise_kind = e->value;
    const double lo = get("model.noise_lo")
                          ? to_double(*get("model.noise_lo"), "model.noise_lo")
                          : -1.0;
    const double hi = get("model.noise_hi")
                          ? to_double(*get("model.noise_hi"), "model.noise_hi")
                          : 1.0;
    const double mu = get("model.noise_mu")
                          ? to_double(*get("model.noise_mu"), "model.noise_mu")
                          : 0.0;
    const double s =
        get("model.noise_sigma")
            ? to_double(*get("model.noise_sigma"), "model.noise_sigma")
            : 1.0;
    const double radius =
        get("model.noise_radius")
            ? to_double(*get("model.noise_radius"), "model.noise_radius")
            : 3.0;
    if (noise_kind == "uniform_sign") cfg.noise = NoiseLaw::uniform_sign();
    else if (noise_kind == "uniform_interval")
      cfg.noise = NoiseLaw::uniform_interval(lo, hi);
    else if (noise_kind == "trunc_normal")
      cfg.noise = NoiseLaw::trunc_normal(mu, s, radius);
    else
      throw Error(ErrorCode::ValidationError,
                  "model.noise: unknown law '" + noise_kind + "'");
  }

  if (const RawEntry* e = get("model.A")) {
    const auto items = split_list(e->value);
    const int d = cfg.dim;
    if (static_cast<int>(items.size()) != d * d)
      throw Error(ErrorCode::ValidationError,
                  "model.A: expected dim*dim entries");
    cfg.ar_matrix = Matrix(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        cfg.ar_matrix(i, j) =
            to_double(RawEntry{items[i * d + j], e->line}, "model.A");
  }

  if (const RawEntry* e = get("observable.kind")) {
    if (e->value == "pm_one") cfg.xi_kind = ObservableKind::PmOne;
    else if (e->value == "state_index") cfg.xi_kind = ObservableKind::StateIndex;
    else if (e->value == "label") cfg.xi_kind = ObservableKind::Label;
    else if (e->value == "values") cfg.xi_kind = ObservableKind::Values;
    else if (e->value == "state_value") cfg.xi_kind = ObservableKind::StateValue;
    else
      throw Error(ErrorCode::ValidationError,
                  "observable.kind: unknown kind '" + e->value + "'");
  }
  if (const RawEntry* e = get("observable.values")) {
    cfg.xi_values.clear();
    for (const std::string& item : split_list(e->value))
      cfg.xi_values.push_back(
          to_double(RawEntry{item, e->line}, "observable.values"));
  }
  if (const RawEntry* e = get("observable.center")) {
    if (e->value == "true") cfg.center = true;
    else if (e->value == "false") cfg.center = false;
    else
      throw Error(ErrorCode::ValidationError,
                  "observable.center: expected true or false");
  }

  if (const RawEntry* e = get("experiment.method")) {
    if (e->value == "exact_lattice") cfg.method = Method::ExactLattice;
    else if (e->value == "monte_carlo") cfg.method = Method::MonteCarlo;
    else
      throw Error(ErrorCode::ValidationError,
                  "experiment.method: unknown method '" + e->value + "'");
  }
  if (const RawEntry* e = get("experiment.n_grid")) {
    cfg.n_grid.clear();
    for (const std::string& item : split_list(e->value))
      cfg.n_grid.push_back(static_cast<int>(
          to_int(RawEntry{item, e->line}, "experiment.n_grid")));
  }
  if (const RawEntry* e = get("experiment.mc_samples_per_n"))
    cfg.mc_samples_per_n = to_int(*e, "experiment.mc_samples_per_n");
  if (const RawEntry* e = get("experiment.seed"))
    cfg.seed = static_cast<std::uint64_t>(to_int(*e, "experiment.seed"));
  if (const RawEntry* e = get("experiment.mu0")) {
    if (e->value == "stationary") cfg.mu0_kind = Mu0Kind::Stationary;
    else if (e->value == "uniform") cfg.mu0_kind = Mu0Kind::Uniform;
    else if (e->value.rfind("point:", 0) == 0) {
      cfg.mu0_kind = Mu0Kind::Point;
      cfg.mu0_state = static_cast<int>(
          to_int(RawEntry{e->value.substr(6), e->line}, "experiment.mu0"));
    } else
      throw Error(ErrorCode::ValidationError,
                  "experiment.mu0: expected stationary | uniform | point:K");
  }
  if (const RawEntry* e = get("experiment.t_grid")) {
    cfg.t_grid.clear();
    for (const std::string& item : split_list(e->value))
      cfg.t_grid.push_back(
          to_double(RawEntry{item, e->line}, "experiment.t_grid"));
  }
  if (const RawEntry* e = get("experiment.lattice_scale"))
    cfg.lattice_scale = to_double(*e, "experiment.lattice_scale");
  if (const RawEntry* e = get("experiment.esseen_T"))
    cfg.esseen_T = to_double(*e, "experiment.esseen_T");
  if (const RawEntry* e = get("experiment.burn_in"))
    cfg.burn_in = static_cast<int>(to_int(*e, "experiment.burn_in"));
  if (const RawEntry* e = get("experiment.audit_n_max"))
    cfg.audit_n_max = static_cast<int>(to_int(*e, "experiment.audit_n_max"));
  if (const RawEntry* e = get("experiment.audit_weight")) {
    cfg.audit_weight_explicit = true;
    if (e->value == "sup") cfg.audit_weight = NormKind::Sup;
    else if (e->value == "V") cfg.audit_weight = NormKind::VWeighted;
    else
      throw Error(ErrorCode::ValidationError,
                  "experiment.audit_weight: expected sup | V");
  }
  if (const RawEntry* e = get("output.dir")) cfg.out_dir = e->value;

  // Validation of cross-field constraints.
  if (cfg.n_grid.empty())
    throw Error(ErrorCode::ValidationError, "experiment.n_grid: empty");
  for (std::size_t i = 0; i + 1 < cfg.n_grid.size(); ++i)
    if (cfg.n_grid[i] >= cfg.n_grid[i + 1])
      throw Error(ErrorCode::ValidationError,
                  "experiment.n_grid: must be strictly increasing");
  if (cfg.n_grid.front() < 1)
    throw Error(ErrorCode::ValidationError, "experiment.n_grid: n must be >= 1");
  const long long n_max = cfg.n_grid.back();
  if (cfg.method == Method::MonteCarlo) {
    if (cfg.mc_samples_per_n == 0) cfg.mc_samples_per_n = 100 * n_max;
    if (cfg.mc_samples_per_n < 100 * n_max)
      throw Error(ErrorCode::ValidationError,
                  "experiment.mc_samples_per_n: must be >= 100 * max(n_grid) "
                  "so the M^(-1/2) statistical floor sits below the n^(-1/2) "
                  "signal");
  }
  if (cfg.preset == ModelPreset::ChainFile && cfg.chain_path.empty())
    throw Error(ErrorCode::ValidationError,
                "model.path: required for preset chain_file");
  return cfg;
}

std::string echo_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "[model]\n";
  out << "preset = ";
  switch (cfg.preset) {
    case ModelPreset::TwoState: out << "two_state"; break;
    case ModelPreset::BirthDeathV: out << "birth_death_V"; break;
    case ModelPreset::Ar1Scalar: out << "ar1_scalar"; break;
    case ModelPreset::Ar1Vector: out << "ar1_vector"; break;
    case ModelPreset::ChainFile: out << "chain_file"; break;
  }
  out << "\n";
  out << "a = " << format_double(cfg.a) << "\n";
  out << "b = " << format_double(cfg.b) << "\n";
  out << "grid_size = " << cfg.grid_size << "\n";
  out << "drift = " << format_double(cfg.drift) << "\n";
  out << "ar_coeff = " << format_double(cfg.ar_coeff) << "\n";
  out << "noise = ";
  switch (cfg.noise.kind) {
    case NoiseKind::UniformSign: out << "uniform_sign"; break;
    case NoiseKind::UniformInterval:
      out << "uniform_interval\nnoise_lo = " << format_double(cfg.noise.lo)
          << "\nnoise_hi = " << format_double(cfg.noise.hi);
      break;
    case NoiseKind::TruncNormal:
      out << "trunc_normal\nnoise_mu = " << format_double(cfg.noise.mu)
          << "\nnoise_sigma = " << format_double(cfg.noise.s)
          << "\nnoise_radius = " << format_double(cfg.noise.radius);
      break;
  }
  out << "\n";
  out << "disc_grid = " << cfg.disc_grid << "\n";
  out << "disc_radius = " << format_double(cfg.disc_radius) << "\n";
  if (!cfg.chain_path.empty()) out << "path = " << cfg.chain_path << "\n";
  out << "\n[observable]\n";
  out << "kind = ";
  switch (cfg.xi_kind) {
    case ObservableKind::PmOne: out << "pm_one"; break;
    case ObservableKind::StateIndex: out << "state_index"; break;
    case ObservableKind::Label: out << "label"; break;
    case ObservableKind::Values: out << "values"; break;
    case ObservableKind::StateValue: out << "state_value"; break;
  }
  out << "\n";
  if (!cfg.xi_values.empty()) {
    out << "values = ";
    for (std::size_t i = 0; i < cfg.xi_values.size(); ++i)
      out << (i ? "," : "") << format_double(cfg.xi_values[i]);
    out << "\n";
  }
  out << "center = " << (cfg.center ? "true" : "false") << "\n";
  out << "\n[experiment]\n";
  out << "method = "
      << (cfg.method == Method::ExactLattice ? "exact_lattice" : "monte_carlo")
      << "\n";
  out << "n_grid = ";
  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i)
    out << (i ? "," : "") << cfg.n_grid[i];
  out << "\n";
  out << "mc_samples_per_n = " << cfg.mc_samples_per_n << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "mu0 = ";
  switch (cfg.mu0_kind) {
    case Mu0Kind::Stationary: out << "stationary"; break;
    case Mu0Kind::Uniform: out << "uniform"; break;
    case Mu0Kind::Point: out << "point:" << cfg.mu0_state; break;
  }
  out << "\n";
  out << "t_grid = ";
  for (std::size_t i = 0; i < cfg.t_grid.size(); ++i)
    out << (i ? "," : "") << format_double(cfg.t_grid[i]);
  out << "\n";
  out << "lattice_scale = " << format_double(cfg.lattice_scale) << "\n";
  out << "esseen_T = " << format_double(cfg.esseen_T) << "\n";
  out << "burn_in = " << cfg.burn_in << "\n";
  out << "audit_n_max = " << cfg.audit_n_max << "\n";
  out << "audit_weight = "
      << (cfg.audit_weight == NormKind::Sup ? "sup" : "V") << "\n";
  out << "\n[output]\n";
  out << "dir = " << cfg.out_dir << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Model resolution
// ---------------------------------------------------------------------------

namespace {

struct ResolvedModel {
  FiniteChain chain;  // diagnostics carrier (the chain itself or a surrogate)
  Observable xi;
  Distribution mu0;
  double sigma = 0.0;      // normalization sigma for D_n
  bool iterative = false;  // Monte Carlo paths from the AR(1) model itself
  Ar1Scalar ar1;
  double xi_shift = 0.0;  // centering shift for sampled state values
};

Observable resolve_chain_observable(const FiniteChain& chain,
                                    const ExperimentConfig& cfg) {
  const int n = chain.n_states();
  Observable xi;
  switch (cfg.xi_kind) {
    case ObservableKind::PmOne:
      if (n != 2)
        throw Error(ErrorCode::ValidationError,
                    "observable.kind pm_one needs a two-state chain");
      xi.values = Vector(2);
      xi.values << 1.0, -1.0;
      break;
    case ObservableKind::StateIndex:
      xi.values = Vector::LinSpaced(n, 0.0, static_cast<double>(n - 1));
      break;
    case ObservableKind::Label:
    case ObservableKind::StateValue:
      if (!chain.labels)
        throw Error(ErrorCode::ValidationError,
                    "observable.kind label needs chain labels");
      xi.values = chain.labels->col(0);
      break;
    case ObservableKind::Values:
      if (static_cast<int>(cfg.xi_values.size()) != n)
        throw Error(ErrorCode::ValidationError,
                    "observable.values: expected one value per state");
      xi.values = Eigen::Map<const Vector>(cfg.xi_values.data(), n);
      break;
  }
  if (cfg.center) return center_observable(chain, xi);
  return xi;
}

Distribution resolve_mu0(const FiniteChain& chain,
                         const ExperimentConfig& cfg) {
  switch (cfg.mu0_kind) {
    case Mu0Kind::Stationary: return stationary_distribution(chain);
    case Mu0Kind::Uniform: return Distribution::uniform(chain.n_states());
    case Mu0Kind::Point:
      return Distribution::point(chain.n_states(), cfg.mu0_state);
  }
  throw Error(ErrorCode::ValidationError, "mu0");
}

ResolvedModel resolve_model(const ExperimentConfig& cfg) {
  ResolvedModel rm;
  switch (cfg.preset) {
    case ModelPreset::TwoState:
      rm.chain = make_two_state(cfg.a, cfg.b);
      break;
    case ModelPreset::BirthDeathV:
      rm.chain = make_v_ergodic_example(cfg.grid_size, cfg.drift);
      break;
    case ModelPreset::ChainFile:
      rm.chain = read_chain_file(cfg.chain_path);
      break;
    case ModelPreset::Ar1Scalar: {
      rm.ar1 = Ar1Scalar{cfg.ar_coeff, cfg.noise};
      rm.iterative = true;
      rm.chain =
          discretize_ar1(rm.ar1, cfg.disc_grid, cfg.disc_radius).chain;
      break;
    }
    case ModelPreset::Ar1Vector:
      throw Error(ErrorCode::ValidationError,
                  "preset ar1_vector supports only the audit subcommand "
                  "(condition (*)); rate/cf/dist need a scalar model");
  }
  rm.xi = resolve_chain_observable(rm.chain, cfg);
  rm.mu0 = resolve_mu0(rm.chain, cfg);

  if (rm.iterative) {
    if (cfg.xi_kind != ObservableKind::StateValue &&
        cfg.xi_kind != ObservableKind::Label)
      throw Error(ErrorCode::ValidationError,
                  "iterative models use observable.kind = state_value");
    // xi(x) = x - E[X]; for the linear model both the mean and the
    // asymptotic variance have closed forms.
    rm.xi_shift = cfg.noise.mean() / (1.0 - cfg.ar_coeff);
    const double one_minus_a = 1.0 - cfg.ar_coeff;
    rm.sigma =
        std::sqrt(cfg.noise.variance() / (one_minus_a * one_minus_a));
  } else {
    const double s2 = sigma_squared(rm.chain, rm.xi);
    if (s2 < 1e-12)
      throw Error(ErrorCode::DegenerateVariance, "sigma^2 = 0");
    rm.sigma = std::sqrt(s2);
  }
  return rm;
}

// ---------------------------------------------------------------------------
// Distance computation per n
// ---------------------------------------------------------------------------

// Samples of S_n / sqrt(n) from the scalar AR(1) model, sharded
// deterministically (shard layout independent of the worker count).
std::vector<double> mc_samples_ar1(const ResolvedModel& rm,
                                   const ExperimentConfig& cfg, int n,
                                   long long samples) {
  std::vector<double> out(samples);
  const int shards = 256;
  const double a = rm.ar1.a;
  const NoiseLaw& noise = rm.ar1.noise;
  const double shift = rm.xi_shift;
  parallel_for(shards, [&](std::size_t shard) {
    const long long lo = samples * shard / shards;
    const long long hi = samples * (shard + 1) / shards;
    std::mt19937_64 rng(derive_seed(cfg.seed, n, shard));
    for (long long i = lo; i < hi; ++i) {
      double x = 0.0;
      for (int k = 0; k < cfg.burn_in; ++k) x = a * x + noise.sample(rng);
      double s = 0.0;
      for (int k = 0; k < n; ++k) {
        x = a * x + noise.sample(rng);
        s += x - shift;
      }
      out[i] = s / std::sqrt(static_cast<double>(n));
    }
  });
  return out;
}

// Samples of S_n / sqrt(n) from a finite chain.
std::vector<double> mc_samples_chain(const ResolvedModel& rm,
                                     const ExperimentConfig& cfg, int n,
                                     long long samples) {
  const int m = rm.chain.n_states();
  // Row-wise cumulative transition table for inverse sampling.
  Matrix cumulative(m, m);
  for (int i = 0; i < m; ++i) {
    double acc = 0.0;
    for (int j = 0; j < m; ++j) {
      acc += rm.chain.P(i, j);
      cumulative(i, j) = acc;
    }
  }
  Vector mu0_cumulative(m);
  {
    double acc = 0.0;
    for (int j = 0; j < m; ++j) {
      acc += rm.mu0.weights[j];
      mu0_cumulative[j] = acc;
    }
  }
  auto pick = [m](const auto& row, double u) {
    for (int j = 0; j < m; ++j)
      if (u <= row[j]) return j;
    return m - 1;
  };

  std::vector<double> out(samples);
  const int shards = 256;
  parallel_for(shards, [&](std::size_t shard) {
    const long long lo = samples * shard / shards;
    const long long hi = samples * (shard + 1) / shards;
    std::mt19937_64 rng(derive_seed(cfg.seed, n, shard));
    auto uniform = [&rng]() { return (rng() >> 11) * 0x1.0p-53; };
    for (long long i = lo; i < hi; ++i) {
      int x = pick(mu0_cumulative, uniform());
      double s = 0.0;
      for (int k = 0; k < n; ++k) {
        x = pick(cumulative.row(x), uniform());
        s += rm.xi.values[x];
      }
      out[i] = s / std::sqrt(static_cast<double>(n));
    }
  });
  return out;
}

struct RowsResult {
  std::vector<RateRow> rows;
  // Per-n Monte Carlo samples (S_n / sqrt(n)), kept for the bootstrap.
  std::vector<std::vector<double>> samples;
};

RowsResult compute_rows(const ResolvedModel& rm, const ExperimentConfig& cfg,
                        std::vector<RateRow>* partial) {
  RowsResult result;
  result.rows.resize(cfg.n_grid.size());
  result.samples.resize(cfg.n_grid.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();

  if (cfg.method == Method::ExactLattice) {
    if (rm.iterative)
      throw Error(ErrorCode::ValidationError,
                  "exact_lattice needs a finite chain (use monte_carlo for "
                  "iterative models)");
    std::mutex partial_mutex;
    parallel_for(cfg.n_grid.size(), [&](std::size_t i) {
      const int n = cfg.n_grid[i];
      const LatticeCdf cdf =
          exact_cdf_lattice(rm.chain, rm.xi, rm.mu0, n, cfg.lattice_scale);
      const double d = kolmogorov_distance_exact(cdf, rm.sigma);
      const double T = cfg.esseen_T > 0.0 ? cfg.esseen_T : std::sqrt(n);
      const double bound = esseen_bound(rm.chain, rm.xi, rm.mu0, n, T);
      result.rows[i] = RateRow{n, d, d * std::sqrt(n), bound};
      if (partial) {
        std::lock_guard<std::mutex> lock(partial_mutex);
        partial->push_back(result.rows[i]);
      }
    });
    if (partial)
      std::sort(partial->begin(), partial->end(),
                [](const RateRow& a, const RateRow& b) { return a.n < b.n; });
  } else {
    for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
      const int n = cfg.n_grid[i];
      std::vector<double> samples =
          rm.iterative ? mc_samples_ar1(rm, cfg, n, cfg.mc_samples_per_n)
                       : mc_samples_chain(rm, cfg, n, cfg.mc_samples_per_n);
      const double d = kolmogorov_distance_mc(samples, rm.sigma);
      double bound = nan;
      if (!rm.iterative) {
        const double T = cfg.esseen_T > 0.0 ? cfg.esseen_T : std::sqrt(n);
        bound = esseen_bound(rm.chain, rm.xi, rm.mu0, n, T);
      }
      result.rows[i] = RateRow{n, d, d * std::sqrt(n), bound};
      result.samples[i] = std::move(samples);
      if (partial) partial->push_back(result.rows[i]);
    }
  }
  return result;
}

double student_t_975(int df) {
  // Two-sided 95% quantiles of the Student t distribution.
  static const std::pair<int, double> table[] = {
      {1, 12.706}, {2, 4.303}, {3, 3.182}, {4, 2.776}, {5, 2.571},
      {6, 2.447},  {7, 2.365}, {8, 2.306}, {9, 2.262}, {10, 2.228},
      {12, 2.179}, {15, 2.131}, {20, 2.086}, {30, 2.042}};
  if (df <= 0) return std::numeric_limits<double>::infinity();
  double q = 1.960;
  for (const auto& [d, val] : table)
    if (df <= d) return val;
  return q;
}

}  // namespace

RateFit fit_rate_exponent(
    const std::vector<std::pair<double, double>>& rows) {
  if (rows.size() < 3)
    throw Error(ErrorCode::DegenerateInput, "need at least 3 rows");
  for (const auto& [n, d] : rows)
    if (!(d > 0.0))
      throw Error(ErrorCode::DegenerateInput,
                  "distances must be strictly positive");
  const int m = static_cast<int>(rows.size());
  double sx = 0, sy = 0;
  for (const auto& [n, d] : rows) {
    sx += std::log(n);
    sy += std::log(d);
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0, ssr = 0;
  for (const auto& [n, d] : rows) {
    const double dx = std::log(n) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(d) - my);
  }
  const double slope = sxy / sxx;
  for (const auto& [n, d] : rows) {
    const double fitted = my + slope * (std::log(n) - mx);
    const double r = std::log(d) - fitted;
    ssr += r * r;
  }
  const double tau = -slope;
  const double se =
      (m > 2) ? std::sqrt(ssr / (m - 2) / sxx) : 0.0;
  const double q = student_t_975(m - 2);
  return RateFit{tau, tau - q * se, tau + q * se};
}

RateReport run_experiment(const ExperimentConfig& cfg,
                          std::vector<RateRow>* partial) {
  const ResolvedModel rm = resolve_model(cfg);
  RateReport report;
  report.sigma2 = rm.sigma * rm.sigma;

  RowsResult rows = compute_rows(rm, cfg, partial);
  report.rows = rows.rows;

  std::vector<std::pair<double, double>> fit_rows;
  for (const RateRow& r : report.rows)
    fit_rows.emplace_back(static_cast<double>(r.n), r.d_n);
  report.fit = fit_rate_exponent(fit_rows);

  if (cfg.method == Method::MonteCarlo) {
    // Nonparametric bootstrap over sample blocks: resample each n's sample
    // set, recompute the distances, refit. 200 resamples, percentile CI.
    const int resamples = 200;
    std::vector<double> taus(resamples);
    parallel_for(resamples, [&](std::size_t r) {
      std::mt19937_64 rng(derive_seed(cfg.seed, 0xB007, r));
      std::vector<std::pair<double, double>> boot_rows;
      for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
        const std::vector<double>& base = rows.samples[i];
        std::vector<double> resampled(base.size());
        for (std::size_t k = 0; k < base.size(); ++k)
          resampled[k] = base[rng() % base.size()];
        boot_rows.emplace_back(
            static_cast<double>(cfg.n_grid[i]),
            kolmogorov_distance_mc(std::move(resampled), rm.sigma));
      }
      taus[r] = fit_rate_exponent(boot_rows).tau_hat;
    });
    std::sort(taus.begin(), taus.end());
    report.fit.ci_lo = taus[static_cast<int>(0.025 * resamples)];
    report.fit.ci_hi = taus[static_cast<int>(0.975 * resamples) - 1];
    report.notes += "bootstrap CI (200 resamples)\n";
  }

  // Spectral diagnostics on the carrier chain. These are auxiliary: a grid
  // point outside the certified gap interval must not abort the distances.
  const ErgodicityProfile profile =
      ergodicity_profile(rm.chain, NormKind::Sup, 64);
  report.kappa0 = profile.kappa0;
  report.h2_value = h2_series(rm.chain, rm.xi).first;
  std::vector<double> t_grid;
  for (double t : cfg.t_grid)
    if (t != 0.0) t_grid.push_back(t);
  if (!t_grid.empty()) {
    try {
      const PerturbationBounds pb =
          perturbation_bounds(rm.chain, rm.xi, t_grid);
      report.b1 = pb.b1;
      report.b2 = pb.b2;
      report.b3 = pb.b3;
    } catch (const Error& e) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      report.b1 = report.b2 = report.b3 = nan;
      report.notes += std::string("perturbation bounds unavailable: ") +
                      e.what() + "\n";
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

namespace {

std::string rate_csv_text(const RateReport& report) {
  std::string csv = "n,D_n,sqrt_n_D_n,esseen_bound\n";
  for (const RateRow& r : report.rows) {
    csv += std::to_string(r.n) + "," + format_double(r.d_n) + "," +
           format_double(r.sqrt_n_d_n) + "," + format_double(r.esseen) + "\n";
  }
  return csv;
}

std::string svg_plot(const RateReport& report) {
  const double width = 640, height = 480;
  const double ml = 70, mr = 20, mt = 20, mb = 50;

  double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
  for (const RateRow& r : report.rows) {
    if (!(r.d_n > 0.0)) continue;
    x_lo = std::min(x_lo, std::log10(static_cast<double>(r.n)));
    x_hi = std::max(x_hi, std::log10(static_cast<double>(r.n)));
    y_lo = std::min(y_lo, std::log10(r.d_n));
    y_hi = std::max(y_hi, std::log10(r.d_n));
  }
  if (x_hi <= x_lo) x_hi = x_lo + 1.0;
  if (y_hi <= y_lo) y_hi = y_lo + 1.0;
  const double x_pad = 0.05 * (x_hi - x_lo), y_pad = 0.1 * (y_hi - y_lo);
  x_lo -= x_pad;
  x_hi += x_pad;
  y_lo -= y_pad;
  y_hi += y_pad;

  auto px = [&](double x) {
    return ml + (x - x_lo) / (x_hi - x_lo) * (width - ml - mr);
  };
  auto py = [&](double y) {
    return height - mb - (y - y_lo) / (y_hi - y_lo) * (height - mt - mb);
  };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
         "height=\"480\" viewBox=\"0 0 640 480\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" "
         "fill=\"white\"/>\n";
  svg << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\""
      << num(width - ml - mr) << "\" height=\"" << num(height - mt - mb)
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  // Axis ticks: grid n values on x, decades on y.
  for (const RateRow& r : report.rows) {
    const double x = px(std::log10(static_cast<double>(r.n)));
    svg << "<line x1=\"" << num(x) << "\" y1=\"" << num(height - mb)
        << "\" x2=\"" << num(x) << "\" y2=\"" << num(height - mb + 5)
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << num(x) << "\" y=\"" << num(height - mb + 18)
        << "\" font-size=\"10\" text-anchor=\"middle\">" << r.n
        << "</text>\n";
  }
  for (int d = static_cast<int>(std::floor(y_lo));
       d <= static_cast<int>(std::ceil(y_hi)); ++d) {
    if (d < y_lo || d > y_hi) continue;
    const double y = py(d);
    svg << "<line x1=\"" << num(ml - 5) << "\" y1=\"" << num(y) << "\" x2=\""
        << num(ml) << "\" y2=\"" << num(y) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << num(ml - 8) << "\" y=\"" << num(y + 3)
        << "\" font-size=\"10\" text-anchor=\"end\">1e" << d << "</text>\n";
  }

  // Fitted line from the least-squares intercept.
  {
    double sx = 0, sy = 0;
    int m = 0;
    for (const RateRow& r : report.rows) {
      if (!(r.d_n > 0.0)) continue;
      sx += std::log10(static_cast<double>(r.n));
      sy += std::log10(r.d_n);
      ++m;
    }
    if (m > 0) {
      const double intercept = sy / m + report.fit.tau_hat * sx / m;
      const double yl = intercept - report.fit.tau_hat * (x_lo + x_pad);
      const double yr = intercept - report.fit.tau_hat * (x_hi - x_pad);
      svg << "<line x1=\"" << num(px(x_lo + x_pad)) << "\" y1=\""
          << num(py(yl)) << "\" x2=\"" << num(px(x_hi - x_pad)) << "\" y2=\""
          << num(py(yr)) << "\" stroke=\"#888888\" stroke-dasharray=\"4,3\"/>"
          << "\n";
    }
  }

  for (const RateRow& r : report.rows) {
    if (!(r.d_n > 0.0)) continue;
    svg << "<circle cx=\"" << num(px(std::log10(static_cast<double>(r.n))))
        << "\" cy=\"" << num(py(std::log10(r.d_n)))
        << "\" r=\"3\" fill=\"#1f5fbf\"/>\n";
  }

  svg << "<text x=\"" << num(width / 2) << "\" y=\"" << num(height - 10)
      << "\" font-size=\"12\" text-anchor=\"middle\">n (log)</text>\n";
  svg << "<text x=\"15\" y=\"" << num(height / 2)
      << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 "
         "15 "
      << num(height / 2) << ")\">D_n (log)</text>\n";
  svg << "<text x=\"" << num(width - mr - 5) << "\" y=\"" << num(mt + 15)
      << "\" font-size=\"12\" text-anchor=\"end\">tau_hat = "
      << format_double(report.fit.tau_hat) << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

std::string summary_text(const RateReport& report,
                         const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "rate experiment summary\n";
  out << "=======================\n";
  out << "D_n is the Kolmogorov distance of S_n/(sigma sqrt n) to N(0,1);\n";
  out << "tau_hat is the fitted exponent of D_n ~ n^(-tau_hat), so the\n";
  out << "classical 1/sqrt(n) regime corresponds to tau_hat = 0.5.\n\n";
  out << "tau_hat = " << format_double(report.fit.tau_hat) << "  CI95 = ["
      << format_double(report.fit.ci_lo) << ", "
      << format_double(report.fit.ci_hi) << "]\n";
  out << "sigma2 = " << format_double(report.sigma2) << "\n";
  out << "kappa0 = " << format_double(report.kappa0) << "\n";
  out << "h2_value = " << format_double(report.h2_value) << "\n";
  out << "b1 = " << format_double(report.b1)
      << "  b2 = " << format_double(report.b2)
      << "  b3 = " << format_double(report.b3) << "\n";
  if (!report.notes.empty()) out << report.notes;
  out << "\nrows (n, D_n, sqrt(n) D_n, esseen):\n";
  for (const RateRow& r : report.rows)
    out << "  " << r.n << "  " << format_double(r.d_n) << "  "
        << format_double(r.sqrt_n_d_n) << "  " << format_double(r.esseen)
        << "\n";
  out << "\nconfig echo:\n" << echo_config(cfg);
  return out.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path + "'");
}

}  // namespace

void emit_report(const RateReport& report, const ExperimentConfig& cfg,
                 const std::string& out_dir) {
  if (report.rows.empty())
    throw Error(ErrorCode::DegenerateInput, "no rows to report");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec)
    throw Error(ErrorCode::IoError, "cannot create directory '" + out_dir +
                                        "': " + ec.message());
  write_file(out_dir + "/rate.csv", rate_csv_text(report));
  write_file(out_dir + "/plot.svg", svg_plot(report));
  write_file(out_dir + "/summary.txt", summary_text(report, cfg));
}

// ---------------------------------------------------------------------------
// Audits and diagnostic CSVs
// ---------------------------------------------------------------------------

AuditOutcome run_audits(const ExperimentConfig& cfg) {
  std::ostringstream out;
  bool pass = true;

  // Condition (*) for iterative presets.
  if (cfg.preset == ModelPreset::Ar1Scalar ||
      cfg.preset == ModelPreset::Ar1Vector) {
    IterativeModel model;
    if (cfg.preset == ModelPreset::Ar1Scalar)
      model = Ar1Scalar{cfg.ar_coeff, cfg.noise}.model();
    else {
      Matrix A = cfg.ar_matrix;
      if (A.size() == 0)
        A = Matrix::Identity(cfg.dim, cfg.dim) * cfg.ar_coeff;
      model = Ar1Vector{A, cfg.noise}.model();
    }
    const ConditionStar star =
        check_condition_star(model, 20000, cfg.seed);
    out << "condition(*): " << (star.pass ? "PASS" : "FAIL")
        << "  moment1 = " << format_double(star.moment1)
        << "  moment2 = " << format_double(star.moment2) << " (+2se "
        << format_double(star.moment2 + 2.0 * star.stderr2) << " vs 1)"
        << (star.diverging ? "  [diverging moment estimate]" : "") << "\n";
    pass = pass && star.pass;

    if (cfg.preset == ModelPreset::Ar1Vector) {
      out << "overall: " << (pass ? "PASS" : "FAIL") << "\n";
      return AuditOutcome{pass, out.str()};
    }
    if (!(std::abs(cfg.ar_coeff) < 1.0)) {
      out << "H1-H4: skipped (|A| >= 1, no discretized surrogate)\n";
      out << "overall: FAIL\n";
      return AuditOutcome{false, out.str()};
    }
  }

  FiniteChain chain;
  try {
    switch (cfg.preset) {
      case ModelPreset::TwoState:
        chain = make_two_state(cfg.a, cfg.b);
        break;
      case ModelPreset::BirthDeathV:
        chain = make_v_ergodic_example(cfg.grid_size, cfg.drift);
        break;
      case ModelPreset::Ar1Scalar:
        chain = discretize_ar1(Ar1Scalar{cfg.ar_coeff, cfg.noise},
                               cfg.disc_grid, cfg.disc_radius)
                    .chain;
        break;
      case ModelPreset::ChainFile:
        chain = read_chain_file(cfg.chain_path);
        break;
      case ModelPreset::Ar1Vector:
        break;  // handled above
    }
  } catch (const Error& e) {
    out << "model construction: FAIL " << e.what() << "\n";
    out << "overall: FAIL\n";
    return AuditOutcome{false, out.str()};
  }

  const NormKind weight_kind =
      cfg.audit_weight_explicit
          ? cfg.audit_weight
          : (chain.V ? NormKind::VWeighted : NormKind::Sup);

  // H1: geometric ergodicity profile.
  ErgodicityProfile profile;
  try {
    profile = ergodicity_profile(chain, weight_kind, cfg.audit_n_max);
    out << "H1 (geometric ergodicity, "
        << (weight_kind == NormKind::Sup ? "sup" : "V") << " norm): PASS"
        << "  kappa0 = " << format_double(profile.kappa0)
        << "  C = " << format_double(profile.C) << "\n";
  } catch (const Error& e) {
    out << "H1 (geometric ergodicity): FAIL " << e.what() << "\n";
    out << "H2-H4: skipped (no spectral gap)\n";
    out << "overall: FAIL\n";
    return AuditOutcome{false, out.str()};
  }

  Observable xi;
  try {
    xi = resolve_chain_observable(chain, cfg);
  } catch (const Error& e) {
    out << "observable: FAIL " << e.what() << "\n";
    out << "overall: FAIL\n";
    return AuditOutcome{false, out.str()};
  }

  // H2: summability of the psi series.
  try {
    const auto [h2, terms] = h2_series(chain, xi);
    out << "H2 (psi series): PASS  value = " << format_double(h2)
        << "  explicit terms = " << terms << "\n";
  } catch (const Error& e) {
    out << "H2 (psi series): FAIL " << e.what() << "\n";
    pass = false;
  }

  // H3: cf increment ratio, with the elementary bound nu(|xi| W) as the
  // certificate.
  try {
    std::vector<double> grid;
    for (double t : cfg.t_grid)
      if (t != 0.0) grid.push_back(t);
    if (grid.empty()) grid = {0.01, 0.05, 0.1};
    const double ratio = h3_audit(chain, xi, weight_kind, grid);
    const Distribution nu = stationary_distribution(chain);
    Vector W = Vector::Ones(chain.n_states());
    if (weight_kind == NormKind::VWeighted) W = *chain.V;
    const double bound =
        (nu.weights.array() * xi.values.cwiseAbs().array() * W.array()).sum();
    const bool ok = ratio <= bound * (1.0 + 1e-9) + 1e-12;
    out << "H3 (cf increment ratio): " << (ok ? "PASS" : "FAIL")
        << "  max ratio = " << format_double(ratio)
        << "  bound nu(|xi| W) = " << format_double(bound) << "\n";
    pass = pass && ok;
  } catch (const Error& e) {
    out << "H3 (cf increment ratio): FAIL " << e.what() << "\n";
    pass = false;
  }

  // H4: Doeblin-Fortet audit.
  try {
    Vector W = Vector::Ones(chain.n_states());
    if (weight_kind == NormKind::VWeighted) W = *chain.V;
    std::vector<double> grid;
    for (double t : cfg.t_grid)
      if (t != 0.0) grid.push_back(t);
    const DoeblinFortetResult df =
        doeblin_fortet_audit(chain, xi, W, grid, cfg.audit_n_max);
    out << "H4 (Doeblin-Fortet): PASS  kappa_hat = "
        << format_double(df.kappa_hat)
        << "  C_hat = " << format_double(df.C_hat)
        << "  drift sup(QW/W) = " << format_double(df.drift_ratio) << "\n";
  } catch (const Error& e) {
    out << "H4 (Doeblin-Fortet): FAIL " << e.what() << "\n";
    pass = false;
  }

  if (chain.V) {
    const double dom = dominance_constant(chain, xi);
    out << "domination |xi|^3 <= c V: c = " << format_double(dom) << "\n";
  }

  out << "overall: " << (pass ? "PASS" : "FAIL") << "\n";
  return AuditOutcome{pass, out.str()};
}

std::string spectral_csv(const ExperimentConfig& cfg) {
  const ResolvedModel rm = resolve_model(cfg);
  const Distribution nu = stationary_distribution(rm.chain);
  const CVector ones = CVector::Ones(rm.chain.n_states());

  std::string csv =
      "t,re_lambda,im_lambda,abs_lambda,rho,b1,b2,b3,recon_residual\n";
  for (double t : cfg.t_grid) {
    if (t == 0.0) continue;
    const SpectralData sd = spectral_decompose(rm.chain, rm.xi, t);
    const double abs_t = std::abs(t);
    const double b1 =
        (nu.weights.array() * (sd.v - ones).cwiseAbs().array()).sum() / abs_t;
    const double b2 = std::abs(bdot(sd.phi, ones) - 1.0) / abs_t;
    double b3 = 0.0;
    {
      CVector g = ones;
      double rho_pow = 1.0;
      for (int k = 1; k <= 20; ++k) {
        g = sd.N * g;
        rho_pow *= std::max(sd.rho, 1e-12);
        const double numerator =
            (nu.weights.array() * g.cwiseAbs().array()).sum();
        if (numerator > 1e-300 && rho_pow > 1e-250)
          b3 = std::max(b3, numerator / (rho_pow * abs_t));
      }
    }
    // Decomposition identity residual over n <= 5 with f = 1.
    double recon = 0.0;
    const CMatrix M = build_kernel(rm.chain, rm.xi, t).M;
    CVector direct = ones;
    CVector remainder = ones;
    Complex lambda_pow = 1.0;
    const Complex phi_one = bdot(sd.phi, ones);
    for (int k = 1; k <= 5; ++k) {
      direct = M * direct;
      remainder = sd.N * remainder;
      lambda_pow *= sd.lambda;
      const CVector reconstructed = lambda_pow * phi_one * sd.v + remainder;
      recon = std::max(recon,
                       (direct - reconstructed).cwiseAbs().maxCoeff());
    }
    csv += format_double(t) + "," + format_double(sd.lambda.real()) + "," +
           format_double(sd.lambda.imag()) + "," +
           format_double(std::abs(sd.lambda)) + "," + format_double(sd.rho) +
           "," + format_double(b1) + "," + format_double(b2) + "," +
           format_double(b3) + "," + format_double(recon) + "\n";
  }
  return csv;
}

std::string cf_csv(const ExperimentConfig& cfg) {
  const ResolvedModel rm = resolve_model(cfg);
  std::string csv = "n,t,re_cf,im_cf,gap,gap_sqrt_n_over_t\n";
  for (int n : cfg.n_grid) {
    for (double t : cfg.t_grid) {
      if (t == 0.0) continue;
      const Complex cf = exact_cf_sn(rm.chain, rm.xi, rm.mu0, n, t);
      const double gap =
          std::abs(cf - Complex(std::exp(-0.5 * t * t), 0.0));
      csv += std::to_string(n) + "," + format_double(t) + "," +
             format_double(cf.real()) + "," + format_double(cf.imag()) + "," +
             format_double(gap) + "," +
             format_double(gap * std::sqrt(n) / std::abs(t)) + "\n";
    }
  }
  return csv;
}

std::string dist_csv(const ExperimentConfig& cfg) {
  const ResolvedModel rm = resolve_model(cfg);
  const RowsResult rows = compute_rows(rm, cfg, nullptr);
  std::string csv = "n,D_n,sqrt_n_D_n,esseen_bound\n";
  for (const RateRow& r : rows.rows)
    csv += std::to_string(r.n) + "," + format_double(r.d_n) + "," +
           format_double(r.sqrt_n_d_n) + "," + format_double(r.esseen) + "\n";
  return csv;
}

}  // namespace cltlab
