#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cltlab/models.hpp"
#include "cltlab/types.hpp"

// Experiment harness: runs Kolmogorov-distance grids over n, fits the decay
// exponent tau_hat (D_n ~ n^{-tau_hat}; the classical Berry-Esseen regime is
// tau_hat = 1/2), and emits CSV / SVG / text reports.

namespace cltlab {

enum class ModelPreset {
  TwoState,
  BirthDeathV,
  Ar1Scalar,
  Ar1Vector,
  ChainFile
};
enum class Method { ExactLattice, MonteCarlo };
enum class ObservableKind { PmOne, StateIndex, Label, Values, StateValue };
enum class Mu0Kind { Stationary, Uniform, Point };

struct ExperimentConfig {
  // [model]
  ModelPreset preset = ModelPreset::TwoState;
  double a = 0.25;
  double b = 0.25;
  int grid_size = 15;      // birth_death_V
  double drift = 0.6;      // birth_death_V
  double ar_coeff = 0.5;   // ar1_scalar
  NoiseLaw noise;          // ar1 noise law
  int disc_grid = 121;     // AR(1) surrogate discretization
  double disc_radius = 3.0;
  std::string chain_path;  // chain_file
  Matrix ar_matrix;        // ar1_vector, row-major from config
  int dim = 1;

  // [observable]
  ObservableKind xi_kind = ObservableKind::PmOne;
  std::vector<double> xi_values;
  bool center = true;

  // [experiment]
  Method method = Method::ExactLattice;
  std::vector<int> n_grid = {64, 128, 256, 512, 1024, 2048, 4096};
  long long mc_samples_per_n = 0;  // 0 -> 100 * max(n_grid)
  std::uint64_t seed = 1;
  Mu0Kind mu0_kind = Mu0Kind::Stationary;
  int mu0_state = 0;
  std::vector<double> t_grid = {0.01, 0.02, 0.05, 0.1, 0.2, 0.3};
  double lattice_scale = 1.0;
  double esseen_T = 0.0;  // 0 -> sqrt(n)
  int burn_in = 64;
  int audit_n_max = 30;
  NormKind audit_weight = NormKind::Sup;
  bool audit_weight_explicit = false;

  // [output]
  std::string out_dir = "out";
};

// Line-oriented `key = value` format with [section] headers, '#' comments.
// All defaults are materialized; ParseError carries the line number,
// ValidationError the field name.
ExperimentConfig parse_config(const std::string& text);
std::string echo_config(const ExperimentConfig& config);

struct RateRow {
  int n = 0;
  double d_n = 0.0;
  double sqrt_n_d_n = 0.0;
  double esseen = 0.0;  // NaN when not computable (Monte Carlo on
                        // continuous models)
};

struct RateFit {
  double tau_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct RateReport {
  std::vector<RateRow> rows;
  RateFit fit;
  double sigma2 = 0.0;
  double kappa0 = 0.0;
  double h2_value = 0.0;
  double b1 = 0.0, b2 = 0.0, b3 = 0.0;
  std::string notes;
};

// Least squares of log D_n on log n, slope negated; 95% CI from the
// residual variance (Student t). Requires >= 3 rows with D_n > 0.
RateFit fit_rate_exponent(const std::vector<std::pair<double, double>>& rows);

// Runs the configured experiment. Work items over n are scheduled
// concurrently (CLTLAB_THREADS caps the worker count); Monte Carlo sampling
// shards across workers with per-shard seeds and merges deterministically.
// `partial` (optional) receives rows as they complete, so callers can flush
// partial results when an engine error aborts the run.
RateReport run_experiment(const ExperimentConfig& config,
                          std::vector<RateRow>* partial = nullptr);

// Writes rate.csv (header n,D_n,sqrt_n_D_n,esseen_bound), plot.svg (log-log
// with fitted line) and summary.txt into out_dir. Byte-stable for fixed
// inputs.
void emit_report(const RateReport& report, const ExperimentConfig& config,
                 const std::string& out_dir);

// H1-H4 audits (plus condition (*) for iterative presets); `pass` is the CLI
// exit criterion.
struct AuditOutcome {
  bool pass = false;
  std::string text;
};
AuditOutcome run_audits(const ExperimentConfig& config);

// Per-t spectral diagnostics CSV:
// t,re_lambda,im_lambda,abs_lambda,rho,b1,b2,b3,recon_residual
std::string spectral_csv(const ExperimentConfig& config);

// Per-(n,t) characteristic function CSV: n,t,re_cf,im_cf,gap,gap_sqrt_n_over_t
std::string cf_csv(const ExperimentConfig& config);

// Per-n distance CSV: n,D_n,sqrt_n_D_n,esseen_bound
std::string dist_csv(const ExperimentConfig& config);

}  // namespace cltlab
