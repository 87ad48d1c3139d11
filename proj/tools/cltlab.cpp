// cltlab: central limit theorem rate experiments for finite-state Markov
// chains and scalar iterative models.
//
//   cltlab spectral --config cfg.ini [--out DIR] [--seed N]
//   cltlab cf       --config cfg.ini [--out DIR] [--seed N]
//   cltlab dist     --config cfg.ini [--out DIR] [--seed N]
//   cltlab rate     --config cfg.ini [--out DIR] [--seed N]
//   cltlab audit    --config cfg.ini [--seed N]
//
// audit exits 0 only when every requested hypothesis audit passes.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cltlab/rate.hpp"

namespace {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw cltlab::Error(cltlab::ErrorCode::IoError,
                        "cannot open config '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw cltlab::Error(cltlab::ErrorCode::IoError,
                        "cannot write '" + path + "'");
  out << content;
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  long long seed = -1;
};

cltlab::ExperimentConfig load_config(const CommonArgs& args) {
  cltlab::ExperimentConfig cfg =
      cltlab::parse_config(read_text_file(args.config_path));
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  return cfg;
}

void add_common(CLI::App* sub, CommonArgs& args, bool with_out = true) {
  sub->add_option("--config", args.config_path, "experiment config file")
      ->required();
  if (with_out)
    sub->add_option("--out", args.out_dir, "output directory override");
  sub->add_option("--seed", args.seed, "seed override");
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw cltlab::Error(cltlab::ErrorCode::IoError,
                        "cannot create '" + dir + "': " + ec.message());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CLT rate laboratory for finite Markov chains"};
  app.require_subcommand(1);

  CommonArgs spectral_args, cf_args, dist_args, rate_args, audit_args;
  CLI::App* spectral =
      app.add_subcommand("spectral", "per-t spectral data CSV");
  CLI::App* cf = app.add_subcommand("cf", "characteristic function CSV");
  CLI::App* dist = app.add_subcommand("dist", "Kolmogorov distance CSV");
  CLI::App* rate =
      app.add_subcommand("rate", "rate experiment: CSV, SVG plot, summary");
  CLI::App* audit =
      app.add_subcommand("audit", "hypothesis audits (H1-H4, condition (*))");
  add_common(spectral, spectral_args);
  add_common(cf, cf_args);
  add_common(dist, dist_args);
  add_common(rate, rate_args);
  add_common(audit, audit_args, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (spectral->parsed()) {
      const auto cfg = load_config(spectral_args);
      ensure_out_dir(cfg.out_dir);
      write_text_file(cfg.out_dir + "/spectral.csv",
                      cltlab::spectral_csv(cfg));
      std::cout << "wrote " << cfg.out_dir << "/spectral.csv\n";
    } else if (cf->parsed()) {
      const auto cfg = load_config(cf_args);
      ensure_out_dir(cfg.out_dir);
      write_text_file(cfg.out_dir + "/cf.csv", cltlab::cf_csv(cfg));
      std::cout << "wrote " << cfg.out_dir << "/cf.csv\n";
    } else if (dist->parsed()) {
      const auto cfg = load_config(dist_args);
      ensure_out_dir(cfg.out_dir);
      write_text_file(cfg.out_dir + "/dist.csv", cltlab::dist_csv(cfg));
      std::cout << "wrote " << cfg.out_dir << "/dist.csv\n";
    } else if (rate->parsed()) {
      const auto cfg = load_config(rate_args);
      std::vector<cltlab::RateRow> partial;
      try {
        const cltlab::RateReport report =
            cltlab::run_experiment(cfg, &partial);
        cltlab::emit_report(report, cfg, cfg.out_dir);
        std::cout << "tau_hat = " << report.fit.tau_hat << " CI95 = ["
                  << report.fit.ci_lo << ", " << report.fit.ci_hi << "]\n";
        std::cout << "wrote " << cfg.out_dir
                  << "/{rate.csv,plot.svg,summary.txt}\n";
      } catch (const cltlab::Error&) {
        // Flush whatever completed before the failure.
        if (!partial.empty()) {
          ensure_out_dir(cfg.out_dir);
          std::string csv = "n,D_n,sqrt_n_D_n,esseen_bound\n";
          for (const auto& r : partial) {
            csv += std::to_string(r.n) + "," + std::to_string(r.d_n) + "," +
                   std::to_string(r.sqrt_n_d_n) + "," +
                   std::to_string(r.esseen) + "\n";
          }
          write_text_file(cfg.out_dir + "/rate.partial.csv", csv);
          std::cerr << "partial rows flushed to " << cfg.out_dir
                    << "/rate.partial.csv\n";
        }
        throw;
      }
    } else if (audit->parsed()) {
      const auto cfg = load_config(audit_args);
      const cltlab::AuditOutcome outcome = cltlab::run_audits(cfg);
      std::cout << outcome.text;
      return outcome.pass ? 0 : 1;
    }
  } catch (const cltlab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
