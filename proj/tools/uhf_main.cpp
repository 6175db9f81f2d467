#include <iostream>

#include "CLI11.hpp"
#include "uhf/experiment.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key=value experiment file");
  cmd->add_option("--out", c.out, "output root (overrides UHF_OUT_ROOT and the config)");
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--jobs", c.jobs, "parallel jobs");
  cmd->add_option("--set", c.overrides, "extra key=value setting, may repeat");
}

uhf::ExperimentConfig assemble(const Common& c) {
  auto config = c.config.empty() ? uhf::ExperimentConfig{} : uhf::load_config(c.config);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw uhf::ConfigError("--set expects key=value, got '" + kv + "'");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) config.seed = *c.seed;
  if (c.jobs) config.jobs = *c.jobs;
  config.out = uhf::resolve_output_root(c.out, config.out).string();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tick price-change prediction experiments"};
  app.require_subcommand(1);

  Common ingest_opts, synth_opts, run_opts;
  std::vector<std::string> ingest_files;
  std::string report_dir;

  auto* ingest = app.add_subcommand("ingest", "parse tick files, write label histograms and split manifest");
  add_common(ingest, ingest_opts);
  ingest->add_option("files", ingest_files, "tick CSV files or glob patterns");

  auto* synth = app.add_subcommand("synth", "write synthetic tick files described by the config");
  add_common(synth, synth_opts);

  auto* run = app.add_subcommand("run", "train, fit, evaluate and write the report bundle");
  add_common(run, run_opts);

  auto* report = app.add_subcommand("report", "rebuild tables from a finished run directory");
  report->add_option("run_dir", report_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) {
      auto config = assemble(ingest_opts);
      auto inputs = ingest_files.empty() ? config.files : ingest_files;
      const auto r = uhf::cmd_ingest(inputs, config.out, config.model.window, config.train_ratio, config.max_ticks);
      std::cout << r.dir.string() << '\n' << r.stocks << " stock(s) ingested, " << r.excluded << " excluded\n";
      return 0;
    }
    if (synth->parsed()) {
      for (const auto& p : uhf::cmd_synth(assemble(synth_opts))) std::cout << p.string() << '\n';
      return 0;
    }
    if (run->parsed()) {
      const auto r = uhf::cmd_run(assemble(run_opts), std::cerr);
      std::cout << r.dir.string() << '\n'
                << r.jobs << " job(s), " << r.failed << " failed, " << r.resumed << " resumed\n";
      return r.failed == 0 ? 0 : 1;
    }
    std::cout << uhf::cmd_report(report_dir);
    return 0;
  } catch (const uhf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
