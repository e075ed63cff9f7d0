// dvforge: data-valuation experiment runner.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dvforge/runner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int cmd_ingest(const std::string& source, const std::string& format,
               const std::vector<std::size_t>& splits, std::uint64_t seed, int binarize_class,
               bool standardize_features, const std::string& out_dir) {
  dvf::DatasetSpec spec;
  spec.path = source;
  spec.format = format;
  if (splits.size() == 3) {
    spec.n_train = splits[0];
    spec.n_val = splits[1];
    spec.n_test = splits[2];
  }
  spec.binarize_positive_class = binarize_class;
  spec.standardize = standardize_features;
  spec.split_seed = seed;

  const dvf::Dataset ds = dvf::load_dataset(spec);
  fs::create_directories(out_dir);
  const std::string canonical = out_dir + "/dataset.csv";
  {
    std::ofstream os(canonical);
    dvf::emit_csv(os, ds);
  }
  json manifest{{"source", source},
                {"format", format},
                {"canonical", canonical},
                {"records", ds.size()},
                {"features", ds.features.cols()},
                {"num_classes", ds.num_classes},
                {"splits",
                 {{"train", ds.indices_of(dvf::Split::train).size()},
                  {"validation", ds.indices_of(dvf::Split::validation).size()},
                  {"test", ds.indices_of(dvf::Split::test).size()}}},
                {"binarize_positive_class", binarize_class},
                {"standardize", standardize_features},
                {"split_seed", seed},
                {"checksum", dvf::dataset_checksum(ds)},
                {"provenance", ds.provenance}};
  std::ofstream ms(out_dir + "/manifest.json");
  ms << manifest.dump(2) << "\n";
  std::cout << manifest.dump(2) << "\n";
  return 0;
}

int cmd_inject_noise(const std::string& input, const std::string& output, double rate,
                     const std::string& kind, std::uint64_t seed) {
  std::ifstream is(input);
  if (!is) {
    std::cerr << "error: cannot open " << input << "\n";
    return 1;
  }
  dvf::Dataset ds = dvf::parse_csv(is);
  dvf::NoiseSpec spec;
  spec.rate = rate;
  spec.kind = kind == "circular_shift" ? dvf::NoiseKind::circular_shift
                                       : dvf::NoiseKind::binary_flip;
  spec.seed = seed;
  ds = dvf::inject_noise(ds, spec);
  std::ofstream os(output);
  dvf::emit_csv(os, ds);
  std::cout << "wrote " << output << " (" << ds.size() << " records, "
            << std::count(ds.noise_mask.begin(), ds.noise_mask.end(), 1) << " corrupted)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dvforge: train-set valuation with a bandit PPO agent and baselines"};
  app.require_subcommand(1);

  // ingest
  std::string source, format = "csv", out_dir = "ingested";
  std::vector<std::size_t> splits;
  std::uint64_t seed = 0;
  int binarize_class = -1;
  bool no_standardize = false;
  auto* ingest = app.add_subcommand("ingest", "parse a source file into a canonical dataset");
  ingest->add_option("source", source, "input file")->required();
  ingest->add_option("--format", format, "csv | libsvm | embedding");
  ingest->add_option("--splits", splits, "train,validation,test counts")->delimiter(',');
  ingest->add_option("--seed", seed, "split shuffle seed");
  ingest->add_option("--binarize", binarize_class, "positive class for binarization");
  ingest->add_flag("--no-standardize", no_standardize, "skip feature standardization");
  ingest->add_option("--out", out_dir, "output directory");

  // inject-noise
  std::string noise_in, noise_out = "noisy.csv", noise_kind = "binary_flip";
  double noise_rate = 0.15;
  std::uint64_t noise_seed = 0;
  auto* inject = app.add_subcommand("inject-noise", "corrupt train labels of a canonical dataset");
  inject->add_option("input", noise_in, "canonical dataset CSV")->required();
  inject->add_option("--out", noise_out, "output CSV");
  inject->add_option("--rate", noise_rate, "noise rate in [0,1)");
  inject->add_option("--kind", noise_kind, "binary_flip | circular_shift");
  inject->add_option("--seed", noise_seed, "sampling seed");

  // run
  std::string config_path;
  int jobs = 1;
  bool deterministic = false;
  std::uint64_t master_seed_override = 0;
  bool has_seed_override = false;
  auto* run = app.add_subcommand("run", "execute the experiment grid from a config file");
  run->add_option("config", config_path, "TOML experiment config")->required();
  run->add_option("--jobs", jobs, "parallel cell workers");
  run->add_flag("--deterministic", deterministic, "single worker, zeroed wall-clock fields");
  run->add_option("--seed", master_seed_override, "override master_seed")
      ->each([&](const std::string&) { has_seed_override = true; });

  // report
  std::string report_dir;
  auto* report = app.add_subcommand("report", "regenerate tables and plots from run outputs");
  report->add_option("output_dir", report_dir, "directory holding runrecords.jsonl")->required();

  // time-bench
  std::string bench_config, bench_out = "timing.csv";
  std::vector<std::size_t> bench_sizes{100, 200, 400};
  std::vector<std::string> bench_methods{"loo", "tmc_shap", "rlboost"};
  bool bench_deterministic = false;
  auto* bench = app.add_subcommand("time-bench", "wall-clock and fit-count scaling table");
  bench->add_option("config", bench_config, "TOML experiment config")->required();
  bench->add_option("--sizes", bench_sizes, "train sizes to test")->delimiter(',');
  bench->add_option("--methods", bench_methods, "methods to time")->delimiter(',');
  bench->add_option("--out", bench_out, "output CSV");
  bench->add_flag("--deterministic", bench_deterministic, "zero wall-clock fields");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      return cmd_ingest(source, format, splits, seed, binarize_class, !no_standardize, out_dir);
    }
    if (*inject) {
      return cmd_inject_noise(noise_in, noise_out, noise_rate, noise_kind, noise_seed);
    }
    if (*run) {
      dvf::ExperimentConfig cfg = dvf::ExperimentConfig::load(config_path);
      if (has_seed_override) cfg.master_seed = master_seed_override;
      std::string out = cfg.output_dir;
      if (const char* env_out = std::getenv("DVFORGE_OUT")) out = env_out;
      dvf::RunOptions opts;
      opts.jobs = jobs;
      opts.deterministic = deterministic;
      const int failures = dvf::run_experiment(cfg, out, opts);
      if (failures > 0) {
        std::cerr << failures << " cell(s) failed\n";
        return 2;
      }
      std::cout << "run complete: " << out << "\n";
      return 0;
    }
    if (*report) {
      dvf::regenerate_report(report_dir);
      std::cout << "report regenerated: " << report_dir << "\n";
      return 0;
    }
    if (*bench) {
      dvf::ExperimentConfig cfg = dvf::ExperimentConfig::load(bench_config);
      const auto rows = dvf::time_bench(cfg, bench_sizes, bench_methods, bench_deterministic);
      std::ofstream os(bench_out);
      dvf::write_timing_csv(os, rows);
      dvf::write_timing_csv(std::cout, rows);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
