#include "dvforge/runner.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "dvforge/env.hpp"
#include "dvforge/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dvf {

namespace {

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// test accuracy of a fit on the given train ids; falls back to all train
// records when the selection is degenerate
double filtered_test_accuracy(const Dataset& ds, const std::vector<int>& selected,
                              const LogisticConfig& inner) {
  const std::vector<int> test_ids = ds.indices_of(Split::test);
  auto fit_score = [&](const std::vector<int>& ids) {
    const InnerModel m = fit_inner(ds.rows(ids), ds.labels_of(ids), ds.num_classes, inner);
    return accuracy(m, ds.rows(test_ids), ds.labels_of(test_ids));
  };
  try {
    return fit_score(selected);
  } catch (const SingleClassError&) {
  } catch (const EmptyDataError&) {
  }
  return fit_score(ds.indices_of(Split::train));
}

std::vector<std::uint8_t> mask_for(const Dataset& ds, const std::vector<int>& record_ids) {
  std::vector<std::uint8_t> out(record_ids.size(), 0);
  if (ds.noise_mask.empty()) return out;
  for (std::size_t i = 0; i < record_ids.size(); ++i) {
    out[i] = ds.noise_mask[static_cast<std::size_t>(record_ids[i])];
  }
  return out;
}

json record_to_json(const RunRecord& r, const std::optional<RocCurve>& roc) {
  json j{{"method", r.method},
         {"noise_rate", r.noise_rate},
         {"seed", r.run_seed},
         {"test_accuracy", r.test_accuracy},
         {"wall_clock_s", r.wall_clock_s},
         {"inner_fit_count", r.inner_fit_count},
         {"record_ids", r.record_ids},
         {"values", r.values},
         {"noisy", r.noisy}};
  if (roc) j["auc"] = roc->auc;
  return j;
}

RunRecord record_from_json(const json& j) {
  RunRecord r;
  r.method = j.at("method");
  r.noise_rate = j.at("noise_rate");
  r.run_seed = j.at("seed");
  r.test_accuracy = j.at("test_accuracy");
  r.wall_clock_s = j.at("wall_clock_s");
  r.inner_fit_count = j.at("inner_fit_count");
  r.record_ids = j.at("record_ids").get<std::vector<int>>();
  r.values = j.at("values").get<std::vector<double>>();
  r.noisy = j.at("noisy").get<std::vector<std::uint8_t>>();
  return r;
}

void write_reports(const std::string& out_dir, const std::vector<RunRecord>& records) {
  {
    std::ofstream os(out_dir + "/scores.csv");
    write_scores_csv(os, records);
  }
  {
    std::ofstream os(out_dir + "/values.csv");
    write_values_csv(os, records);
  }
  const auto cells = aggregate_runs(records);
  {
    std::ofstream os(out_dir + "/summary.csv");
    write_summary_csv(os, cells);
  }
  {
    std::ofstream os(out_dir + "/summary.json");
    write_summary_json(os, cells);
  }

  // one ROC curve per (method, noise) cell with usable values, recomputed
  // from the stored per-record values of that cell's first run
  std::vector<NamedCurve> curves;
  std::ostringstream roc_rows;
  std::vector<std::pair<std::string, double>> seen;
  for (const auto& r : records) {
    if (r.values.empty() || r.noisy.empty()) continue;
    const auto key = std::make_pair(r.method, r.noise_rate);
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
    seen.push_back(key);
    bool clean = false, noisy = false;
    for (auto m : r.noisy) (m ? noisy : clean) = true;
    if (!clean || !noisy) continue;
    std::ostringstream name;
    name << r.method << "@" << r.noise_rate;
    const RocCurve curve = roc_auc(r.values, r.noisy);
    curves.push_back({name.str(), curve});
    for (std::size_t i = 0; i < curve.fpr.size(); ++i) {
      roc_rows << name.str() << ',' << curve.fpr[i] << ',' << curve.tpr[i] << '\n';
    }
  }
  {
    std::ofstream os(out_dir + "/roc.csv");
    os << "method,fpr,tpr\n" << roc_rows.str();
  }
  render_roc_svg(out_dir + "/roc.svg", curves);
  render_score_bars_svg(out_dir + "/scores.svg", cells);
}

}  // namespace

Dataset load_dataset(const DatasetSpec& spec) {
  if (!fs::exists(spec.path)) {
    throw ConfigError("dataset path does not exist: " + spec.path);
  }
  Dataset ds;
  if (spec.format == "libsvm") {
    std::ifstream is(spec.path);
    ds = parse_libsvm(is);
  } else if (spec.format == "csv") {
    std::ifstream is(spec.path);
    ds = parse_csv(is);
  } else if (spec.format == "embedding") {
    ds = load_embeddings(spec.path);
  } else {
    throw ConfigError("unknown dataset format '" + spec.format + "'");
  }
  ds.provenance.insert(ds.provenance.begin(), spec.path);
  if (spec.binarize_positive_class >= 0) ds = binarize(ds, spec.binarize_positive_class);
  if (spec.n_train + spec.n_val + spec.n_test > 0) {
    ds = assign_splits(ds, spec.n_train, spec.n_val, spec.n_test, spec.split_seed);
  }
  if (spec.standardize) ds = standardize(ds);
  return ds;
}

std::uint64_t child_seed(std::uint64_t master_seed, double noise_rate,
                         const std::string& method, int run) {
  std::ostringstream key;
  key << master_seed << '|' << noise_rate << '|' << method << '|' << run;
  return seed_hash(key.str());
}

CellResult run_cell(const ExperimentConfig& cfg, const Dataset& noisy_ds, double noise_rate,
                    const std::string& method, int run, const std::string& out_dir) {
  CellResult result;
  RunRecord& rec = result.record;
  rec.method = method;
  rec.noise_rate = noise_rate;
  rec.run_seed = child_seed(cfg.master_seed, noise_rate, method, run);

  const auto t0 = std::chrono::steady_clock::now();
  const long long fits_before = inner_fit_count();
  const std::vector<int> train_ids = noisy_ds.indices_of(Split::train);

  if (method == "baseline") {
    rec.test_accuracy = filtered_test_accuracy(noisy_ds, train_ids, cfg.inner);
  } else if (method == "rlboost") {
    EnvConfig env_cfg;
    env_cfg.state_size = cfg.rlboost.state_size;
    env_cfg.inner = cfg.inner;
    ValuationEnv env(noisy_ds, env_cfg);
    AgentConfig acfg = cfg.rlboost.agent;
    acfg.seed = rec.run_seed;
    PpoBanditAgent agent(cfg.rlboost.encoder, acfg);
    std::ofstream log(out_dir + "/train_" + method + "_" + std::to_string(noise_rate) + "_" +
                      std::to_string(run) + ".jsonl");
    agent.train(env, log ? &log : nullptr);
    Rng score_rng(rec.run_seed ^ 0xabcdefull);
    const ValueReport report = agent.score_records(env, cfg.rlboost.score_passes, score_rng);
    rec.record_ids = report.record_ids;
    rec.values = report.values;
    std::vector<int> selected;
    for (std::size_t i = 0; i < report.values.size(); ++i) {
      if (report.values[i] > cfg.rlboost.value_threshold) {
        selected.push_back(report.record_ids[i]);
      }
    }
    rec.test_accuracy = filtered_test_accuracy(noisy_ds, selected, cfg.inner);
    agent.save(out_dir + "/ckpt_" + method + "_" + std::to_string(noise_rate) + "_" +
               std::to_string(run) + ".bin");
  } else if (method == "loo" || method == "tmc_shap") {
    std::vector<double> values;
    if (method == "loo") {
      values = loo_values(noisy_ds, cfg.inner);
    } else {
      ShapleyConfig scfg = cfg.tmc;
      scfg.seed = rec.run_seed;
      values = tmc_shapley(noisy_ds, cfg.inner, scfg);
    }
    rec.record_ids = train_ids;
    rec.values = values;
    rec.test_accuracy = threshold_sweep(values, noisy_ds, cfg.inner).final_test_score;
  } else if (method == "dvrl_lite") {
    DvrlConfig dcfg = cfg.dvrl;
    dcfg.seed = rec.run_seed;
    const std::vector<double> values = dvrl_lite(noisy_ds, cfg.inner, dcfg);
    rec.record_ids = train_ids;
    rec.values = values;
    std::vector<int> selected;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] > 0.5) selected.push_back(train_ids[i]);
    }
    rec.test_accuracy = filtered_test_accuracy(noisy_ds, selected, cfg.inner);
  } else {
    result.failed = true;
    result.error = "unknown method '" + method + "'";
    return result;
  }

  rec.inner_fit_count = inner_fit_count() - fits_before;
  rec.wall_clock_s = elapsed_s(t0);
  rec.noisy = mask_for(noisy_ds, rec.record_ids);
  if (!rec.values.empty()) {
    bool clean = false, noisy = false;
    for (auto m : rec.noisy) (m ? noisy : clean) = true;
    if (clean && noisy) result.roc = roc_auc(rec.values, rec.noisy);
  }
  return result;
}

int run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                   const RunOptions& opts) {
  fs::create_directories(out_dir);
  const int jobs = opts.deterministic ? 1 : std::max(1, opts.jobs);

  struct Cell {
    double noise_rate;
    std::string method;
    int run;
  };
  std::vector<Cell> cells;
  for (double rate : cfg.noise_rates) {
    for (const auto& method : cfg.methods) {
      for (int run = 0; run < cfg.runs_per_cell; ++run) cells.push_back({rate, method, run});
    }
  }

  // one noisy dataset per rate, shared by all that rate's cells
  std::map<double, Dataset> noisy;
  const Dataset base = load_dataset(cfg.dataset);
  for (double rate : cfg.noise_rates) {
    NoiseSpec spec{rate, cfg.noise_kind,
                   seed_hash(std::to_string(cfg.master_seed) + "|noise|" + std::to_string(rate))};
    noisy.emplace(rate, inject_noise(base, spec));
  }

  auto execute = [&](const Cell& cell) {
    const int budget = cell.method == "dvrl_lite" ? std::max(1, cfg.dvrl_retry_budget) : 1;
    CellResult r;
    for (int attempt = 0; attempt < budget; ++attempt) {
      try {
        r = run_cell(cfg, noisy.at(cell.noise_rate), cell.noise_rate, cell.method,
                     cell.run + attempt * 1000003, out_dir);
        r.attempts = attempt + 1;
        if (!r.failed) return r;
      } catch (const std::exception& e) {
        r.failed = true;
        r.error = e.what();
        r.attempts = attempt + 1;
      }
    }
    r.record.method = cell.method;
    r.record.noise_rate = cell.noise_rate;
    return r;
  };

  std::vector<CellResult> results(cells.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) results[i] = execute(cells[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.push_back(std::async(std::launch::async, [&]() {
        for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
          results[i] = execute(cells[i]);
        }
      }));
    }
    for (auto& f : workers) f.get();
  }

  int failures = 0;
  std::vector<RunRecord> records;
  {
    std::ofstream os(out_dir + "/runrecords.jsonl");
    for (auto& r : results) {
      if (r.failed) {
        ++failures;
        std::cerr << "cell failed (" << r.record.method << ", noise " << r.record.noise_rate
                  << "): " << r.error << "\n";
        continue;
      }
      if (opts.deterministic) r.record.wall_clock_s = 0.0;
      os << record_to_json(r.record, r.roc).dump() << "\n";
      records.push_back(r.record);
    }
  }
  write_reports(out_dir, records);
  return failures;
}

void regenerate_report(const std::string& out_dir) {
  const std::string path = out_dir + "/runrecords.jsonl";
  std::ifstream is(path);
  if (!is) throw std::runtime_error("no run outputs found at " + path);
  std::vector<RunRecord> records;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) records.push_back(record_from_json(json::parse(line)));
  }
  write_reports(out_dir, records);
}

std::vector<TimingRow> time_bench(const ExperimentConfig& cfg,
                                  const std::vector<std::size_t>& train_sizes,
                                  const std::vector<std::string>& methods,
                                  bool deterministic) {
  const Dataset base = load_dataset(cfg.dataset);
  std::vector<TimingRow> rows;
  for (const auto& method : methods) {
    for (std::size_t size : train_sizes) {
      Dataset ds = base;
      // shrink the train split to `size` records, keeping val/test intact
      std::size_t kept = 0;
      for (auto& tag : ds.split) {
        if (tag == Split::train && ++kept > size) tag = Split::unused;
      }
      if (kept < size) {
        throw std::invalid_argument("time-bench: train split smaller than requested size " +
                                    std::to_string(size));
      }
      reset_inner_fit_count();
      const auto t0 = std::chrono::steady_clock::now();
      if (method == "loo") {
        loo_values(ds, cfg.inner);
      } else if (method == "tmc_shap") {
        tmc_shapley(ds, cfg.inner, cfg.tmc);
      } else if (method == "rlboost") {
        EnvConfig env_cfg;
        env_cfg.state_size = cfg.rlboost.state_size;
        env_cfg.inner = cfg.inner;
        ValuationEnv env(ds, env_cfg);
        PpoBanditAgent agent(cfg.rlboost.encoder, cfg.rlboost.agent);
        agent.train(env);
      } else if (method == "dvrl_lite") {
        dvrl_lite(ds, cfg.inner, cfg.dvrl);
      } else {
        throw std::invalid_argument("time-bench: unknown method '" + method + "'");
      }
      rows.push_back({method, size, deterministic ? 0.0 : elapsed_s(t0), inner_fit_count()});
    }
  }
  return rows;
}

}  // namespace dvf
