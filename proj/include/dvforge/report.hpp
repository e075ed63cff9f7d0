// Metrics and reporting: noise-detection ROC/AUC, mean/std score tables,
// timing tables, deterministic SVG plots.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dvf {

// Per-record data values with provenance.
struct ValueReport {
  std::string method;
  int runs = 1;                    // scoring passes / permutations averaged
  std::vector<int> record_ids;     // ids into the dataset
  std::vector<double> values;      // mean value per record
  std::vector<std::vector<double>> per_pass;  // one vector per pass, aligned to record_ids
};

struct RunRecord {
  std::string method;
  double noise_rate = 0.0;
  std::uint64_t run_seed = 0;
  double test_accuracy = 0.0;
  std::vector<int> record_ids;
  std::vector<double> values;
  std::vector<std::uint8_t> noisy;  // ground-truth corruption flag per valued record
  double wall_clock_s = 0.0;
  long long inner_fit_count = 0;
};

struct RocCurve {
  std::vector<double> thresholds;  // distinct scores, descending
  std::vector<double> tpr;
  std::vector<double> fpr;
  double auc = 0.0;
};

// Positives are the clean records (noise_mask false); scores are the values.
// Ties get half credit, so auc equals the normalized Mann-Whitney statistic.
// Throws std::invalid_argument when the mask is single-class.
RocCurve roc_auc(const std::vector<double>& values, const std::vector<std::uint8_t>& noise_mask);

struct SummaryCell {
  std::string method;
  double noise_rate = 0.0;
  double mean = 0.0;
  double stddev = 0.0;  // sample std, n-1 denominator; 0 when count == 1
  int count = 0;
};

// Sorted by (method, noise_rate) for stable output.
std::vector<SummaryCell> aggregate_runs(const std::vector<RunRecord>& records);

void write_scores_csv(std::ostream& os, const std::vector<RunRecord>& records);
void write_values_csv(std::ostream& os, const std::vector<RunRecord>& records);
void write_roc_csv(std::ostream& os, const std::string& method, const RocCurve& curve);
void write_summary_csv(std::ostream& os, const std::vector<SummaryCell>& cells);
void write_summary_json(std::ostream& os, const std::vector<SummaryCell>& cells);

struct TimingRow {
  std::string method;
  std::size_t train_size = 0;
  double wall_clock_s = 0.0;
  long long inner_fit_count = 0;
};
void write_timing_csv(std::ostream& os, const std::vector<TimingRow>& rows);

// Deterministic SVG output (no timestamps): same inputs, same bytes.
struct NamedCurve {
  std::string name;
  RocCurve curve;
};
// Returns false (and logs a warning) when `curves` is empty; no file written.
bool render_roc_svg(const std::string& path, const std::vector<NamedCurve>& curves);
bool render_score_bars_svg(const std::string& path, const std::vector<SummaryCell>& cells);

}  // namespace dvf
