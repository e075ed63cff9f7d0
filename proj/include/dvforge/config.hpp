// Experiment configuration: a small TOML-subset reader ([section] tables,
// key = string/number/bool/array) feeding the typed ExperimentConfig.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "dvforge/agent.hpp"
#include "dvforge/baselines.hpp"
#include "dvforge/data.hpp"

namespace dvf {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TomlValue {
  std::variant<std::string, double, bool, std::vector<double>, std::vector<std::string>> v;

  const std::string& as_string() const;
  double as_number() const;
  long as_int() const;
  bool as_bool() const;
  const std::vector<double>& as_numbers() const;
  const std::vector<std::string>& as_strings() const;
};

using TomlTable = std::map<std::string, TomlValue>;
using TomlDoc = std::map<std::string, TomlTable>;

TomlDoc parse_toml(const std::string& text);
TomlDoc parse_toml_file(const std::string& path);

struct DatasetSpec {
  std::string path;
  std::string format = "csv";  // csv | libsvm | embedding
  std::size_t n_train = 0, n_val = 0, n_test = 0;  // 0,0,0 = keep file's split tags
  int binarize_positive_class = -1;  // <0 = off
  bool standardize = true;
  std::uint64_t split_seed = 0;
};

struct RlboostParams {
  int state_size = 200;
  EncoderConfig encoder;  // input_dim filled at run time
  AgentConfig agent;
  int score_passes = 5;
  double value_threshold = 0.5;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  std::vector<double> noise_rates;
  NoiseKind noise_kind = NoiseKind::binary_flip;
  std::vector<std::string> methods;
  int runs_per_cell = 5;
  std::string output_dir = "out";
  std::uint64_t master_seed = 0;
  int dvrl_retry_budget = 3;

  RlboostParams rlboost;
  ShapleyConfig tmc;
  DvrlConfig dvrl;
  LogisticConfig inner;

  static ExperimentConfig from_toml(const TomlDoc& doc);
  static ExperimentConfig load(const std::string& path);
};

}  // namespace dvf
