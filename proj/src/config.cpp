#include "dvforge/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace dvf {

const std::string& TomlValue::as_string() const {
  if (auto* s = std::get_if<std::string>(&v)) return *s;
  throw ConfigError("expected a string value");
}

double TomlValue::as_number() const {
  if (auto* d = std::get_if<double>(&v)) return *d;
  throw ConfigError("expected a numeric value");
}

long TomlValue::as_int() const { return static_cast<long>(as_number()); }

bool TomlValue::as_bool() const {
  if (auto* b = std::get_if<bool>(&v)) return *b;
  throw ConfigError("expected a boolean value");
}

const std::vector<double>& TomlValue::as_numbers() const {
  if (auto* a = std::get_if<std::vector<double>>(&v)) return *a;
  throw ConfigError("expected a numeric array");
}

const std::vector<std::string>& TomlValue::as_strings() const {
  if (auto* a = std::get_if<std::vector<std::string>>(&v)) return *a;
  throw ConfigError("expected a string array");
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

TomlValue parse_scalar(const std::string& tok, std::size_t line_no) {
  if (tok.size() >= 2 && tok.front() == '"' && tok.back() == '"') {
    return {tok.substr(1, tok.size() - 2)};
  }
  if (tok == "true") return {true};
  if (tok == "false") return {false};
  try {
    std::size_t pos = 0;
    const double d = std::stod(tok, &pos);
    if (pos == tok.size()) return {d};
  } catch (...) {
  }
  throw ConfigError("line " + std::to_string(line_no) + ": cannot parse value '" + tok + "'");
}

TomlValue parse_value(const std::string& raw, std::size_t line_no) {
  const std::string s = trim(raw);
  if (s.empty()) throw ConfigError("line " + std::to_string(line_no) + ": missing value");
  if (s.front() == '[') {
    if (s.back() != ']') {
      throw ConfigError("line " + std::to_string(line_no) + ": unterminated array");
    }
    std::vector<std::string> items;
    std::string cur;
    bool in_str = false;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      const char c = s[i];
      if (c == '"') in_str = !in_str;
      if (c == ',' && !in_str) {
        items.push_back(trim(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!trim(cur).empty()) items.push_back(trim(cur));
    std::vector<double> nums;
    std::vector<std::string> strs;
    bool all_num = true;
    for (const auto& it : items) {
      TomlValue v = parse_scalar(it, line_no);
      if (auto* d = std::get_if<double>(&v.v)) {
        nums.push_back(*d);
      } else if (auto* str = std::get_if<std::string>(&v.v)) {
        all_num = false;
        strs.push_back(*str);
      } else {
        throw ConfigError("line " + std::to_string(line_no) + ": arrays hold numbers or strings");
      }
    }
    if (all_num) return {nums};
    if (nums.empty()) return {strs};
    throw ConfigError("line " + std::to_string(line_no) + ": mixed array types");
  }
  return parse_scalar(s, line_no);
}

}  // namespace

TomlDoc parse_toml(const std::string& text) {
  TomlDoc doc;
  std::string section;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    // strip comments outside strings
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_str = !in_str;
      if (line[i] == '#' && !in_str) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      doc[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    doc[section][key] = parse_value(line.substr(eq + 1), line_no);
  }
  return doc;
}

TomlDoc parse_toml_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_toml(buf.str());
}

namespace {

const TomlValue* find(const TomlDoc& doc, const std::string& section, const std::string& key) {
  auto s = doc.find(section);
  if (s == doc.end()) return nullptr;
  auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

template <typename T, typename F>
void maybe(const TomlDoc& doc, const std::string& sec, const std::string& key, T& dst, F get) {
  if (const TomlValue* v = find(doc, sec, key)) dst = static_cast<T>(get(*v));
}

void set_num(const TomlDoc& doc, const std::string& sec, const std::string& key, double& dst) {
  maybe(doc, sec, key, dst, [](const TomlValue& v) { return v.as_number(); });
}
void set_int(const TomlDoc& doc, const std::string& sec, const std::string& key, int& dst) {
  maybe(doc, sec, key, dst, [](const TomlValue& v) { return v.as_int(); });
}
void set_long(const TomlDoc& doc, const std::string& sec, const std::string& key, long& dst) {
  maybe(doc, sec, key, dst, [](const TomlValue& v) { return v.as_int(); });
}
void set_u64(const TomlDoc& doc, const std::string& sec, const std::string& key,
             std::uint64_t& dst) {
  maybe(doc, sec, key, dst, [](const TomlValue& v) { return v.as_int(); });
}
void set_str(const TomlDoc& doc, const std::string& sec, const std::string& key,
             std::string& dst) {
  maybe(doc, sec, key, dst, [](const TomlValue& v) { return v.as_string(); });
}
void set_bool(const TomlDoc& doc, const std::string& sec, const std::string& key, bool& dst) {
  maybe(doc, sec, key, dst, [](const TomlValue& v) { return v.as_bool(); });
}

}  // namespace

ExperimentConfig ExperimentConfig::from_toml(const TomlDoc& doc) {
  ExperimentConfig c;

  set_str(doc, "dataset", "path", c.dataset.path);
  set_str(doc, "dataset", "format", c.dataset.format);
  if (const TomlValue* v = find(doc, "dataset", "splits")) {
    const auto& n = v->as_numbers();
    if (n.size() != 3) throw ConfigError("dataset.splits needs [train, validation, test]");
    c.dataset.n_train = static_cast<std::size_t>(n[0]);
    c.dataset.n_val = static_cast<std::size_t>(n[1]);
    c.dataset.n_test = static_cast<std::size_t>(n[2]);
  }
  set_int(doc, "dataset", "binarize", c.dataset.binarize_positive_class);
  set_bool(doc, "dataset", "standardize", c.dataset.standardize);
  set_u64(doc, "dataset", "split_seed", c.dataset.split_seed);

  if (const TomlValue* v = find(doc, "experiment", "noise_rates")) c.noise_rates = v->as_numbers();
  if (c.noise_rates.empty()) c.noise_rates = {0.0};
  std::string kind = "binary_flip";
  set_str(doc, "experiment", "noise_kind", kind);
  if (kind == "binary_flip") {
    c.noise_kind = NoiseKind::binary_flip;
  } else if (kind == "circular_shift") {
    c.noise_kind = NoiseKind::circular_shift;
  } else {
    throw ConfigError("unknown noise_kind '" + kind + "'");
  }
  if (const TomlValue* v = find(doc, "experiment", "methods")) c.methods = v->as_strings();
  if (c.methods.empty()) c.methods = {"baseline"};
  set_int(doc, "experiment", "runs_per_cell", c.runs_per_cell);
  if (c.runs_per_cell < 1) throw ConfigError("runs_per_cell must be >= 1");
  set_str(doc, "experiment", "output_dir", c.output_dir);
  set_u64(doc, "experiment", "master_seed", c.master_seed);
  set_int(doc, "experiment", "dvrl_retry_budget", c.dvrl_retry_budget);

  set_int(doc, "rlboost", "state_size", c.rlboost.state_size);
  set_int(doc, "rlboost", "model_dim", c.rlboost.encoder.model_dim);
  set_int(doc, "rlboost", "num_heads", c.rlboost.encoder.num_heads);
  set_int(doc, "rlboost", "num_layers", c.rlboost.encoder.num_layers);
  set_int(doc, "rlboost", "ff_hidden_dim", c.rlboost.encoder.ff_hidden_dim);
  set_long(doc, "rlboost", "total_steps", c.rlboost.agent.total_steps);
  set_num(doc, "rlboost", "clip_epsilon", c.rlboost.agent.clip_epsilon);
  set_num(doc, "rlboost", "c1", c.rlboost.agent.c1);
  set_num(doc, "rlboost", "c2", c.rlboost.agent.c2);
  set_num(doc, "rlboost", "lr", c.rlboost.agent.lr);
  set_int(doc, "rlboost", "train_batch", c.rlboost.agent.train_batch);
  set_int(doc, "rlboost", "epochs_per_update", c.rlboost.agent.epochs_per_update);
  set_int(doc, "rlboost", "rollout_size", c.rlboost.agent.rollout_size);
  set_bool(doc, "rlboost", "normalize_advantage", c.rlboost.agent.normalize_advantage);
  set_int(doc, "rlboost", "score_passes", c.rlboost.score_passes);
  set_num(doc, "rlboost", "value_threshold", c.rlboost.value_threshold);
  std::string mode = "CLS_SB";
  set_str(doc, "rlboost", "critic_mode", mode);
  c.rlboost.agent.critic_mode = critic_mode_from(mode);

  set_int(doc, "tmc_shap", "max_permutations", c.tmc.max_permutations);
  set_num(doc, "tmc_shap", "truncation_tol", c.tmc.truncation_tol);
  set_num(doc, "tmc_shap", "convergence_tol", c.tmc.convergence_tol);
  set_int(doc, "tmc_shap", "convergence_window", c.tmc.convergence_window);

  set_int(doc, "dvrl_lite", "hidden_dim", c.dvrl.hidden_dim);
  set_num(doc, "dvrl_lite", "lr", c.dvrl.lr);
  set_int(doc, "dvrl_lite", "steps", c.dvrl.steps);
  set_int(doc, "dvrl_lite", "batch_size", c.dvrl.batch_size);
  set_int(doc, "dvrl_lite", "moving_window", c.dvrl.moving_window);

  set_num(doc, "inner", "l2", c.inner.l2);
  set_int(doc, "inner", "fit_iters", c.inner.fit_iters);
  set_num(doc, "inner", "tol", c.inner.tol);
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  return from_toml(parse_toml_file(path));
}

}  // namespace dvf
