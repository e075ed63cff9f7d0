#include "dvforge/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "dvforge/rng.hpp"

namespace dvf {

namespace {

[[noreturn]] void fail_line(std::size_t line_no, const std::string& what) {
  throw ParseError("line " + std::to_string(line_no) + ": " + what);
}

double parse_number(const std::string& tok, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) fail_line(line_no, "non-numeric token '" + tok + "'");
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (...) {
    fail_line(line_no, "non-numeric token '" + tok + "'");
  }
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
    default: return "unused";
  }
}

Split split_from(const std::string& s, std::size_t line_no) {
  if (s == "train") return Split::train;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  if (s == "unused") return Split::unused;
  fail_line(line_no, "unknown split tag '" + s + "'");
}

}  // namespace

std::vector<int> Dataset::indices_of(Split s) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == s) out.push_back(static_cast<int>(i));
  }
  return out;
}

Eigen::MatrixXd Dataset::rows(const std::vector<int>& ids) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), features.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = features.row(ids[i]);
  return out;
}

std::vector<int> Dataset::labels_of(const std::vector<int>& ids) const {
  std::vector<int> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) out[i] = labels[static_cast<std::size_t>(ids[i])];
  return out;
}

Dataset parse_libsvm(std::istream& in) {
  std::vector<double> raw_labels;
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
  std::size_t max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;  // blank line
    raw_labels.push_back(parse_number(tok, line_no));
    std::vector<std::pair<std::size_t, double>> row;
    std::size_t prev_index = 0;
    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) fail_line(line_no, "expected index:value, got '" + tok + "'");
      const double idx_d = parse_number(tok.substr(0, colon), line_no);
      if (idx_d < 1 || idx_d != std::floor(idx_d)) {
        fail_line(line_no, "feature index must be a positive integer, got '" +
                               tok.substr(0, colon) + "'");
      }
      const auto idx = static_cast<std::size_t>(idx_d);
      if (idx <= prev_index) {
        fail_line(line_no, "feature indices must be ascending (" + std::to_string(idx) +
                               " after " + std::to_string(prev_index) + ")");
      }
      prev_index = idx;
      max_index = std::max(max_index, idx);
      row.emplace_back(idx, parse_number(tok.substr(colon + 1), line_no));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("empty file");

  Dataset ds;
  const auto m = static_cast<Eigen::Index>(rows.size());
  ds.features = Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(max_index));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& [idx, v] : rows[i]) {
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(idx - 1)) = v;
    }
  }

  bool pm_binary = true;
  for (double l : raw_labels) {
    if (l != -1.0 && l != 1.0) pm_binary = false;
    if (l != std::floor(l)) throw ParseError("non-integer label " + fmt17(l));
  }
  ds.labels.resize(rows.size());
  if (pm_binary) {
    ds.num_classes = 2;
    for (std::size_t i = 0; i < rows.size(); ++i) ds.labels[i] = raw_labels[i] > 0 ? 1 : 0;
  } else {
    int max_label = 0;
    for (double l : raw_labels) {
      if (l < 0) throw ParseError("negative label " + fmt17(l) + " in multiclass data");
      max_label = std::max(max_label, static_cast<int>(l));
    }
    ds.num_classes = std::max(2, max_label + 1);
    for (std::size_t i = 0; i < rows.size(); ++i) ds.labels[i] = static_cast<int>(raw_labels[i]);
  }
  ds.split.assign(rows.size(), Split::train);
  ds.provenance.push_back("parse_libsvm");
  return ds;
}

void emit_libsvm(std::ostream& out, const Dataset& ds) {
  // every value is emitted, zeros included, so the column count survives
  // a round-trip
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.num_classes == 2) {
      out << (ds.labels[i] == 1 ? "+1" : "-1");
    } else {
      out << ds.labels[i];
    }
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
      out << ' ' << (j + 1) << ':' << fmt17(ds.features(static_cast<Eigen::Index>(i), j));
    }
    out << '\n';
  }
}

Dataset parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file");
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  long label_col = -1, split_col = -1, noisy_col = -1;
  std::vector<std::size_t> feature_cols;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == "label") label_col = static_cast<long>(j);
    else if (header[j] == "split") split_col = static_cast<long>(j);
    else if (header[j] == "noisy") noisy_col = static_cast<long>(j);
    else feature_cols.push_back(j);
  }
  if (label_col < 0) throw ParseError("header has no `label` column");

  std::vector<std::vector<double>> feat_rows;
  std::vector<int> labels;
  std::vector<Split> splits;
  std::vector<std::uint8_t> noisy;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (cells.size() != header.size()) {
      fail_line(line_no, "expected " + std::to_string(header.size()) + " cells, got " +
                             std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(feature_cols.size());
    for (auto j : feature_cols) row.push_back(parse_number(cells[j], line_no));
    feat_rows.push_back(std::move(row));
    const double l = parse_number(cells[static_cast<std::size_t>(label_col)], line_no);
    if (l != std::floor(l) || l < 0) fail_line(line_no, "label must be a nonnegative integer");
    labels.push_back(static_cast<int>(l));
    splits.push_back(split_col >= 0 ? split_from(cells[static_cast<std::size_t>(split_col)], line_no)
                                    : Split::train);
    if (noisy_col >= 0) {
      noisy.push_back(parse_number(cells[static_cast<std::size_t>(noisy_col)], line_no) != 0.0);
    }
  }
  if (feat_rows.empty()) throw ParseError("no data rows");

  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(feat_rows.size()),
                     static_cast<Eigen::Index>(feature_cols.size()));
  for (std::size_t i = 0; i < feat_rows.size(); ++i) {
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = feat_rows[i][j];
    }
  }
  ds.labels = std::move(labels);
  ds.num_classes = std::max(2, *std::max_element(ds.labels.begin(), ds.labels.end()) + 1);
  ds.split = std::move(splits);
  ds.noise_mask = std::move(noisy);
  ds.provenance.push_back("parse_csv");
  return ds;
}

void emit_csv(std::ostream& out, const Dataset& ds) {
  for (Eigen::Index j = 0; j < ds.features.cols(); ++j) out << 'f' << j << ',';
  out << "label,split";
  const bool has_noise = !ds.noise_mask.empty();
  if (has_noise) out << ",noisy";
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
      out << fmt17(ds.features(static_cast<Eigen::Index>(i), j)) << ',';
    }
    out << ds.labels[i] << ',' << split_name(ds.split[i]);
    if (has_noise) out << ',' << int(ds.noise_mask[i]);
    out << '\n';
  }
}

Dataset inject_noise(const Dataset& ds, const NoiseSpec& spec) {
  if (spec.rate < 0.0 || spec.rate >= 1.0) {
    throw std::invalid_argument("noise rate must be in [0,1), got " + std::to_string(spec.rate));
  }
  if (spec.kind == NoiseKind::binary_flip && ds.num_classes != 2) {
    throw std::invalid_argument("binary_flip noise requires 2 classes, dataset has " +
                                std::to_string(ds.num_classes));
  }
  Dataset out = ds;
  out.noise_mask.assign(ds.size(), 0);
  const std::vector<int> train_ids = ds.indices_of(Split::train);
  const auto k = static_cast<std::size_t>(spec.rate * static_cast<double>(train_ids.size()));
  Rng rng(spec.seed);
  for (int local : sample_without_replacement(rng, train_ids.size(), k)) {
    const auto id = static_cast<std::size_t>(train_ids[static_cast<std::size_t>(local)]);
    out.labels[id] = spec.kind == NoiseKind::binary_flip
                         ? 1 - out.labels[id]
                         : (out.labels[id] + 1) % ds.num_classes;
    out.noise_mask[id] = 1;
  }
  out.provenance.push_back("inject_noise rate=" + std::to_string(spec.rate));
  return out;
}

Dataset binarize(const Dataset& ds, int positive_class) {
  if (positive_class < 0 || positive_class >= ds.num_classes) {
    throw std::invalid_argument("positive_class " + std::to_string(positive_class) +
                                " out of range [0," + std::to_string(ds.num_classes) + ")");
  }
  Dataset out = ds;
  for (auto& l : out.labels) l = (l == positive_class) ? 1 : 0;
  out.num_classes = 2;
  out.provenance.push_back("binarize positive_class=" + std::to_string(positive_class));
  return out;
}

Dataset assign_splits(const Dataset& ds, std::size_t n_train, std::size_t n_val,
                      std::size_t n_test, std::uint64_t seed) {
  if (n_train + n_val + n_test > ds.size()) {
    throw std::invalid_argument("split counts " + std::to_string(n_train + n_val + n_test) +
                                " exceed dataset size " + std::to_string(ds.size()));
  }
  Dataset out = ds;
  Rng rng(seed);
  const std::vector<int> order = shuffled_indices(rng, ds.size());
  out.split.assign(ds.size(), Split::unused);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n_train; ++i) out.split[static_cast<std::size_t>(order[pos++])] = Split::train;
  for (std::size_t i = 0; i < n_val; ++i) out.split[static_cast<std::size_t>(order[pos++])] = Split::validation;
  for (std::size_t i = 0; i < n_test; ++i) out.split[static_cast<std::size_t>(order[pos++])] = Split::test;
  out.provenance.push_back("split seed=" + std::to_string(seed));
  return out;
}

Dataset standardize(const Dataset& ds) {
  const std::vector<int> train_ids = ds.indices_of(Split::train);
  if (train_ids.empty()) throw std::invalid_argument("standardize: no train split");
  Dataset out = ds;
  for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
    double mean = 0.0;
    for (int i : train_ids) mean += ds.features(i, j);
    mean /= static_cast<double>(train_ids.size());
    double var = 0.0;
    for (int i : train_ids) {
      const double d = ds.features(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(train_ids.size());
    const double sd = var > 0 ? std::sqrt(var) : 1.0;
    out.features.col(j) = (ds.features.col(j).array() - mean) / sd;
  }
  out.provenance.push_back("standardize (train statistics)");
  return out;
}

Dataset load_embeddings(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open " + path);
  std::string magic;
  std::getline(is, magic);
  if (magic != kEmbeddingMagic) throw ParseError("bad magic '" + magic + "' in " + path);
  std::uint32_t m = 0, d = 0;
  is.read(reinterpret_cast<char*>(&m), 4);
  is.read(reinterpret_cast<char*>(&d), 4);
  if (!is) throw ParseError("truncated header in " + path);
  if (m == 0) throw ParseError("empty embedding file " + path);

  std::vector<float> feats(static_cast<std::size_t>(m) * d);
  is.read(reinterpret_cast<char*>(feats.data()),
          static_cast<std::streamsize>(feats.size() * sizeof(float)));
  if (!is) {
    throw ParseError("truncated payload in " + path + ": expected " +
                     std::to_string(feats.size() * sizeof(float)) + " feature bytes");
  }
  std::vector<std::uint16_t> labels(m);
  is.read(reinterpret_cast<char*>(labels.data()),
          static_cast<std::streamsize>(labels.size() * sizeof(std::uint16_t)));
  if (!is) {
    throw ParseError("truncated payload in " + path + ": expected " +
                     std::to_string(labels.size() * sizeof(std::uint16_t)) + " label bytes");
  }

  Dataset ds;
  ds.features.resize(m, d);
  for (std::uint32_t i = 0; i < m; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) {
      ds.features(i, j) = static_cast<double>(feats[static_cast<std::size_t>(i) * d + j]);
    }
  }
  ds.labels.assign(labels.begin(), labels.end());
  ds.num_classes = std::max(2, *std::max_element(ds.labels.begin(), ds.labels.end()) + 1);
  ds.split.assign(m, Split::train);
  ds.provenance.push_back("load_embeddings " + path);
  return ds;
}

void save_embeddings(const std::string& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot open " + path + " for writing");
  os << kEmbeddingMagic << '\n';
  const auto m = static_cast<std::uint32_t>(ds.size());
  const auto d = static_cast<std::uint32_t>(ds.features.cols());
  os.write(reinterpret_cast<const char*>(&m), 4);
  os.write(reinterpret_cast<const char*>(&d), 4);
  for (std::uint32_t i = 0; i < m; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) {
      const float v = static_cast<float>(ds.features(i, j));
      os.write(reinterpret_cast<const char*>(&v), sizeof(float));
    }
  }
  for (int l : ds.labels) {
    const auto v = static_cast<std::uint16_t>(l);
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
}

std::uint64_t dataset_checksum(const Dataset& ds) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  mix(ds.features.data(), static_cast<std::size_t>(ds.features.size()) * sizeof(double));
  mix(ds.labels.data(), ds.labels.size() * sizeof(int));
  mix(ds.split.data(), ds.split.size());
  if (!ds.noise_mask.empty()) mix(ds.noise_mask.data(), ds.noise_mask.size());
  return h;
}

}  // namespace dvf
