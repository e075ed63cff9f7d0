// Dataset ingestion (LibSVM text, CSV, embedding binary), splits,
// label-noise injection, binarization, standardization.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace dvf {

enum class Split : std::uint8_t { train, validation, test, unused };

struct Dataset {
  Eigen::MatrixXd features;       // M x d, dense
  std::vector<int> labels;        // in [0, num_classes)
  int num_classes = 2;
  std::vector<Split> split;       // per record
  std::vector<std::uint8_t> noise_mask;  // empty = no noise injected
  std::vector<std::string> provenance;   // source path + transform log

  std::size_t size() const { return labels.size(); }
  std::vector<int> indices_of(Split s) const;
  Eigen::MatrixXd rows(const std::vector<int>& ids) const;
  std::vector<int> labels_of(const std::vector<int>& ids) const;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class NoiseKind { binary_flip, circular_shift };

struct NoiseSpec {
  double rate = 0.0;  // in [0,1)
  NoiseKind kind = NoiseKind::binary_flip;
  std::uint64_t seed = 0;
};

// `<label> <index>:<value> ...` with 1-based ascending indices; text after '#'
// is ignored. Binary {-1,+1} labels map to {0,1}. Errors carry line numbers.
Dataset parse_libsvm(std::istream& in);
void emit_libsvm(std::ostream& out, const Dataset& ds);

// CSV with a header row; the label column is named `label`. Optional `split`
// (train/validation/test) and `noisy` (0/1) columns are honored when present.
Dataset parse_csv(std::istream& in);
void emit_csv(std::ostream& out, const Dataset& ds);

// Flips floor(rate * train_count) uniformly sampled train labels; validation
// and test are never touched. binary_flip: y -> 1-y (binary only);
// circular_shift: y -> (y+1) mod num_classes.
Dataset inject_noise(const Dataset& ds, const NoiseSpec& spec);

Dataset binarize(const Dataset& ds, int positive_class);

// Seeded shuffle then contiguous train/validation/test assignment.
// Records beyond the three counts keep their prior tag but are not reachable
// through indices_of; counts must sum to <= M.
Dataset assign_splits(const Dataset& ds, std::size_t n_train, std::size_t n_val,
                      std::size_t n_test, std::uint64_t seed);

// Standardize every feature to train-split mean 0 / std 1.
Dataset standardize(const Dataset& ds);

// Binary embedding file: "DVFORGE-EMB-1", u32 M, u32 d, M*d little-endian f32,
// then M u16 labels. Features are widened to doubles on load.
inline constexpr const char* kEmbeddingMagic = "DVFORGE-EMB-1";
Dataset load_embeddings(const std::string& path);
void save_embeddings(const std::string& path, const Dataset& ds);

// FNV-1a over the serialized feature/label bytes; used in manifests.
std::uint64_t dataset_checksum(const Dataset& ds);

}  // namespace dvf
