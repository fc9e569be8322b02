#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "geniu/tensor.hpp"

namespace geniu {

enum class Split { train, test };
enum class Provenance { idx_file, synthetic };

// Labeled image collection. images is [n, channels, height, width].
struct Dataset {
  TensorF images;
  std::vector<int> labels;
  std::size_t num_classes = 0;
  Split split = Split::train;
  Provenance provenance = Provenance::synthetic;

  std::size_t size() const noexcept { return labels.size(); }
  Shape sample_shape() const;
  std::size_t sample_elements() const;
  std::vector<std::size_t> class_counts() const;
  // Bytes the samples occupy in their native storage (u8 pixels for IDX,
  // f32 features for synthetic data).
  std::size_t raw_bytes() const;

  TensorF sample(std::size_t i) const;
  Dataset subset(const std::vector<std::size_t>& indices) const;
  // Samples whose label is (keep=true) or is not (keep=false) in classes.
  Dataset filter_classes(const std::vector<int>& classes, bool keep) const;

  void validate() const;
};

class DataError : public std::runtime_error {
 public:
  enum class Kind { bad_magic, truncated, count_mismatch, io, invalid_argument, empty_class };

  DataError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// MNIST-family IDX pair. num_classes == 0 infers max(label)+1.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 Split split = Split::train, std::size_t num_classes = 0);

struct BlobSplits {
  Dataset train;
  Dataset test;
};

// K isotropic Gaussian classes in dim dimensions, reshaped to [n,1,h,w] with
// h*w == dim. Pairwise centre distance is approximately `separation`.
// Train and test both hold n_per_class samples per class.
BlobSplits synth_blobs(std::size_t num_classes, std::size_t dim, std::size_t n_per_class, double separation,
                       double noise_std, std::uint64_t seed);

struct ImbalanceSpec {
  std::vector<int> majority;
  std::variant<double, std::vector<double>> rate = 1.0;

  // Effective keep-rate per class; majority classes are forced to 1.
  std::vector<double> keep_rates(std::size_t num_classes) const;
  bool is_vary() const { return std::holds_alternative<std::vector<double>>(rate); }
};

// Rates used for the "vary" setting (one per class, K = 10).
const std::vector<double>& vary_rates();

Dataset build_imbalanced(const Dataset& ds, const ImbalanceSpec& spec, std::uint64_t seed);

struct Batch {
  TensorF images;
  std::vector<int> labels;
  std::vector<std::size_t> indices;
};

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, std::uint64_t shuffle_seed);
Batch gather(const Dataset& ds, const std::vector<std::size_t>& indices);
std::vector<Batch> batches(const Dataset& ds, std::size_t batch_size, std::uint64_t shuffle_seed);

}  // namespace geniu
