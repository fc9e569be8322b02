#include "geniu/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "geniu/random.hpp"

namespace geniu {

Shape Dataset::sample_shape() const {
  const auto& s = images.shape();
  return Shape(s.begin() + 1, s.end());
}

std::size_t Dataset::sample_elements() const {
  return element_count(sample_shape());
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (int y : labels) ++counts.at(static_cast<std::size_t>(y));
  return counts;
}

std::size_t Dataset::raw_bytes() const {
  const std::size_t per_element = provenance == Provenance::idx_file ? 1 : sizeof(float);
  return size() * sample_elements() * per_element;
}

TensorF Dataset::sample(std::size_t i) const {
  const std::size_t m = sample_elements();
  std::vector<float> v(images.data() + i * m, images.data() + (i + 1) * m);
  return TensorF(sample_shape(), std::move(v));
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  if (indices.empty()) throw DataError(DataError::Kind::invalid_argument, "subset: no indices");
  const std::size_t m = sample_elements();
  Shape shape = images.shape();
  shape[0] = indices.size();
  std::vector<float> v;
  v.reserve(indices.size() * m);
  Dataset out;
  for (auto i : indices) {
    if (i >= size()) throw DataError(DataError::Kind::invalid_argument, "subset: index out of range");
    v.insert(v.end(), images.data() + i * m, images.data() + (i + 1) * m);
    out.labels.push_back(labels[i]);
  }
  out.images = TensorF(std::move(shape), std::move(v));
  out.num_classes = num_classes;
  out.split = split;
  out.provenance = provenance;
  return out;
}

Dataset Dataset::filter_classes(const std::vector<int>& classes, bool keep) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < size(); ++i) {
    const bool member = std::find(classes.begin(), classes.end(), labels[i]) != classes.end();
    if (member == keep) idx.push_back(i);
  }
  return subset(idx);
}

void Dataset::validate() const {
  if (images.rank() != 4) throw DataError(DataError::Kind::invalid_argument, "images must be [n,c,h,w]");
  if (images.dim(0) != labels.size()) {
    throw DataError(DataError::Kind::count_mismatch, "images/labels count mismatch");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw DataError(DataError::Kind::invalid_argument, "label " + std::to_string(y) + " outside class range");
    }
  }
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError(DataError::Kind::truncated, "truncated header: " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

std::vector<unsigned char> read_payload(std::istream& in, std::size_t n, const std::string& path) {
  std::vector<unsigned char> buf(n);
  if (n && !in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n))) {
    throw DataError(DataError::Kind::truncated, "truncated payload: " + path);
  }
  return buf;
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path, Split split,
                 std::size_t num_classes) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw DataError(DataError::Kind::io, "cannot open " + images_path.string());
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw DataError(DataError::Kind::io, "cannot open " + labels_path.string());

  if (read_be32(img, images_path) != 0x00000803u) {
    throw DataError(DataError::Kind::bad_magic, "bad image magic in " + images_path.string());
  }
  const std::size_t n_img = read_be32(img, images_path);
  const std::size_t rows = read_be32(img, images_path);
  const std::size_t cols = read_be32(img, images_path);

  if (read_be32(lab, labels_path) != 0x00000801u) {
    throw DataError(DataError::Kind::bad_magic, "bad label magic in " + labels_path.string());
  }
  const std::size_t n_lab = read_be32(lab, labels_path);
  if (n_img != n_lab) {
    throw DataError(DataError::Kind::count_mismatch,
                    "IDX count mismatch: " + std::to_string(n_img) + " images vs " + std::to_string(n_lab) + " labels");
  }
  if (n_img == 0 || rows == 0 || cols == 0) throw DataError(DataError::Kind::invalid_argument, "empty IDX file");

  const auto pixels = read_payload(img, n_img * rows * cols, images_path.string());
  const auto raw_labels = read_payload(lab, n_lab, labels_path.string());

  Dataset ds;
  std::vector<float> v(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) v[i] = static_cast<float>(pixels[i]) / 255.0f;
  ds.images = TensorF({n_img, 1, rows, cols}, std::move(v));
  ds.labels.assign(raw_labels.begin(), raw_labels.end());
  std::size_t inferred = 0;
  for (int y : ds.labels) inferred = std::max(inferred, static_cast<std::size_t>(y) + 1);
  ds.num_classes = num_classes ? num_classes : inferred;
  ds.split = split;
  ds.provenance = Provenance::idx_file;
  ds.validate();
  return ds;
}

BlobSplits synth_blobs(std::size_t num_classes, std::size_t dim, std::size_t n_per_class, double separation,
                       double noise_std, std::uint64_t seed) {
  if (num_classes < 2) throw DataError(DataError::Kind::invalid_argument, "synth_blobs: need at least 2 classes");
  if (dim < 2) throw DataError(DataError::Kind::invalid_argument, "synth_blobs: dim must be >= 2");
  if (n_per_class == 0) throw DataError(DataError::Kind::invalid_argument, "synth_blobs: n_per_class must be > 0");
  std::size_t h = 0;
  for (std::size_t d = 2; d * d <= dim; ++d) {
    if (dim % d == 0) h = d;
  }
  if (h == 0) {
    throw DataError(DataError::Kind::invalid_argument,
                    "synth_blobs: dim " + std::to_string(dim) + " has no h*w factorisation with h,w >= 2");
  }
  const std::size_t w = dim / h;

  std::normal_distribution<double> normal(0.0, 1.0);
  Rng center_rng = make_rng(seed, "blob-centers");
  std::vector<std::vector<double>> centers(num_classes, std::vector<double>(dim));
  for (auto& c : centers) {
    double norm = 0;
    for (auto& v : c) {
      v = normal(center_rng);
      norm += v * v;
    }
    // Near-orthogonal directions of radius s/sqrt(2) put pairwise gaps near s.
    const double radius = separation / std::sqrt(2.0);
    for (auto& v : c) v *= radius / std::sqrt(norm);
  }

  auto draw = [&](std::string_view purpose, Split split) {
    Rng rng = make_rng(seed, purpose);
    Dataset ds;
    std::vector<float> v;
    v.reserve(num_classes * n_per_class * dim);
    for (std::size_t i = 0; i < n_per_class; ++i) {
      for (std::size_t k = 0; k < num_classes; ++k) {
        for (std::size_t j = 0; j < dim; ++j) v.push_back(static_cast<float>(centers[k][j] + noise_std * normal(rng)));
        ds.labels.push_back(static_cast<int>(k));
      }
    }
    ds.images = TensorF({num_classes * n_per_class, 1, h, w}, std::move(v));
    ds.num_classes = num_classes;
    ds.split = split;
    ds.provenance = Provenance::synthetic;
    return ds;
  };
  return {draw("blob-train", Split::train), draw("blob-test", Split::test)};
}

std::vector<double> ImbalanceSpec::keep_rates(std::size_t num_classes) const {
  std::vector<double> rates;
  if (const auto* r = std::get_if<double>(&rate)) {
    rates.assign(num_classes, *r);
  } else {
    rates = std::get<std::vector<double>>(rate);
    if (rates.size() != num_classes) {
      throw DataError(DataError::Kind::invalid_argument, "imbalance: rate vector has " + std::to_string(rates.size()) +
                                                             " entries for " + std::to_string(num_classes) +
                                                             " classes");
    }
  }
  for (int m : majority) {
    if (m < 0 || static_cast<std::size_t>(m) >= num_classes) {
      throw DataError(DataError::Kind::invalid_argument, "imbalance: majority class out of range");
    }
    rates[static_cast<std::size_t>(m)] = 1.0;
  }
  for (double r : rates) {
    if (!(r > 0.0 && r <= 1.0)) {
      throw DataError(DataError::Kind::invalid_argument, "imbalance: rate " + std::to_string(r) + " outside (0,1]");
    }
  }
  return rates;
}

const std::vector<double>& vary_rates() {
  static const std::vector<double> rates{0.2, 0.7, 0.3, 0.3, 0.6, 0.2, 0.2, 0.6, 0.2, 0.6};
  return rates;
}

Dataset build_imbalanced(const Dataset& ds, const ImbalanceSpec& spec, std::uint64_t seed) {
  if (ds.split != Split::train) {
    throw DataError(DataError::Kind::invalid_argument, "build_imbalanced: only training splits are rebalanced");
  }
  const auto rates = spec.keep_rates(ds.num_classes);
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < ds.num_classes; ++k) {
    auto& idx = by_class[k];
    const auto keep = static_cast<std::size_t>(std::floor(rates[k] * static_cast<double>(idx.size())));
    if (keep == 0) {
      throw DataError(DataError::Kind::empty_class, "build_imbalanced: class " + std::to_string(k) + " would be empty");
    }
    if (keep < idx.size()) {
      Rng rng = make_rng(seed, "imbalance", k);
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(keep);
    }
    kept.insert(kept.end(), idx.begin(), idx.end());
  }
  std::sort(kept.begin(), kept.end());
  return ds.subset(kept);
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, std::uint64_t shuffle_seed) {
  if (batch_size == 0) throw DataError(DataError::Kind::invalid_argument, "batch size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(shuffle_seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    out.emplace_back(order.begin() + start, order.begin() + std::min(n, start + batch_size));
  }
  return out;
}

Batch gather(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Dataset sub = ds.subset(indices);
  return {std::move(sub.images), std::move(sub.labels), indices};
}

std::vector<Batch> batches(const Dataset& ds, std::size_t batch_size, std::uint64_t shuffle_seed) {
  std::vector<Batch> out;
  for (auto& idx : batch_indices(ds.size(), batch_size, shuffle_seed)) out.push_back(gather(ds, idx));
  return out;
}

}  // namespace geniu
