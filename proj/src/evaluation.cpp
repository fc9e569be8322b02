#include "geniu/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "geniu/bundle.hpp"
#include "geniu/random.hpp"

namespace geniu {

double kl_divergence(std::vector<double> p, std::vector<double> q, double smoothing) {
  if (p.empty() || p.size() != q.size()) throw std::invalid_argument("kl_divergence: distributions differ in size");
  auto normalize = [smoothing](std::vector<double>& v) {
    double s = 0.0;
    for (auto& x : v) s += (x += smoothing);
    for (auto& x : v) x /= s;
  };
  normalize(p);
  normalize(q);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) kl += p[i] * std::log(p[i] / q[i]);
  return std::max(kl, 0.0);
}

TensorF sample_classes(const Dataset& ds, const std::vector<int>& classes, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (std::find(classes.begin(), classes.end(), ds.labels[i]) != classes.end()) idx.push_back(i);
  }
  if (idx.empty()) throw std::invalid_argument("sample_classes: no samples of the requested classes");
  Rng rng = make_rng(seed, "reference-sample");
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(count, idx.size()));
  std::sort(idx.begin(), idx.end());
  return ds.subset(idx).images;
}

KlReport kl_perception(const ModelParams& model, const TensorF& reference, const NoiseBank& bank,
                       const std::vector<int>& classes) {
  if (reference.rank() != 4 || reference.dim(0) == 0) throw std::invalid_argument("kl_perception: no reference samples");
  if (classes.empty()) throw std::invalid_argument("kl_perception: no noises to compare");
  const std::size_t k = model.arch.num_classes;
  const TensorF ref_p = softmax_rows(forward_chunked(model, reference));
  std::vector<double> p_ref(k, 0.0);
  for (std::size_t i = 0; i < ref_p.dim(0); ++i)
    for (std::size_t j = 0; j < k; ++j) p_ref[j] += ref_p[i * k + j];
  for (auto& v : p_ref) v /= static_cast<double>(ref_p.dim(0));

  const TensorF obs = softmax_rows(forward(model, bank.stacked()));
  KlReport r;
  for (int c : classes) {
    if (c < 0 || static_cast<std::size_t>(c) >= bank.num_classes()) throw std::invalid_argument("kl_perception: class out of range");
    std::vector<double> p_obs(obs.data() + static_cast<std::size_t>(c) * k, obs.data() + (static_cast<std::size_t>(c) + 1) * k);
    r.per_noise.push_back(kl_divergence(p_obs, p_ref));
  }
  r.total = std::accumulate(r.per_noise.begin(), r.per_noise.end(), 0.0);
  r.mean = r.total / static_cast<double>(r.per_noise.size());
  return r;
}

StorageReport storage_report(const std::filesystem::path& noise_dir, const std::filesystem::path& generator_dir,
                             const std::filesystem::path& model_dir, std::uintmax_t dataset_bytes) {
  for (const auto& d : {noise_dir, generator_dir, model_dir}) {
    if (!std::filesystem::exists(d / "manifest.json")) {
      throw std::runtime_error("storage report: missing artifact " + d.string());
    }
  }
  if (dataset_bytes == 0) throw std::invalid_argument("storage report: dataset size must be > 0");
  StorageReport r;
  r.noise_bytes = directory_bytes(noise_dir);
  r.generator_bytes = directory_bytes(generator_dir);
  r.model_bytes = directory_bytes(model_dir);
  r.dataset_bytes = dataset_bytes;
  r.ratio = static_cast<double>(r.noise_bytes + r.generator_bytes) / static_cast<double>(dataset_bytes);
  return r;
}

}  // namespace geniu
