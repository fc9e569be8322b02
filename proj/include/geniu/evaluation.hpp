#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "geniu/classifier.hpp"
#include "geniu/data.hpp"
#include "geniu/noise.hpp"

namespace geniu {

// KL(p || q) in nats after adding `smoothing` to both and renormalizing.
double kl_divergence(std::vector<double> p, std::vector<double> q, double smoothing = 1e-12);

// Seeded sample (without replacement) of up to `count` training images from
// the given classes.
TensorF sample_classes(const Dataset& ds, const std::vector<int>& classes, std::size_t count, std::uint64_t seed);

struct KlReport {
  std::vector<double> per_noise;  // in the order of `classes`
  double total = 0.0;
  double mean = 0.0;
};

// p_ref: mean softmax response over `reference` images. For each listed
// class k, p_obs = softmax(f(z_k)); reports KL(p_obs || p_ref).
KlReport kl_perception(const ModelParams& model, const TensorF& reference, const NoiseBank& bank,
                       const std::vector<int>& classes);

template <typename F>
double time_ms(F&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

struct StorageReport {
  std::uintmax_t noise_bytes = 0;
  std::uintmax_t generator_bytes = 0;
  std::uintmax_t model_bytes = 0;
  std::uintmax_t dataset_bytes = 0;
  double ratio = 0.0;  // (noise + generator) / dataset
};

// Sizes of saved artifact directories against the raw training-set size.
StorageReport storage_report(const std::filesystem::path& noise_dir, const std::filesystem::path& generator_dir,
                             const std::filesystem::path& model_dir, std::uintmax_t dataset_bytes);

}  // namespace geniu
