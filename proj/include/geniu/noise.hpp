#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "geniu/classifier.hpp"

namespace geniu {

// One trainable prompt per class. noises[k] has the shape of a single input
// sample and labels[k] == k.
struct NoiseBank {
  std::vector<TensorF> noises;
  std::vector<int> labels;
  int trained_at_epoch = -1;
  std::uint64_t classifier_fingerprint = 0;

  std::size_t num_classes() const noexcept { return noises.size(); }
  Shape sample_shape() const;
  // Stacks all prompts into [K, C, H, W].
  TensorF stacked() const;
  void validate() const;
};

NoiseBank init_noise(const Shape& input_shape, std::size_t num_classes, std::uint64_t seed);

struct NoiseTrainLog {
  // ce[step][k]: cross-entropy of prompt k before update `step`.
  std::vector<std::vector<double>> ce;
  std::vector<double> final_ce;
};

// Adam on every prompt against its own label's cross-entropy under the frozen
// classifier. Prompts are independent: the batch loss is a plain sum.
NoiseTrainLog train_noise_bank(NoiseBank& bank, const ModelParams& classifier, std::size_t steps, double lr);

// True iff argmax f(z_k) == k for every k.
bool gate_check(const NoiseBank& bank, const ModelParams& classifier);

void save_noise_bank(const std::filesystem::path& dir, const NoiseBank& bank);
NoiseBank load_noise_bank(const std::filesystem::path& dir);

}  // namespace geniu
