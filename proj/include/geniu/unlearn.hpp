#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "geniu/classifier.hpp"
#include "geniu/generator.hpp"
#include "geniu/noise.hpp"

// Data-free unlearning. Nothing here may include data.hpp: the library links
// only the tensor core and model definitions.

namespace geniu {

enum class TuningStrategy { in_batch, impair_repair };

struct UnlearnRequest {
  std::vector<int> forget;
  std::size_t rounds = 100;
  double lr = 4e-4;
  TuningStrategy strategy = TuningStrategy::in_batch;
  // Floor on the forget cross-entropy inside the reciprocal term.
  double epsilon = 1e-6;
  std::size_t proxies_per_class = 1;
  std::uint64_t seed = 0;

  void validate(std::size_t num_classes) const;
};

struct RoundEval {
  double retain_acc;
  double forget_acc;
};

// Called with the model after each round (round 0 = before tuning). Must not
// retain the reference.
using RoundObserver = std::function<std::optional<RoundEval>(std::size_t round, const ModelParams& model)>;

struct RoundRecord {
  std::size_t round = 0;
  std::string phase;  // "in_batch", "impair" or "repair"
  double loss = 0.0;
  double forget_ce = 0.0;  // mean CE over forget proxies
  double retain_ce = 0.0;  // mean CE over retain proxies
  std::optional<RoundEval> eval;
};

struct UnlearnResult {
  ModelParams model;
  std::vector<RoundRecord> trajectory;
  ProxySet proxies;
};

// Retain proxies contribute their cross-entropy, forget proxies the
// reciprocal of max(CE, epsilon). Returns the scalar graph.
template <typename T>
Var<T> in_batch_loss_logits(const Var<T>& logits, const std::vector<int>& labels, const std::vector<int>& forget,
                            double epsilon);

Var<float> in_batch_loss(const ArchSpec& arch, const std::vector<Var<float>>& params, const ProxySet& proxies,
                         const std::vector<int>& forget, double epsilon);

template <typename T>
T in_batch_loss_from_ce(const std::vector<T>& ce, const std::vector<int>& labels, const std::vector<int>& forget,
                        T epsilon) {
  T total = 0;
  for (std::size_t i = 0; i < ce.size(); ++i) {
    bool f = false;
    for (int c : forget) f = f || c == labels[i];
    total += f ? T(1) / std::max(ce[i], epsilon) : ce[i];
  }
  return total;
}

UnlearnResult run_unlearning(const ModelParams& original, const NoiseBank& bank, const GeneratorParams& generator,
                             const UnlearnRequest& request, const RoundObserver& observer = {});

// Ascent on forget-proxy CE for `rounds` steps, then descent on retain-proxy CE
// for `rounds` steps, both with Adam at `lr`.
UnlearnResult impair_repair(const ModelParams& original, const ProxySet& proxies, const std::vector<int>& forget,
                            std::size_t rounds, double lr, const RoundObserver& observer = {});

// In-batch tuning on an already generated proxy set.
UnlearnResult in_batch_tuning(const ModelParams& original, const ProxySet& proxies, const UnlearnRequest& request,
                              const RoundObserver& observer = {});

std::string trajectory_csv(const std::vector<RoundRecord>& trajectory);

}  // namespace geniu
