#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "geniu/autograd.hpp"
#include "geniu/optim.hpp"
#include "json.hpp"

namespace geniu {

enum class ArchKind { mlp, smallcnn };

// mlp: `widths` are hidden layer sizes. smallcnn: `widths` are the channels of
// the stride-2 3x3 conv blocks, followed by global average pooling and a
// linear head.
struct ArchSpec {
  ArchKind kind = ArchKind::mlp;
  std::vector<std::size_t> widths{128};
  Shape input_shape{1, 8, 8};
  std::size_t num_classes = 10;

  void validate() const;
};

struct ModelParams {
  ArchSpec arch;
  ParamList<float> params;

  std::size_t parameter_count() const;
};

ModelParams init_model(const ArchSpec& arch, std::uint64_t seed);

// Builds the logits graph [batch, K] from parameter handles in ModelParams order.
Var<float> forward_graph(const ArchSpec& arch, const std::vector<Var<float>>& params, const Var<float>& images);

// Inference without gradients. images is [batch, C, H, W].
TensorF forward(const ModelParams& model, const TensorF& images);

// Same as forward(), evaluated in chunks to bound graph memory.
TensorF forward_chunked(const ModelParams& model, const TensorF& images, std::size_t chunk = 512);

std::vector<int> argmax_rows(const TensorF& logits);

// Natural-log entropy of softmax(logits) per row: -sum p log p.
std::vector<double> logit_entropy(const TensorF& logits);

std::uint64_t fingerprint(const ModelParams& model);

nlohmann::json arch_to_json(const ArchSpec& arch);
ArchSpec arch_from_json(const nlohmann::json& j);

void save_model(const std::filesystem::path& dir, const ModelParams& model, const nlohmann::json& meta = {});
ModelParams load_model(const std::filesystem::path& dir);

}  // namespace geniu
