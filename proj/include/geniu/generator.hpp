#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "geniu/autograd.hpp"
#include "geniu/noise.hpp"
#include "geniu/optim.hpp"
#include "json.hpp"

namespace geniu {

enum class OutputActivation { identity, sigmoid };

// Convolutional VAE mapping a noise prompt (shaped like a data sample) to a
// proxy sample. Encoder: stride-2 3x3 conv blocks with `channels`, then mu and
// log-variance heads of size latent_dim. Decoder mirrors it with
// nearest-neighbour upsampling + 3x3 convs back to the data shape.
struct GeneratorSpec {
  Shape data_shape{1, 8, 8};
  std::vector<std::size_t> channels{16, 32};
  std::size_t latent_dim = 32;
  double lambda = 2.5e-4;
  OutputActivation output = OutputActivation::identity;

  void validate() const;
  // Spatial sizes after each encoder block, starting with the data size.
  std::vector<std::pair<std::size_t, std::size_t>> spatial_sizes() const;
};

struct GeneratorParams {
  GeneratorSpec spec;
  ParamList<float> params;
  bool trained = false;
  std::size_t steps_trained = 0;
};

GeneratorParams init_generator(const GeneratorSpec& spec, std::uint64_t seed);

template <typename T>
struct VaeGraph {
  Var<T> recon;
  Var<T> mu;
  Var<T> logvar;
};

// eps == nullptr selects the mean latent; otherwise code = mu + exp(logvar/2) * eps.
VaeGraph<float> vae_graph(const GeneratorSpec& spec, const std::vector<Var<float>>& params, const Var<float>& z,
                          const TensorF* eps);

struct VaeOutput {
  TensorF recon;
  TensorF mu;
  TensorF logvar;
};

VaeOutput vae_forward(const GeneratorParams& gen, const TensorF& z_batch, bool sample, std::uint64_t seed);

template <typename T>
struct GenLossGraph {
  Var<T> gen;
  Var<T> rec;
  Var<T> dis;
};

// rec = mean squared error; dis = 1/(2K) * sum(1 + logvar - exp(logvar) - mu^2)
// with K the batch size; gen = rec - lambda * dis.
template <typename T>
GenLossGraph<T> loss_gen(const Var<T>& recon, const Var<T>& target, const Var<T>& mu, const Var<T>& logvar,
                         double lambda);

struct GenLossValues {
  double gen;
  double rec;
  double dis;
};

template <typename T>
GenLossValues loss_gen_values(const Tensor<T>& recon, const Tensor<T>& target, const Tensor<T>& mu,
                              const Tensor<T>& logvar, double lambda);

// targets[k] holds the supervision samples for class k (>= 1 each). Step s
// pairs prompt k with targets[k][s % targets[k].size()].
struct SupervisionTargets {
  std::vector<std::vector<TensorF>> per_class;
};

struct GenTrainLog {
  std::vector<GenLossValues> steps;
};

GenTrainLog train_generator(GeneratorParams& gen, const NoiseBank& bank, const SupervisionTargets& targets,
                            std::size_t steps, double lr, std::uint64_t seed, AdamState<float>* state = nullptr);

struct ProxySet {
  TensorF images;  // [K * per_class, C, H, W]
  std::vector<int> labels;
};

struct ProxyOptions {
  std::size_t per_class = 1;
  // Mean latent for every proxy when false. When per_class > 1, copies after
  // the first use sampled latents regardless, so proxies stay distinct.
  bool sample = false;
  std::uint64_t seed = 0;
};

ProxySet generate_proxies(const NoiseBank& bank, const GeneratorParams& gen, const ProxyOptions& options = {});

nlohmann::json generator_spec_to_json(const GeneratorSpec& spec);
GeneratorSpec generator_spec_from_json(const nlohmann::json& j);

void save_generator(const std::filesystem::path& dir, const GeneratorParams& gen);
GeneratorParams load_generator(const std::filesystem::path& dir);

}  // namespace geniu
