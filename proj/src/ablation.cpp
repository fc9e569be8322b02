#include "geniu/ablation.hpp"

#include "geniu/random.hpp"

namespace geniu {

PostHocResult post_hoc_proxies(const ModelParams& original, const Dataset& train, const GeneratorSpec& gen_spec,
                               const TrainPhaseConfig& config) {
  config.validate();
  PromptTrainer prompts(original.arch, gen_spec, config.seed);
  PostHocResult out;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    prompts.step(original, train, config, epoch, log, out.log.events);
    out.log.epochs.push_back(std::move(log));
  }
  out.bank = std::move(prompts.bank);
  out.generator = std::move(prompts.generator);
  if (!out.generator.trained) out.log.warnings.push_back("post-hoc gate never passed: generator is untrained");
  return out;
}

ModelParams retrain_oracle(const ArchSpec& arch, const Dataset& retained, const TrainPhaseConfig& config) {
  TrainPhaseConfig c = config;
  c.train_prompts = false;
  c.noise_threshold.reset();
  return run_training_phase(retained, arch, GeneratorSpec{.data_shape = arch.input_shape}, c).classifier;
}

}  // namespace geniu
