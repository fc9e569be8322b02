#pragma once

#include "geniu/train.hpp"

namespace geniu {

struct PostHocResult {
  NoiseBank bank;
  GeneratorParams generator;
  PhaseLog log;
};

// Fresh prompts and generator trained against the frozen final classifier,
// with the same epoch count and step budgets as a training phase. This is the
// one place outside the training phase that reads the training set for
// prompt construction.
PostHocResult post_hoc_proxies(const ModelParams& original, const Dataset& train, const GeneratorSpec& gen_spec,
                               const TrainPhaseConfig& config);

// Classifier trained from scratch on retained-class data only.
ModelParams retrain_oracle(const ArchSpec& arch, const Dataset& retained, const TrainPhaseConfig& config);

}  // namespace geniu
