#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "geniu/classifier.hpp"
#include "geniu/data.hpp"
#include "geniu/generator.hpp"
#include "geniu/noise.hpp"

namespace geniu {

enum class OptimizerKind { sgd, adam };

struct ClassifierOptimizer {
  OptimizerKind kind = OptimizerKind::sgd;
  double lr = 0.01;
  double weight_decay = 1e-4;
  std::size_t batch_size = 256;
};

// One pass over seeded batches minimizing mean cross-entropy. Returns the
// sample-weighted mean batch loss. `adam` carries moments across epochs and is
// required when kind == adam.
double train_epoch(ModelParams& model, const Dataset& train, const ClassifierOptimizer& opt,
                   std::uint64_t shuffle_seed, AdamState<float>* adam = nullptr);

struct AccuracyReport {
  std::vector<double> per_class;
  std::vector<std::size_t> per_class_count;
  double overall = 0.0;
  double retain_micro = 0.0;
  double retain_macro = 0.0;
  // Present when the forget set is nonempty.
  std::optional<double> forget;
};

// Accuracy split by forget set. Throws when the forget set covers every class.
AccuracyReport evaluate(const ModelParams& model, const Dataset& test, const std::vector<int>& forget);

// Mean accuracy over the listed classes of a report.
double mean_class_accuracy(const AccuracyReport& report, const std::vector<int>& classes);

enum class SelectionMode { max_entropy, min_entropy };

struct Supervision {
  std::vector<std::vector<std::size_t>> indices;  // per class, best first
  SupervisionTargets targets;
};

// Top-B samples of each class by logit entropy (descending for max_entropy,
// ascending for min_entropy). Ties go to the lower dataset index.
Supervision select_supervision(const ModelParams& model, const Dataset& train, SelectionMode mode, std::size_t per_class);

struct TrainPhaseConfig {
  std::size_t epochs = 10;
  ClassifierOptimizer classifier;
  std::size_t noise_steps = 100;
  double noise_lr = 0.02;
  std::size_t generator_steps = 100;
  double generator_lr = 0.005;
  SelectionMode selection = SelectionMode::max_entropy;
  std::size_t supervision_per_class = 1;
  // Re-select supervision every this many generator epochs.
  std::size_t selection_interval = 1;
  // Noise training starts once train accuracy over threshold_classes (all
  // classes when empty) reaches this value.
  std::optional<double> noise_threshold;
  std::vector<int> threshold_classes;
  // false trains the classifier alone.
  bool train_prompts = true;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Stage { classifier, noise, gate, selection, generator };
const char* stage_name(Stage s);

struct StageEvent {
  std::size_t epoch;
  Stage stage;
};

struct StageTimings {
  double classifier_ms = 0, noise_ms = 0, gate_ms = 0, selection_ms = 0, generator_ms = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double classifier_loss = 0.0;
  std::optional<double> threshold_accuracy;
  bool noise_trained = false;
  std::vector<double> noise_ce_first;
  std::vector<double> noise_ce_last;
  bool gate = false;
  bool selected = false;
  bool generator_trained = false;
  double gen_loss = 0.0;
  double gen_rec_first = 0.0;  // reconstruction loss at the epoch's first step
  double gen_rec = 0.0;
  double gen_dis = 0.0;
  StageTimings timings;
};

struct PhaseLog {
  std::vector<EpochLog> epochs;
  std::vector<StageEvent> events;
  std::vector<std::string> warnings;
};

struct TrainPhaseResult {
  ModelParams classifier;
  NoiseBank bank;
  GeneratorParams generator;
  PhaseLog log;
};

TrainPhaseResult run_training_phase(const Dataset& train, const ArchSpec& arch, const GeneratorSpec& gen_spec,
                                    const TrainPhaseConfig& config);

// Noise and generator training against a frozen classifier, one "epoch" per
// config epoch with the same step budgets as the training phase. Used by the
// training phase itself and by the post-hoc ablation.
struct PromptTrainer {
  NoiseBank bank;
  GeneratorParams generator;
  AdamState<float> generator_adam;
  std::size_t generator_epochs = 0;
  Supervision supervision;

  PromptTrainer(const ArchSpec& arch, const GeneratorSpec& gen_spec, std::uint64_t seed);
  // Runs noise -> gate -> (selection -> generator) for one epoch.
  void step(const ModelParams& classifier, const Dataset& train, const TrainPhaseConfig& config, std::size_t epoch,
            EpochLog& log, std::vector<StageEvent>& events);

 private:
  std::uint64_t seed_;
};

// CSV text of the phase log (no wall-clock columns, so it is reproducible).
std::string phase_log_csv(const PhaseLog& log);
// Per-epoch stage timings as CSV.
std::string stage_timings_csv(const PhaseLog& log);

}  // namespace geniu
