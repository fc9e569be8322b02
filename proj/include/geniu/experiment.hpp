#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "geniu/ablation.hpp"
#include "geniu/evaluation.hpp"
#include "geniu/train.hpp"
#include "geniu/unlearn.hpp"
#include "json.hpp"

namespace geniu {

struct DataConfig {
  std::string source = "blobs";  // "blobs" or "idx"
  // Synthetic blobs.
  std::size_t num_classes = 10;
  std::size_t dim = 64;
  std::size_t n_per_class = 600;
  double separation = 6.0;
  double noise_std = 1.0;
  // Blobs are drawn with seed data_seed_offset + run seed.
  std::uint64_t data_seed_offset = 100;
  // IDX: directory holding the four standard MNIST-family files. Empty means
  // GENIU_MNIST_DIR (or GENIU_DATA_DIR) at load time.
  std::filesystem::path idx_dir;
  std::string train_images = "train-images-idx3-ubyte";
  std::string train_labels = "train-labels-idx1-ubyte";
  std::string test_images = "t10k-images-idx3-ubyte";
  std::string test_labels = "t10k-labels-idx1-ubyte";
};

// Imbalance rate: a single minority keep-rate or the per-class "vary" table.
struct RateSetting {
  double rate = 0.1;
  bool vary = false;

  std::string label() const;
  static RateSetting parse(const std::string& text);
};

struct ExperimentConfig {
  std::string preset = "blobs";
  DataConfig data;
  RateSetting rate;
  // Majority class. The forget set defaults to it.
  int majority = 0;
  ArchSpec arch;
  GeneratorSpec generator;
  TrainPhaseConfig train;
  UnlearnRequest unlearn;
  std::uint64_t seed = 0;

  // Forget set actually used: unlearn.forget, or {majority} when empty.
  std::vector<int> forget() const;
  // Classes outside the forget set.
  std::vector<int> retained() const;
  void validate() const;
};

// Named presets: blobs, mnist-idx, fashion-idx, kuzushiji-idx and the
// full-size variants large-mnist-idx, large-fashion-idx, large-kuzushiji-idx.
ExperimentConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

nlohmann::json config_to_json(const ExperimentConfig& cfg);
// Starts from the preset named in j (default "blobs") and applies the fields present.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

// Applies the seed to every seeded component.
void set_seed(ExperimentConfig& cfg, std::uint64_t seed);
// Sets the majority class and resets the forget set to follow it.
void set_majority(ExperimentConfig& cfg, int majority);

struct DataSplits {
  Dataset train;  // balanced
  Dataset test;
};

DataSplits load_data(const ExperimentConfig& cfg);
ImbalanceSpec imbalance_spec(const ExperimentConfig& cfg);
Dataset imbalanced_train(const ExperimentConfig& cfg, const Dataset& balanced);
// TrainPhaseConfig with the noise threshold measured on the retained classes.
TrainPhaseConfig phase_config(const ExperimentConfig& cfg);
UnlearnRequest unlearn_request(const ExperimentConfig& cfg);

// Majority accuracy minus mean accuracy over the other classes.
double imbalance_gap(const AccuracyReport& report, int majority);

struct CellReport {
  std::string rate;
  int majority = 0;
  std::vector<int> forget;
  std::uint64_t seed = 0;
  AccuracyReport original;
  AccuracyReport unlearned;
  double gap = 0.0;
  double train_ms = 0.0;
  double unlearn_ms = 0.0;
  std::vector<RoundRecord> trajectory;
};

// Full pipeline on data already loaded: imbalance, training phase, unlearning
// and test evaluation.
CellReport run_cell(const ExperimentConfig& cfg, const DataSplits& data);
CellReport run_cell(const ExperimentConfig& cfg);

struct SweepSpec {
  std::vector<RateSetting> rates;
  std::vector<int> majorities;  // each is also the forget class
  std::vector<std::uint64_t> seeds;
};

std::vector<CellReport> run_sweep(const ExperimentConfig& base, const SweepSpec& spec);
std::string sweep_csv(const std::vector<CellReport>& rows);
// Per-rate means over cells (forget choices and seeds), plus the rows.
nlohmann::json sweep_json(const std::vector<CellReport>& rows);

nlohmann::json accuracy_json(const AccuracyReport& r);

// One ablation measurement: a variant of the pipeline on one (majority, seed).
struct AblationRow {
  std::string variant;
  int majority = 0;
  std::uint64_t seed = 0;
  double original_retain = 0.0;
  double retain = 0.0;  // after unlearning
  double forget = 0.0;
  std::optional<double> kl;  // mean KL perception of the variant's prompts
};

// Modes: impair_repair (in_batch vs impair_repair), post (GENIU vs post-hoc
// prompts, with KL perception), min_entropy (max vs min entropy supervision),
// threshold (noise start threshold values, negative = none), batches
// (supervision B values) and rounds (unlearning round counts). `values`
// overrides the default grid of the last three.
std::vector<AblationRow> run_ablation(const ExperimentConfig& base, const std::string& mode,
                                      const std::vector<int>& majorities, const std::vector<std::uint64_t>& seeds,
                                      const std::vector<double>& values = {});
std::vector<std::string> ablation_modes();
std::string ablation_csv(const std::vector<AblationRow>& rows);

// Mean KL perception of the bank's non-majority prompts against the
// classifier's mean response to majority training samples.
double perception_kl(const ExperimentConfig& cfg, const ModelParams& model, const Dataset& train, const NoiseBank& bank);

struct GrayImage {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> pixels;
};

// 8-bit binary PGM, min-max normalised; a constant image maps to 128.
GrayImage to_gray(const TensorF& image);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);
// Writes class_<label>.pgm for each single-channel image of a [K,1,H,W] batch.
std::vector<std::filesystem::path> dump_images(const TensorF& batch, const std::vector<int>& labels,
                                               const std::filesystem::path& dir);

}  // namespace geniu
