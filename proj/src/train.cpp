#include "geniu/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "geniu/random.hpp"

namespace geniu {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

double train_epoch(ModelParams& model, const Dataset& train, const ClassifierOptimizer& opt,
                   std::uint64_t shuffle_seed, AdamState<float>* adam) {
  if (opt.kind == OptimizerKind::adam && adam == nullptr) {
    throw std::invalid_argument("train_epoch: adam optimizer needs a state");
  }
  double total = 0.0;
  std::size_t seen = 0;
  std::size_t batch_no = 0;
  for (const auto& idx : batch_indices(train.size(), opt.batch_size, shuffle_seed)) {
    const Batch b = gather(train, idx);
    const auto images = Var<float>::constant(b.images);
    auto r = value_and_grad<float>(
        [&](const std::vector<Var<float>>& p) {
          return ag::mean(ag::softmax_cross_entropy(forward_graph(model.arch, p, images), b.labels));
        },
        tensors_of(model.params));
    if (!std::isfinite(r.loss)) {
      std::ostringstream msg;
      msg << "classifier training: non-finite loss at batch " << batch_no << " (size " << idx.size()
          << ", lr " << opt.lr << ")";
      throw std::runtime_error(msg.str());
    }
    if (opt.kind == OptimizerKind::adam) {
      adam->config.lr = opt.lr;
      adam->config.weight_decay = opt.weight_decay;
      adam_step<float>(model.params, r.grads, *adam);
    } else {
      sgd_step<float>(model.params, r.grads, opt.lr, opt.weight_decay);
    }
    total += static_cast<double>(r.loss) * static_cast<double>(idx.size());
    seen += idx.size();
    ++batch_no;
  }
  return seen ? total / static_cast<double>(seen) : 0.0;
}

AccuracyReport evaluate(const ModelParams& model, const Dataset& test, const std::vector<int>& forget) {
  if (test.size() == 0) throw std::invalid_argument("evaluate: empty test set");
  const std::size_t k = model.arch.num_classes;
  std::vector<bool> is_forget(k, false);
  for (int c : forget) {
    if (c < 0 || static_cast<std::size_t>(c) >= k) throw std::invalid_argument("evaluate: forget class out of range");
    is_forget[static_cast<std::size_t>(c)] = true;
  }
  if (std::count(is_forget.begin(), is_forget.end(), true) == static_cast<long>(k)) {
    throw std::invalid_argument("evaluate: forget set covers every class, retained accuracy undefined");
  }

  const auto pred = argmax_rows(forward_chunked(model, test.images));
  std::vector<std::size_t> correct(k, 0), count(k, 0);
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto y = static_cast<std::size_t>(test.labels[i]);
    ++count[y];
    if (pred[i] == test.labels[i]) ++correct[y];
  }

  AccuracyReport r;
  r.per_class.resize(k, 0.0);
  r.per_class_count = count;
  std::size_t rc = 0, rn = 0, fc = 0, fn = 0, macro_n = 0;
  double macro = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    if (count[c]) r.per_class[c] = static_cast<double>(correct[c]) / static_cast<double>(count[c]);
    if (is_forget[c]) {
      fc += correct[c];
      fn += count[c];
    } else {
      rc += correct[c];
      rn += count[c];
      if (count[c]) {
        macro += r.per_class[c];
        ++macro_n;
      }
    }
  }
  r.overall = static_cast<double>(rc + fc) / static_cast<double>(test.size());
  r.retain_micro = rn ? static_cast<double>(rc) / static_cast<double>(rn) : 0.0;
  r.retain_macro = macro_n ? macro / static_cast<double>(macro_n) : 0.0;
  if (!forget.empty()) r.forget = fn ? static_cast<double>(fc) / static_cast<double>(fn) : 0.0;
  return r;
}

double mean_class_accuracy(const AccuracyReport& report, const std::vector<int>& classes) {
  if (classes.empty()) throw std::invalid_argument("mean_class_accuracy: no classes");
  double s = 0.0;
  for (int c : classes) s += report.per_class.at(static_cast<std::size_t>(c));
  return s / static_cast<double>(classes.size());
}

Supervision select_supervision(const ModelParams& model, const Dataset& train, SelectionMode mode,
                               std::size_t per_class) {
  if (per_class == 0) throw std::invalid_argument("select_supervision: B must be >= 1");
  const auto entropy = logit_entropy(forward_chunked(model, train.images));
  const std::size_t k = model.arch.num_classes;
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < train.size(); ++i) by_class.at(static_cast<std::size_t>(train.labels[i])).push_back(i);

  Supervision s;
  s.indices.resize(k);
  s.targets.per_class.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    auto& idx = by_class[c];
    if (idx.size() < per_class) {
      throw std::invalid_argument("select_supervision: class " + std::to_string(c) + " has " +
                                  std::to_string(idx.size()) + " samples, fewer than B=" + std::to_string(per_class));
    }
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return mode == SelectionMode::max_entropy ? entropy[a] > entropy[b] : entropy[a] < entropy[b];
    });
    s.indices[c].assign(idx.begin(), idx.begin() + static_cast<long>(per_class));
    for (auto i : s.indices[c]) s.targets.per_class[c].push_back(train.sample(i));
  }
  return s;
}

void TrainPhaseConfig::validate() const {
  if (epochs == 0) throw std::invalid_argument("training phase: epochs must be >= 1");
  if (supervision_per_class == 0) throw std::invalid_argument("training phase: B must be >= 1");
  if (selection_interval == 0) throw std::invalid_argument("training phase: selection interval must be >= 1");
  if (classifier.batch_size == 0) throw std::invalid_argument("training phase: batch size must be >= 1");
  if (noise_threshold && !(*noise_threshold >= 0.0 && *noise_threshold < 1.0)) {
    throw std::invalid_argument("training phase: threshold t must lie in [0,1)");
  }
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::classifier: return "classifier";
    case Stage::noise: return "noise";
    case Stage::gate: return "gate";
    case Stage::selection: return "selection";
    case Stage::generator: return "generator";
  }
  return "?";
}

PromptTrainer::PromptTrainer(const ArchSpec& arch, const GeneratorSpec& gen_spec, std::uint64_t seed)
    : bank(init_noise(arch.input_shape, arch.num_classes, seed)),
      generator(init_generator(gen_spec, seed)),
      seed_(seed) {
  if (gen_spec.data_shape != arch.input_shape) {
    throw ShapeError("generator/classifier data shape", gen_spec.data_shape, arch.input_shape);
  }
}

void PromptTrainer::step(const ModelParams& classifier, const Dataset& train, const TrainPhaseConfig& config,
                         std::size_t epoch, EpochLog& log, std::vector<StageEvent>& events) {
  auto t0 = Clock::now();
  events.push_back({epoch, Stage::noise});
  const auto noise_log = train_noise_bank(bank, classifier, config.noise_steps, config.noise_lr);
  bank.trained_at_epoch = static_cast<int>(epoch);
  log.noise_trained = true;
  log.noise_ce_first = noise_log.ce.empty() ? noise_log.final_ce : noise_log.ce.front();
  log.noise_ce_last = noise_log.final_ce;
  log.timings.noise_ms = ms_since(t0);

  t0 = Clock::now();
  events.push_back({epoch, Stage::gate});
  log.gate = gate_check(bank, classifier);
  log.timings.gate_ms = ms_since(t0);
  if (!log.gate) return;

  if (generator_epochs % config.selection_interval == 0 || supervision.indices.empty()) {
    t0 = Clock::now();
    events.push_back({epoch, Stage::selection});
    supervision = select_supervision(classifier, train, config.selection, config.supervision_per_class);
    log.selected = true;
    log.timings.selection_ms = ms_since(t0);
  }

  t0 = Clock::now();
  events.push_back({epoch, Stage::generator});
  const auto gl = train_generator(generator, bank, supervision.targets, config.generator_steps, config.generator_lr,
                                  derive_seed(seed_, "generator-epoch", epoch), &generator_adam);
  if (!gl.steps.empty()) {
    log.gen_loss = gl.steps.back().gen;
    log.gen_rec_first = gl.steps.front().rec;
    log.gen_rec = gl.steps.back().rec;
    log.gen_dis = gl.steps.back().dis;
  }
  log.generator_trained = true;
  ++generator_epochs;
  log.timings.generator_ms = ms_since(t0);
}

TrainPhaseResult run_training_phase(const Dataset& train, const ArchSpec& arch, const GeneratorSpec& gen_spec,
                                    const TrainPhaseConfig& config) {
  config.validate();
  train.validate();
  if (train.num_classes != arch.num_classes) throw std::invalid_argument("training phase: class count mismatch");

  TrainPhaseResult out{init_model(arch, config.seed), {}, {}, {}};
  PromptTrainer prompts(arch, gen_spec, config.seed);
  AdamState<float> classifier_adam;
  bool started = !config.noise_threshold.has_value();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    auto t0 = Clock::now();
    out.log.events.push_back({epoch, Stage::classifier});
    log.classifier_loss = train_epoch(out.classifier, train, config.classifier,
                                      derive_seed(config.seed, "classifier-shuffle", epoch), &classifier_adam);
    log.timings.classifier_ms = ms_since(t0);

    if (config.train_prompts) {
      // Once the threshold is reached prompts train every later epoch.
      if (!started) {
        const auto acc = evaluate(out.classifier, train, {});
        log.threshold_accuracy = config.threshold_classes.empty()
                                     ? acc.overall
                                     : mean_class_accuracy(acc, config.threshold_classes);
        started = *log.threshold_accuracy >= *config.noise_threshold;
      }
      if (started) prompts.step(out.classifier, train, config, epoch, log, out.log.events);
    }
    out.log.epochs.push_back(std::move(log));
  }

  out.bank = std::move(prompts.bank);
  out.generator = std::move(prompts.generator);
  if (config.train_prompts && !out.generator.trained) {
    out.log.warnings.push_back("gate never passed: generator is untrained");
  }
  return out;
}

namespace {

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(9);
  o << v;
  return o.str();
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::string phase_log_csv(const PhaseLog& log) {
  std::ostringstream o;
  o << "epoch,classifier_loss,threshold_accuracy,noise_trained,noise_ce_mean,gate,selected,generator_trained,"
       "gen_loss,gen_rec,gen_dis\n";
  for (const auto& e : log.epochs) {
    o << e.epoch << ',' << fmt(e.classifier_loss) << ',' << (e.threshold_accuracy ? fmt(*e.threshold_accuracy) : "")
      << ',' << e.noise_trained << ',' << (e.noise_trained ? fmt(mean_of(e.noise_ce_last)) : "") << ',' << e.gate
      << ',' << e.selected << ',' << e.generator_trained << ',' << fmt(e.gen_loss) << ',' << fmt(e.gen_rec) << ','
      << fmt(e.gen_dis) << '\n';
  }
  return o.str();
}

std::string stage_timings_csv(const PhaseLog& log) {
  std::ostringstream o;
  o << "epoch,classifier_ms,noise_ms,gate_ms,selection_ms,generator_ms\n";
  for (const auto& e : log.epochs) {
    const auto& t = e.timings;
    o << e.epoch << ',' << fmt(t.classifier_ms) << ',' << fmt(t.noise_ms) << ',' << fmt(t.gate_ms) << ','
      << fmt(t.selection_ms) << ',' << fmt(t.generator_ms) << '\n';
  }
  return o.str();
}

}  // namespace geniu
