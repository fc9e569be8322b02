#include "geniu/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "geniu/bundle.hpp"
#include "geniu/random.hpp"

namespace geniu {

using nlohmann::json;

std::string RateSetting::label() const {
  if (vary) return "vary";
  std::ostringstream o;
  o << rate;
  return o.str();
}

RateSetting RateSetting::parse(const std::string& text) {
  if (text == "vary") return {.rate = 0.0, .vary = true};
  std::size_t used = 0;
  double r = 0;
  try {
    r = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !(r > 0.0 && r <= 1.0)) {
    throw std::invalid_argument("rate must be a number in (0, 1] or \"vary\", got '" + text + "'");
  }
  return {.rate = r, .vary = false};
}

std::vector<int> ExperimentConfig::forget() const {
  return unlearn.forget.empty() ? std::vector<int>{majority} : unlearn.forget;
}

std::vector<int> ExperimentConfig::retained() const {
  const auto f = forget();
  std::vector<int> out;
  for (int k = 0; k < static_cast<int>(arch.num_classes); ++k) {
    if (std::find(f.begin(), f.end(), k) == f.end()) out.push_back(k);
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (data.source != "blobs" && data.source != "idx") {
    throw std::invalid_argument("data.source must be \"blobs\" or \"idx\"");
  }
  arch.validate();
  generator.validate();
  train.validate();
  if (data.source == "blobs") {
    if (data.num_classes != arch.num_classes) throw std::invalid_argument("data.num_classes differs from arch.num_classes");
    if (data.dim != element_count(arch.input_shape)) throw std::invalid_argument("data.dim differs from arch input size");
  }
  if (generator.data_shape != arch.input_shape) throw std::invalid_argument("generator.data_shape differs from arch input");
  if (majority < 0 || static_cast<std::size_t>(majority) >= arch.num_classes) {
    throw std::invalid_argument("majority class out of range");
  }
  if (rate.vary && arch.num_classes != vary_rates().size()) {
    throw std::invalid_argument("rate \"vary\" needs " + std::to_string(vary_rates().size()) + " classes");
  }
  if (!rate.vary && !(rate.rate > 0.0 && rate.rate <= 1.0)) throw std::invalid_argument("rate must be in (0, 1]");
  UnlearnRequest req = unlearn;
  req.forget = forget();
  req.validate(arch.num_classes);
}

namespace {

ExperimentConfig blobs_preset() {
  ExperimentConfig c;
  c.preset = "blobs";
  c.arch = {.kind = ArchKind::mlp, .widths = {128}, .input_shape = {1, 8, 8}, .num_classes = 10};
  c.generator = {.data_shape = {1, 8, 8}, .channels = {16, 32}, .latent_dim = 32, .lambda = 2.5e-4,
                 .output = OutputActivation::identity};
  c.train.epochs = 10;
  c.train.classifier = {.kind = OptimizerKind::sgd, .lr = 0.05, .weight_decay = 1e-4, .batch_size = 64};
  c.train.noise_steps = 100;
  c.train.noise_lr = 0.02;
  c.train.generator_steps = 100;
  c.train.generator_lr = 0.005;
  c.train.supervision_per_class = 16;
  c.unlearn.rounds = 100;
  c.unlearn.lr = 5e-3;
  return c;
}

ExperimentConfig idx_preset(const std::string& name) {
  ExperimentConfig c = blobs_preset();
  c.preset = name;
  c.data.source = "idx";
  c.arch = {.kind = ArchKind::smallcnn, .widths = {16, 32, 32}, .input_shape = {1, 28, 28}, .num_classes = 10};
  c.generator = {.data_shape = {1, 28, 28}, .channels = {32, 64}, .latent_dim = 64, .lambda = 2.5e-4,
                 .output = OutputActivation::sigmoid};
  c.train.epochs = 5;
  return c;
}

ExperimentConfig large_preset(const std::string& name) {
  ExperimentConfig c = idx_preset(name);
  c.arch.widths = {96, 192, 192};
  c.generator.latent_dim = 128;
  c.train.epochs = 20;
  c.train.classifier = {.kind = OptimizerKind::sgd, .lr = 0.01, .weight_decay = 1e-4, .batch_size = 256};
  c.train.supervision_per_class = 1;
  c.unlearn.rounds = 100;
  c.unlearn.lr = 4e-4;
  return c;
}

const char* selection_name(SelectionMode m) { return m == SelectionMode::max_entropy ? "max_entropy" : "min_entropy"; }

SelectionMode selection_from(const std::string& s) {
  if (s == "max_entropy") return SelectionMode::max_entropy;
  if (s == "min_entropy") return SelectionMode::min_entropy;
  throw std::invalid_argument("unknown selection mode '" + s + "'");
}

const char* strategy_name(TuningStrategy s) { return s == TuningStrategy::in_batch ? "in_batch" : "impair_repair"; }

TuningStrategy strategy_from(const std::string& s) {
  if (s == "in_batch") return TuningStrategy::in_batch;
  if (s == "impair_repair") return TuningStrategy::impair_repair;
  throw std::invalid_argument("unknown tuning strategy '" + s + "'");
}

std::filesystem::path resolve_idx_dir(const DataConfig& d) {
  if (!d.idx_dir.empty()) return d.idx_dir;
  for (const char* var : {"GENIU_MNIST_DIR", "GENIU_DATA_DIR"}) {
    if (const char* v = std::getenv(var); v && *v) return v;
  }
  throw std::invalid_argument("idx data: set data.idx_dir or GENIU_MNIST_DIR");
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"blobs",           "mnist-idx",         "fashion-idx",        "kuzushiji-idx",
          "large-mnist-idx", "large-fashion-idx", "large-kuzushiji-idx"};
}

ExperimentConfig preset_config(const std::string& name) {
  if (name == "blobs") return blobs_preset();
  if (name == "mnist-idx" || name == "fashion-idx" || name == "kuzushiji-idx") return idx_preset(name);
  if (name == "large-mnist-idx" || name == "large-fashion-idx" || name == "large-kuzushiji-idx") {
    return large_preset(name);
  }
  throw std::invalid_argument("unknown preset '" + name + "'");
}

json config_to_json(const ExperimentConfig& c) {
  const auto& t = c.train;
  json threshold = t.noise_threshold ? json(*t.noise_threshold) : json(nullptr);
  return {
      {"preset", c.preset},
      {"seed", c.seed},
      {"data",
       {{"source", c.data.source},
        {"num_classes", c.data.num_classes},
        {"dim", c.data.dim},
        {"n_per_class", c.data.n_per_class},
        {"separation", c.data.separation},
        {"noise_std", c.data.noise_std},
        {"data_seed_offset", c.data.data_seed_offset},
        {"idx_dir", c.data.idx_dir.string()},
        {"train_images", c.data.train_images},
        {"train_labels", c.data.train_labels},
        {"test_images", c.data.test_images},
        {"test_labels", c.data.test_labels}}},
      {"imbalance", {{"rate", c.rate.vary ? json("vary") : json(c.rate.rate)}, {"majority", c.majority}}},
      {"arch", arch_to_json(c.arch)},
      {"generator", generator_spec_to_json(c.generator)},
      {"train",
       {{"epochs", t.epochs},
        {"optimizer", t.classifier.kind == OptimizerKind::sgd ? "sgd" : "adam"},
        {"lr", t.classifier.lr},
        {"weight_decay", t.classifier.weight_decay},
        {"batch_size", t.classifier.batch_size},
        {"noise_steps", t.noise_steps},
        {"noise_lr", t.noise_lr},
        {"generator_steps", t.generator_steps},
        {"generator_lr", t.generator_lr},
        {"selection", selection_name(t.selection)},
        {"supervision_per_class", t.supervision_per_class},
        {"selection_interval", t.selection_interval},
        {"noise_threshold", threshold}}},
      {"unlearn",
       {{"forget", c.unlearn.forget},
        {"rounds", c.unlearn.rounds},
        {"lr", c.unlearn.lr},
        {"strategy", strategy_name(c.unlearn.strategy)},
        {"epsilon", c.unlearn.epsilon},
        {"proxies_per_class", c.unlearn.proxies_per_class}}},
  };
}

ExperimentConfig config_from_json(const json& patch) {
  if (!patch.is_object()) throw std::invalid_argument("config must be a JSON object");
  const auto name = patch.value("preset", std::string("blobs"));
  json j = config_to_json(preset_config(name));
  j.merge_patch(patch);

  ExperimentConfig c;
  try {
    c.preset = name;
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto& d = j.at("data");
    c.data.source = d.at("source").get<std::string>();
    c.data.num_classes = d.at("num_classes").get<std::size_t>();
    c.data.dim = d.at("dim").get<std::size_t>();
    c.data.n_per_class = d.at("n_per_class").get<std::size_t>();
    c.data.separation = d.at("separation").get<double>();
    c.data.noise_std = d.at("noise_std").get<double>();
    c.data.data_seed_offset = d.at("data_seed_offset").get<std::uint64_t>();
    c.data.idx_dir = d.at("idx_dir").get<std::string>();
    c.data.train_images = d.at("train_images").get<std::string>();
    c.data.train_labels = d.at("train_labels").get<std::string>();
    c.data.test_images = d.at("test_images").get<std::string>();
    c.data.test_labels = d.at("test_labels").get<std::string>();

    const auto& im = j.at("imbalance");
    const auto& r = im.at("rate");
    c.rate = r.is_string() ? RateSetting::parse(r.get<std::string>()) : RateSetting{.rate = r.get<double>()};
    c.majority = im.at("majority").get<int>();

    c.arch = arch_from_json(j.at("arch"));
    c.generator = generator_spec_from_json(j.at("generator"));

    const auto& t = j.at("train");
    c.train.epochs = t.at("epochs").get<std::size_t>();
    const auto opt = t.at("optimizer").get<std::string>();
    if (opt != "sgd" && opt != "adam") throw std::invalid_argument("train.optimizer must be sgd or adam");
    c.train.classifier.kind = opt == "sgd" ? OptimizerKind::sgd : OptimizerKind::adam;
    c.train.classifier.lr = t.at("lr").get<double>();
    c.train.classifier.weight_decay = t.at("weight_decay").get<double>();
    c.train.classifier.batch_size = t.at("batch_size").get<std::size_t>();
    c.train.noise_steps = t.at("noise_steps").get<std::size_t>();
    c.train.noise_lr = t.at("noise_lr").get<double>();
    c.train.generator_steps = t.at("generator_steps").get<std::size_t>();
    c.train.generator_lr = t.at("generator_lr").get<double>();
    c.train.selection = selection_from(t.at("selection").get<std::string>());
    c.train.supervision_per_class = t.at("supervision_per_class").get<std::size_t>();
    c.train.selection_interval = t.at("selection_interval").get<std::size_t>();
    if (t.contains("noise_threshold") && !t.at("noise_threshold").is_null()) c.train.noise_threshold = t.at("noise_threshold").get<double>();

    const auto& u = j.at("unlearn");
    c.unlearn.forget = u.at("forget").get<std::vector<int>>();
    c.unlearn.rounds = u.at("rounds").get<std::size_t>();
    c.unlearn.lr = u.at("lr").get<double>();
    c.unlearn.strategy = strategy_from(u.at("strategy").get<std::string>());
    c.unlearn.epsilon = u.at("epsilon").get<double>();
    c.unlearn.proxies_per_class = u.at("proxies_per_class").get<std::size_t>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  set_seed(c, c.seed);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void set_seed(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.train.seed = seed;
  cfg.unlearn.seed = seed;
}

void set_majority(ExperimentConfig& cfg, int majority) {
  cfg.majority = majority;
  cfg.unlearn.forget.clear();
}

DataSplits load_data(const ExperimentConfig& cfg) {
  const auto& d = cfg.data;
  if (d.source == "blobs") {
    auto b = synth_blobs(d.num_classes, d.dim, d.n_per_class, d.separation, d.noise_std, d.data_seed_offset + cfg.seed);
    return {std::move(b.train), std::move(b.test)};
  }
  const auto dir = resolve_idx_dir(d);
  DataSplits s{load_idx(dir / d.train_images, dir / d.train_labels, Split::train, cfg.arch.num_classes),
               load_idx(dir / d.test_images, dir / d.test_labels, Split::test, cfg.arch.num_classes)};
  if (s.train.sample_shape() != cfg.arch.input_shape) {
    throw std::invalid_argument("idx images do not match the configured input shape");
  }
  return s;
}

ImbalanceSpec imbalance_spec(const ExperimentConfig& cfg) {
  ImbalanceSpec spec;
  spec.majority = {cfg.majority};
  if (cfg.rate.vary) spec.rate = vary_rates();
  else spec.rate = cfg.rate.rate;
  return spec;
}

Dataset imbalanced_train(const ExperimentConfig& cfg, const Dataset& balanced) {
  return build_imbalanced(balanced, imbalance_spec(cfg), derive_seed(cfg.seed, "imbalance"));
}

TrainPhaseConfig phase_config(const ExperimentConfig& cfg) {
  TrainPhaseConfig t = cfg.train;
  t.seed = cfg.seed;
  if (t.noise_threshold) t.threshold_classes = cfg.retained();
  return t;
}

UnlearnRequest unlearn_request(const ExperimentConfig& cfg) {
  UnlearnRequest r = cfg.unlearn;
  r.forget = cfg.forget();
  r.seed = cfg.seed;
  return r;
}

double imbalance_gap(const AccuracyReport& report, int majority) {
  std::vector<int> others;
  for (int k = 0; k < static_cast<int>(report.per_class.size()); ++k) {
    if (k != majority) others.push_back(k);
  }
  return report.per_class[static_cast<std::size_t>(majority)] - mean_class_accuracy(report, others);
}

CellReport run_cell(const ExperimentConfig& cfg, const DataSplits& data) {
  cfg.validate();
  CellReport out;
  out.rate = cfg.rate.label();
  out.majority = cfg.majority;
  out.forget = cfg.forget();
  out.seed = cfg.seed;

  const auto train = imbalanced_train(cfg, data.train);
  TrainPhaseResult phase;
  out.train_ms = time_ms([&] { phase = run_training_phase(train, cfg.arch, cfg.generator, phase_config(cfg)); });
  out.original = evaluate(phase.classifier, data.test, out.forget);
  out.gap = imbalance_gap(out.original, cfg.majority);

  UnlearnResult un;
  out.unlearn_ms = time_ms([&] { un = run_unlearning(phase.classifier, phase.bank, phase.generator, unlearn_request(cfg)); });
  out.unlearned = evaluate(un.model, data.test, out.forget);
  out.trajectory = std::move(un.trajectory);
  return out;
}

CellReport run_cell(const ExperimentConfig& cfg) { return run_cell(cfg, load_data(cfg)); }

std::vector<CellReport> run_sweep(const ExperimentConfig& base, const SweepSpec& spec) {
  if (spec.rates.empty() || spec.majorities.empty() || spec.seeds.empty()) {
    throw std::invalid_argument("sweep: rates, forget classes and seeds must be nonempty");
  }
  std::vector<CellReport> rows;
  for (auto seed : spec.seeds) {
    ExperimentConfig seeded = base;
    set_seed(seeded, seed);
    const auto data = load_data(seeded);
    for (const auto& rate : spec.rates) {
      for (int m : spec.majorities) {
        ExperimentConfig cfg = seeded;
        cfg.rate = rate;
        set_majority(cfg, m);
        try {
          rows.push_back(run_cell(cfg, data));
        } catch (const std::exception& e) {
          throw std::runtime_error("sweep cell (rate " + rate.label() + ", forget " + std::to_string(m) + ", seed " +
                                   std::to_string(seed) + "): " + e.what());
        }
      }
    }
  }
  return rows;
}

namespace {

std::string num(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

}  // namespace

std::string sweep_csv(const std::vector<CellReport>& rows) {
  std::ostringstream o;
  o << "rate,forget,seed,orig_retain,orig_forget,orig_gap,unlearn_retain,unlearn_forget,unlearn_retain_macro\n";
  for (const auto& r : rows) {
    o << r.rate << ',' << r.majority << ',' << r.seed << ',' << num(r.original.retain_micro) << ','
      << num(*r.original.forget) << ',' << num(r.gap) << ',' << num(r.unlearned.retain_micro) << ','
      << num(*r.unlearned.forget) << ',' << num(r.unlearned.retain_macro) << '\n';
  }
  return o.str();
}

json accuracy_json(const AccuracyReport& r) {
  return {{"per_class", r.per_class},
          {"overall", r.overall},
          {"retain_micro", r.retain_micro},
          {"retain_macro", r.retain_macro},
          {"forget", r.forget ? json(*r.forget) : json(nullptr)}};
}

json sweep_json(const std::vector<CellReport>& rows) {
  struct Sum {
    double orig_retain = 0, orig_forget = 0, gap = 0, un_retain = 0, un_forget = 0;
    std::size_t n = 0;
  };
  std::map<std::string, Sum> by_rate;
  std::vector<std::string> order;
  json cells = json::array();
  for (const auto& r : rows) {
    if (!by_rate.count(r.rate)) order.push_back(r.rate);
    auto& s = by_rate[r.rate];
    s.orig_retain += r.original.retain_micro;
    s.orig_forget += *r.original.forget;
    s.gap += r.gap;
    s.un_retain += r.unlearned.retain_micro;
    s.un_forget += *r.unlearned.forget;
    ++s.n;
    cells.push_back({{"rate", r.rate},
                     {"forget", r.forget},
                     {"seed", r.seed},
                     {"original", accuracy_json(r.original)},
                     {"unlearned", accuracy_json(r.unlearned)},
                     {"gap", r.gap}});
  }
  json means = json::array();
  for (const auto& rate : order) {
    const auto& s = by_rate[rate];
    const double n = static_cast<double>(s.n);
    means.push_back({{"rate", rate},
                     {"cells", s.n},
                     {"orig_retain", s.orig_retain / n},
                     {"orig_forget", s.orig_forget / n},
                     {"orig_gap", s.gap / n},
                     {"unlearn_retain", s.un_retain / n},
                     {"unlearn_forget", s.un_forget / n}});
  }
  return {{"means", means}, {"rows", cells}};
}

double perception_kl(const ExperimentConfig& cfg, const ModelParams& model, const Dataset& train, const NoiseBank& bank) {
  std::vector<int> minority;
  for (int k = 0; k < static_cast<int>(cfg.arch.num_classes); ++k) {
    if (k != cfg.majority) minority.push_back(k);
  }
  const auto reference = sample_classes(train, {cfg.majority}, 256, derive_seed(cfg.seed, "reference-sample"));
  return kl_perception(model, reference, bank, minority).mean;
}

std::vector<std::string> ablation_modes() {
  return {"impair_repair", "post", "min_entropy", "threshold", "batches", "rounds"};
}

namespace {

std::string value_label(const std::string& prefix, double v) {
  std::ostringstream o;
  o << prefix << '=' << v;
  return o.str();
}

}  // namespace

std::vector<AblationRow> run_ablation(const ExperimentConfig& base, const std::string& mode,
                                      const std::vector<int>& majorities, const std::vector<std::uint64_t>& seeds,
                                      const std::vector<double>& values) {
  const auto modes = ablation_modes();
  if (std::find(modes.begin(), modes.end(), mode) == modes.end()) {
    throw std::invalid_argument("unknown ablation mode '" + mode + "'");
  }
  std::vector<double> grid = values;
  if (grid.empty()) {
    if (mode == "threshold") grid = {-1.0, 0.6, 0.8};
    if (mode == "batches") grid = {1, 4, 16};
    if (mode == "rounds") grid = {25, 50, 100};
  }

  std::vector<AblationRow> rows;
  for (auto seed : seeds) {
    ExperimentConfig seeded = base;
    set_seed(seeded, seed);
    const auto data = load_data(seeded);
    for (int m : majorities) {
      ExperimentConfig cfg = seeded;
      set_majority(cfg, m);
      cfg.validate();
      const auto train = imbalanced_train(cfg, data.train);
      const auto forget = cfg.forget();

      auto train_phase = [&](const ExperimentConfig& c) {
        return run_training_phase(train, c.arch, c.generator, phase_config(c));
      };
      auto add = [&](const std::string& variant, const ModelParams& original, const ModelParams& unlearned,
                     std::optional<double> kl = std::nullopt) {
        AblationRow row;
        row.variant = variant;
        row.majority = m;
        row.seed = seed;
        row.original_retain = evaluate(original, data.test, forget).retain_micro;
        const auto after = evaluate(unlearned, data.test, forget);
        row.retain = after.retain_micro;
        row.forget = *after.forget;
        row.kl = kl;
        rows.push_back(row);
      };
      auto unlearn = [&](const TrainPhaseResult& p, const UnlearnRequest& req) {
        return run_unlearning(p.classifier, p.bank, p.generator, req).model;
      };

      if (mode == "impair_repair" || mode == "post" || mode == "rounds") {
        const auto phase = train_phase(cfg);
        auto req = unlearn_request(cfg);
        if (mode == "impair_repair") {
          add("in_batch", phase.classifier, unlearn(phase, req));
          req.strategy = TuningStrategy::impair_repair;
          add("impair_repair", phase.classifier, unlearn(phase, req));
        } else if (mode == "post") {
          add("geniu", phase.classifier, unlearn(phase, req), perception_kl(cfg, phase.classifier, train, phase.bank));
          const auto post = post_hoc_proxies(phase.classifier, train, cfg.generator, phase_config(cfg));
          const auto model = run_unlearning(phase.classifier, post.bank, post.generator, req).model;
          add("post_hoc", phase.classifier, model, perception_kl(cfg, phase.classifier, train, post.bank));
        } else {
          for (double v : grid) {
            req.rounds = static_cast<std::size_t>(v);
            add(value_label("rounds", v), phase.classifier, unlearn(phase, req));
          }
        }
        continue;
      }

      for (std::size_t i = 0; i < (mode == "min_entropy" ? 2 : grid.size()); ++i) {
        ExperimentConfig c = cfg;
        std::string variant;
        if (mode == "min_entropy") {
          c.train.selection = i == 0 ? SelectionMode::max_entropy : SelectionMode::min_entropy;
          variant = i == 0 ? "max_entropy" : "min_entropy";
        } else if (mode == "threshold") {
          if (grid[i] >= 0.0) c.train.noise_threshold = grid[i];
          else c.train.noise_threshold.reset();
          variant = grid[i] >= 0.0 ? value_label("t", grid[i]) : "t=none";
        } else {
          c.train.supervision_per_class = static_cast<std::size_t>(grid[i]);
          variant = value_label("B", grid[i]);
        }
        const auto phase = train_phase(c);
        if (!phase.generator.trained) throw std::runtime_error("ablation " + variant + ": generator never trained");
        add(variant, phase.classifier, unlearn(phase, unlearn_request(c)));
      }
    }
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream o;
  o << "variant,majority,seed,original_retain,unlearn_retain,unlearn_forget,kl\n";
  for (const auto& r : rows) {
    o << r.variant << ',' << r.majority << ',' << r.seed << ',' << num(r.original_retain) << ',' << num(r.retain)
      << ',' << num(r.forget) << ',' << (r.kl ? num(*r.kl) : "") << '\n';
  }
  return o.str();
}

GrayImage to_gray(const TensorF& image) {
  const auto& shape = image.shape();
  if (shape.size() != 3 || shape[0] != 1) {
    throw std::invalid_argument("pgm: expected a single-channel [1,H,W] image, got " + shape_string(shape));
  }
  GrayImage g{shape[2], shape[1], std::vector<std::uint8_t>(image.size(), 128)};
  const auto [lo, hi] = std::minmax_element(image.data(), image.data() + image.size());
  if (*hi > *lo) {
    const double scale = 255.0 / (static_cast<double>(*hi) - *lo);
    for (std::size_t i = 0; i < image.size(); ++i) {
      g.pixels[i] = static_cast<std::uint8_t>(std::lround((static_cast<double>(image[i]) - *lo) * scale));
    }
  }
  return g;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("pgm: cannot write " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  std::size_t maxval = 0;
  GrayImage g;
  in >> magic >> g.width >> g.height >> maxval;
  if (!in || magic != "P5" || maxval != 255) throw std::runtime_error("pgm: bad header in " + path.string());
  in.get();
  g.pixels.resize(g.width * g.height);
  in.read(reinterpret_cast<char*>(g.pixels.data()), static_cast<std::streamsize>(g.pixels.size()));
  if (!in) throw std::runtime_error("pgm: truncated " + path.string());
  return g;
}

std::vector<std::filesystem::path> dump_images(const TensorF& batch, const std::vector<int>& labels,
                                               const std::filesystem::path& dir) {
  if (batch.shape().size() != 4 || batch.dim(0) != labels.size()) {
    throw std::invalid_argument("dump_images: expected [K,1,H,W] images with one label each");
  }
  std::filesystem::create_directories(dir);
  const Shape one(batch.shape().begin() + 1, batch.shape().end());
  const std::size_t n = element_count(one);
  std::vector<std::filesystem::path> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const TensorF image(one, std::vector<float>(batch.data() + i * n, batch.data() + (i + 1) * n));
    out.push_back(dir / ("class_" + std::to_string(labels[i]) + ".pgm"));
    write_pgm(out.back(), to_gray(image));
  }
  return out;
}

}  // namespace geniu
