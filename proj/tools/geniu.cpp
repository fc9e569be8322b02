// geniu: train, unlearn, evaluate and run experiment grids from the command line.
//
// Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.

#include <cstdlib>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "geniu/bundle.hpp"
#include "geniu/experiment.hpp"
#include "geniu/random.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace geniu;

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

void write_json(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

// --seed beats GENIU_SEED, which beats the config file.
void apply_seed(ExperimentConfig& cfg, const std::optional<std::uint64_t>& flag) {
  if (flag) {
    set_seed(cfg, *flag);
    return;
  }
  if (const char* env = std::getenv("GENIU_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
      set_seed(cfg, v);
    } catch (const std::exception&) {
      throw UsageError(std::string("GENIU_SEED is not an unsigned integer: ") + env);
    }
  }
}

ExperimentConfig config_for(const std::string& path, const std::optional<std::uint64_t>& seed) {
  auto cfg = load_config(path);
  apply_seed(cfg, seed);
  return cfg;
}

ExperimentConfig artifact_config(const fs::path& dir) {
  const auto path = dir / "config.json";
  if (!fs::exists(path)) throw UsageError("no config.json in " + dir.string());
  return config_from_json(read_json_file(path));
}

void prepare_out(const fs::path& out) { fs::create_directories(out); }

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> majority;
  std::optional<std::string> rate;
};

int cmd_train(const TrainArgs& a) {
  auto cfg = config_for(a.config, a.seed);
  if (a.majority) set_majority(cfg, *a.majority);
  if (a.rate) cfg.rate = RateSetting::parse(*a.rate);
  cfg.validate();
  const fs::path out(a.out);
  prepare_out(out);
  write_json(out / "config.json", config_to_json(cfg));

  const auto data = load_data(cfg);
  const auto train = imbalanced_train(cfg, data.train);
  TrainPhaseResult phase;
  const double ms = time_ms([&] { phase = run_training_phase(train, cfg.arch, cfg.generator, phase_config(cfg)); });

  save_model(out / "model", phase.classifier, {{"seed", cfg.seed}});
  save_noise_bank(out / "noise", phase.bank);
  save_generator(out / "generator", phase.generator);
  write_text_file(out / "phase_log.csv", phase_log_csv(phase.log));
  write_text_file(out / "timings.csv", stage_timings_csv(phase.log));
  write_json(out / "timing.json", {{"train_ms", ms}});
  write_json(out / "train_info.json", {{"train_samples", train.size()},
                                       {"class_counts", train.class_counts()},
                                       {"dataset_bytes", train.raw_bytes()},
                                       {"generator_trained", phase.generator.trained},
                                       {"warnings", phase.log.warnings}});
  for (const auto& w : phase.log.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "trained " << cfg.preset << " (seed " << cfg.seed << ") in " << ms << " ms -> " << out << '\n';
  return 0;
}

// ---- unlearn ---------------------------------------------------------------

struct UnlearnArgs {
  std::string model;
  std::string out;
  std::vector<int> forget;
  std::optional<std::size_t> rounds;
  std::optional<double> lr;
  std::optional<std::string> strategy;
  std::optional<std::uint64_t> seed;
};

int cmd_unlearn(const UnlearnArgs& a) {
  const fs::path dir(a.model);
  auto cfg = artifact_config(dir);
  apply_seed(cfg, a.seed);
  auto req = unlearn_request(cfg);
  if (!a.forget.empty()) req.forget = a.forget;
  if (a.rounds) req.rounds = *a.rounds;
  if (a.lr) req.lr = *a.lr;
  if (a.strategy) {
    if (*a.strategy == "in_batch") req.strategy = TuningStrategy::in_batch;
    else if (*a.strategy == "impair_repair") req.strategy = TuningStrategy::impair_repair;
    else throw UsageError("unknown strategy '" + *a.strategy + "' (in_batch | impair_repair)");
  }
  req.validate(cfg.arch.num_classes);

  // Only the three training-phase artifacts are read here.
  const auto model = load_model(dir / "model");
  const auto bank = load_noise_bank(dir / "noise");
  const auto gen = load_generator(dir / "generator");

  UnlearnResult result;
  const double ms = time_ms([&] { result = run_unlearning(model, bank, gen, req); });

  const fs::path out(a.out);
  prepare_out(out);
  ExperimentConfig echo = cfg;
  echo.unlearn = req;
  write_json(out / "config.json", config_to_json(echo));
  save_model(out / "model", result.model, {{"forget", req.forget}});
  write_text_file(out / "trajectory.csv", trajectory_csv(result.trajectory));
  write_json(out / "timing.json", {{"unlearn_ms", ms}});
  std::cout << "unlearned classes " << json(req.forget).dump() << " in " << req.rounds << " rounds (" << ms
            << " ms) -> " << out << '\n';
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::optional<std::string> unlearned;
  std::string out;
};

int cmd_eval(const EvalArgs& a) {
  const fs::path dir(a.model);
  auto cfg = artifact_config(dir);
  std::vector<int> forget = cfg.forget();
  std::optional<fs::path> un_dir;
  if (a.unlearned) {
    un_dir = fs::path(*a.unlearned);
    forget = artifact_config(*un_dir).forget();
  }

  const auto data = load_data(cfg);
  const auto train = imbalanced_train(cfg, data.train);
  const auto model = load_model(dir / "model");
  const auto bank = load_noise_bank(dir / "noise");

  json report{{"config", config_to_json(cfg)}, {"seed", cfg.seed}, {"forget", forget}};
  report["original"] = accuracy_json(evaluate(model, data.test, forget));
  report["original_gap"] = imbalance_gap(evaluate(model, data.test, {}), cfg.majority);

  std::vector<int> minority;
  for (int k = 0; k < static_cast<int>(cfg.arch.num_classes); ++k) {
    if (k != cfg.majority) minority.push_back(k);
  }
  const auto reference = sample_classes(train, {cfg.majority}, 256, derive_seed(cfg.seed, "reference-sample"));
  const auto kl = kl_perception(model, reference, bank, minority);
  report["kl_perception"] = {{"classes", minority}, {"per_noise", kl.per_noise}, {"total", kl.total}, {"mean", kl.mean}};

  const auto storage = storage_report(dir / "noise", dir / "generator", dir / "model", train.raw_bytes());
  report["storage"] = {{"noise_bytes", storage.noise_bytes},
                       {"generator_bytes", storage.generator_bytes},
                       {"model_bytes", storage.model_bytes},
                       {"dataset_bytes", storage.dataset_bytes},
                       {"ratio", storage.ratio}};

  json timing = json::object();
  if (un_dir) {
    report["unlearned"] = accuracy_json(evaluate(load_model(*un_dir / "model"), data.test, forget));
    report["trajectory_csv"] = (*un_dir / "trajectory.csv").string();
    if (fs::exists(*un_dir / "timing.json")) timing = read_json_file(*un_dir / "timing.json");
  }

  const fs::path out(a.out);
  prepare_out(out);
  write_json(out / "report.json", report);
  write_json(out / "report_timing.json", timing);
  std::cout << report["original"].dump() << '\n';
  if (un_dir) std::cout << report["unlearned"].dump() << '\n';
  return 0;
}

// ---- sweep / ablate ----------------------------------------------------------

std::vector<int> all_classes(const ExperimentConfig& cfg) {
  std::vector<int> out;
  for (int k = 0; k < static_cast<int>(cfg.arch.num_classes); ++k) out.push_back(k);
  return out;
}

struct GridArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> rates;
  std::vector<int> forget;
  std::vector<std::uint64_t> seeds;
  std::string mode;
  std::vector<double> values;
};

std::vector<std::uint64_t> grid_seeds(const GridArgs& a, const ExperimentConfig& cfg) {
  return a.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : a.seeds;
}

int cmd_sweep(const GridArgs& a) {
  auto cfg = config_for(a.config, a.seed);
  SweepSpec spec;
  for (const auto& r : a.rates.empty() ? std::vector<std::string>{"0.1", "0.2", "0.4", "vary"} : a.rates) {
    spec.rates.push_back(RateSetting::parse(r));
  }
  spec.majorities = a.forget.empty() ? all_classes(cfg) : a.forget;
  spec.seeds = grid_seeds(a, cfg);
  for (const auto& r : spec.rates) {
    ExperimentConfig probe = cfg;
    probe.rate = r;
    for (int m : spec.majorities) {
      set_majority(probe, m);
      probe.validate();
    }
  }
  const fs::path out(a.out);
  prepare_out(out);
  write_json(out / "config.json", config_to_json(cfg));
  const auto rows = run_sweep(cfg, spec);
  write_text_file(out / "sweep.csv", sweep_csv(rows));
  write_json(out / "sweep.json", sweep_json(rows));
  std::cout << rows.size() << " cells -> " << out << '\n';
  return 0;
}

int cmd_ablate(const GridArgs& a) {
  auto cfg = config_for(a.config, a.seed);
  const auto modes = ablation_modes();
  if (std::find(modes.begin(), modes.end(), a.mode) == modes.end()) {
    throw UsageError("unknown ablation mode '" + a.mode + "'");
  }
  const auto majorities = a.forget.empty() ? std::vector<int>{cfg.majority} : a.forget;
  for (int m : majorities) {
    ExperimentConfig probe = cfg;
    set_majority(probe, m);
    probe.validate();
  }
  const fs::path out(a.out);
  prepare_out(out);
  write_json(out / "config.json", config_to_json(cfg));
  const auto rows = run_ablation(cfg, a.mode, majorities, grid_seeds(a, cfg), a.values);
  write_text_file(out / ("ablation_" + a.mode + ".csv"), ablation_csv(rows));
  std::cout << ablation_csv(rows);
  return 0;
}

// ---- dump-images -------------------------------------------------------------

struct DumpArgs {
  std::string model;
  std::string out;
  std::string what = "proxies";
};

int cmd_dump(const DumpArgs& a) {
  const fs::path dir(a.model);
  const auto bank = load_noise_bank(dir / "noise");
  std::vector<fs::path> files;
  if (a.what == "noise") {
    files = dump_images(bank.stacked(), bank.labels, a.out);
  } else if (a.what == "proxies") {
    const auto proxies = generate_proxies(bank, load_generator(dir / "generator"));
    files = dump_images(proxies.images, proxies.labels, a.out);
  } else {
    throw UsageError("--what must be noise or proxies");
  }
  std::cout << files.size() << " images -> " << a.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Class unlearning with noise prompts and a proxy generator"};
  app.require_subcommand(1);

  auto seed_opt = [](CLI::App* cmd, std::optional<std::uint64_t>& seed) {
    cmd->add_option("--seed", seed, "Seed (overrides GENIU_SEED and the config)");
  };

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Training phase: classifier, noise prompts, generator");
  t->add_option("--config", train.config, "Config JSON")->required()->check(CLI::ExistingFile);
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--majority", train.majority, "Majority class (also the default forget class)");
  t->add_option("--rate", train.rate, "Imbalance rate or \"vary\"");
  seed_opt(t, train.seed);

  UnlearnArgs un;
  auto* u = app.add_subcommand("unlearn", "Data-free unlearning from training artifacts");
  u->add_option("--model", un.model, "Training artifact directory")->required()->check(CLI::ExistingDirectory);
  u->add_option("--out", un.out, "Output directory")->required();
  u->add_option("--forget", un.forget, "Comma-separated forget classes")->delimiter(',');
  u->add_option("--rounds", un.rounds, "Tuning rounds");
  u->add_option("--lr", un.lr, "Tuning learning rate");
  u->add_option("--strategy", un.strategy, "in_batch | impair_repair");
  seed_opt(u, un.seed);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Accuracy, KL perception and storage report");
  e->add_option("--model", ev.model, "Training artifact directory")->required()->check(CLI::ExistingDirectory);
  e->add_option("--unlearned", ev.unlearned, "Unlearning output directory")->check(CLI::ExistingDirectory);
  e->add_option("--out", ev.out, "Output directory")->required();

  GridArgs sw;
  auto* s = app.add_subcommand("sweep", "Imbalance-rate x forget-class x seed grid");
  s->add_option("--config", sw.config, "Config JSON")->required()->check(CLI::ExistingFile);
  s->add_option("--out", sw.out, "Output directory")->required();
  s->add_option("--rates", sw.rates, "Rates, e.g. 0.1,0.2,0.4,vary")->delimiter(',');
  s->add_option("--forget", sw.forget, "Forget (= majority) classes; default all")->delimiter(',');
  s->add_option("--seeds", sw.seeds, "Seeds; default the config seed")->delimiter(',');
  seed_opt(s, sw.seed);

  GridArgs ab;
  auto* b = app.add_subcommand("ablate", "Ablation comparisons");
  b->add_option("--config", ab.config, "Config JSON")->required()->check(CLI::ExistingFile);
  b->add_option("--out", ab.out, "Output directory")->required();
  b->add_option("--mode", ab.mode, "impair_repair | post | min_entropy | threshold | batches | rounds")->required();
  b->add_option("--forget", ab.forget, "Forget (= majority) classes; default the config's")->delimiter(',');
  b->add_option("--seeds", ab.seeds, "Seeds; default the config seed")->delimiter(',');
  b->add_option("--values", ab.values, "Grid for threshold/batches/rounds")->delimiter(',');
  seed_opt(b, ab.seed);

  DumpArgs dump;
  auto* d = app.add_subcommand("dump-images", "Write noise prompts or proxies as PGM images");
  d->add_option("--model", dump.model, "Training artifact directory")->required()->check(CLI::ExistingDirectory);
  d->add_option("--out", dump.out, "Output directory")->required();
  d->add_option("--what", dump.what, "noise | proxies")->capture_default_str();

  std::string show_preset;
  auto* sc = app.add_subcommand("show-config", "Print the resolved JSON of a named preset");
  sc->add_option("preset", show_preset, "Preset name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    std::cerr << app.help();
    return 2;
  }

  try {
    if (*t) return cmd_train(train);
    if (*u) return cmd_unlearn(un);
    if (*e) return cmd_eval(ev);
    if (*s) return cmd_sweep(sw);
    if (*b) return cmd_ablate(ab);
    if (*d) return cmd_dump(dump);
    if (*sc) {
      std::cout << config_to_json(preset_config(show_preset)).dump(2) << '\n';
      return 0;
    }
  } catch (const UsageError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "configuration error: " << ex.what() << '\n';
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 2;
}
