#include <algorithm>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "geniu/bundle.hpp"
#include "geniu/experiment.hpp"
#include "oracles/loss_oracles.hpp"

using namespace geniu;
namespace oracle = geniu::testing;
namespace fs = std::filesystem;

namespace {

ModelParams tiny_model() {
  return init_model({.kind = ArchKind::mlp, .widths = {16}, .input_shape = {1, 2, 2}, .num_classes = 3}, 5);
}

ExperimentConfig tiny_config() {
  auto cfg = preset_config("blobs");
  cfg.data.n_per_class = 100;
  cfg.train.epochs = 3;
  cfg.train.supervision_per_class = 4;
  return cfg;
}

}  // namespace

TEST_CASE("kl divergence: identity, hand value, oracle, smoothing") {
  CHECK(kl_divergence({0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}) == doctest::Approx(0.0).epsilon(1e-12));
  const double want = 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1);
  CHECK(kl_divergence({0.5, 0.5}, {0.9, 0.1}) == doctest::Approx(want).epsilon(1e-9));
  CHECK(want == doctest::Approx(0.5108).epsilon(1e-4));

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> p(6), q(6);
    for (auto& x : p) x = u(rng);
    for (auto& x : q) x = u(rng);
    auto norm = [](std::vector<double>& v) {
      double s = 0;
      for (double x : v) s += x;
      for (auto& x : v) x /= s;
    };
    norm(p);
    norm(q);
    const double kl = kl_divergence(p, q);
    CHECK(kl >= 0.0);
    CHECK(std::abs(kl - oracle::kl(p, q)) < 1e-9);
  }
  // Zero entries stay finite thanks to smoothing.
  CHECK(std::isfinite(kl_divergence({1.0, 0.0}, {0.0, 1.0})));
  CHECK_THROWS_AS(kl_divergence({1.0}, {0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("kl perception: zero when the prompt is the reference") {
  const auto model = tiny_model();
  auto bank = init_noise({1, 2, 2}, 3, 1);
  const TensorF reference({1, 1, 2, 2}, std::vector<float>(bank.noises[1].values().begin(), bank.noises[1].values().end()));
  const auto r = kl_perception(model, reference, bank, {1, 2});
  REQUIRE(r.per_noise.size() == 2);
  CHECK(r.per_noise[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(r.per_noise[1] > 0.0);
  CHECK(r.total == doctest::Approx(r.per_noise[0] + r.per_noise[1]));
  CHECK(r.mean == doctest::Approx(r.total / 2));
  CHECK_THROWS_AS(kl_perception(model, TensorF({0, 1, 2, 2}), bank, {1}), std::invalid_argument);
  CHECK_THROWS_AS(kl_perception(model, reference, bank, {}), std::invalid_argument);
}

TEST_CASE("reference sampling is seeded and class-restricted") {
  const auto blobs = synth_blobs(4, 4, 50, 6.0, 1.0, 1);
  const auto a = sample_classes(blobs.train, {2}, 10, 7);
  CHECK(a.shape() == Shape{10, 1, 2, 2});
  CHECK(sample_classes(blobs.train, {2}, 10, 7) == a);
  CHECK_FALSE(sample_classes(blobs.train, {2}, 10, 8) == a);
  CHECK(sample_classes(blobs.train, {2}, 1000, 7).dim(0) == 50);
}

TEST_CASE("storage report") {
  const auto dir = fs::temp_directory_path() / "geniu_test_storage";
  fs::remove_all(dir);
  const auto model = tiny_model();
  save_model(dir / "model", model);
  save_noise_bank(dir / "noise", init_noise({1, 2, 2}, 3, 1));
  save_generator(dir / "gen", init_generator({.data_shape = {1, 2, 2}, .channels = {2}, .latent_dim = 2}, 1));
  const auto r = storage_report(dir / "noise", dir / "gen", dir / "model", 1'000'000);
  CHECK(r.noise_bytes == directory_bytes(dir / "noise"));
  CHECK(r.noise_bytes > 3 * 4 * sizeof(float));
  CHECK(r.ratio == doctest::Approx(static_cast<double>(r.noise_bytes + r.generator_bytes) / 1e6));
  CHECK_THROWS(storage_report(dir / "absent", dir / "gen", dir / "model", 10));
  CHECK_THROWS(save_noise_bank(dir / "empty", NoiseBank{}));
}

TEST_CASE("timing: no-op unlearning is fast and cost scales with rounds") {
  auto cfg = tiny_config();
  const auto data = load_data(cfg);
  const auto phase =
      run_training_phase(imbalanced_train(cfg, data.train), cfg.arch, cfg.generator, phase_config(cfg));
  REQUIRE(phase.generator.trained);
  auto req = unlearn_request(cfg);
  auto median_ms = [&](std::size_t rounds) {
    req.rounds = rounds;
    std::vector<double> t;
    for (int i = 0; i < 5; ++i) {
      t.push_back(time_ms([&] { run_unlearning(phase.classifier, phase.bank, phase.generator, req); }));
    }
    std::sort(t.begin(), t.end());
    return t[2];
  };
  CHECK(median_ms(0) < 5.0);
  const double one = median_ms(200), two = median_ms(400);
  CHECK(two / one > 1.5);
  CHECK(two / one < 2.5);
}

TEST_CASE("config JSON round trip for every preset") {
  for (const auto& name : preset_names()) {
    const auto cfg = preset_config(name);
    const auto j = config_to_json(cfg);
    CHECK(config_to_json(config_from_json(j)) == j);
    CHECK(config_to_json(config_from_json({{"preset", name}})) == j);
  }
  auto vary = config_from_json({{"imbalance", {{"rate", "vary"}, {"majority", 4}}}, {"seed", 3}});
  CHECK(vary.rate.vary);
  CHECK(vary.forget() == std::vector<int>{4});
  CHECK(vary.train.seed == 3);
  CHECK(RateSetting::parse("0.25").rate == 0.25);
  CHECK_THROWS_AS(RateSetting::parse("1.5"), std::invalid_argument);
  CHECK_THROWS_AS(RateSetting::parse("abc"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json({{"preset", "nope"}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json({{"train", {{"optimizer", "rmsprop"}}}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json({{"arch", {{"widths", {256}}, {"input_shape", {1, 4, 4}}}}}), std::invalid_argument);
}

TEST_CASE("threshold uses retained-class accuracy") {
  auto cfg = tiny_config();
  cfg.train.noise_threshold = 0.5;
  set_majority(cfg, 6);
  const auto t = phase_config(cfg);
  CHECK(t.threshold_classes == std::vector<int>{0, 1, 2, 3, 4, 5, 7, 8, 9});
}

TEST_CASE("ablation rows per mode") {
  auto cfg = tiny_config();
  cfg.unlearn.rounds = 10;
  const auto rounds = run_ablation(cfg, "rounds", {0, 1}, {0}, {0, 10});
  REQUIRE(rounds.size() == 4);
  CHECK(rounds[0].variant == "rounds=0");
  CHECK(rounds[0].retain == rounds[0].original_retain);
  const auto ir = run_ablation(cfg, "impair_repair", {2}, {0});
  REQUIRE(ir.size() == 2);
  CHECK(ir[1].variant == "impair_repair");
  const auto post = run_ablation(cfg, "post", {2}, {0});
  REQUIRE(post.size() == 2);
  CHECK(post[0].kl.has_value());
  CHECK(post[1].kl.has_value());
  const auto csv = ablation_csv(post);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK_THROWS_AS(run_ablation(cfg, "nope", {0}, {0}), std::invalid_argument);
}
