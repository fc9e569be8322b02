#include <filesystem>
#include <random>

#include "doctest.h"
#include "geniu/generator.hpp"
#include "oracles/gradcheck.hpp"
#include "oracles/loss_oracles.hpp"

using namespace geniu;
namespace oracle = geniu::testing;

namespace {

std::vector<std::vector<double>> rows(const TensorD& t) {
  std::vector<std::vector<double>> out(t.dim(0));
  const std::size_t w = t.size() / t.dim(0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].assign(t.data() + i * w, t.data() + (i + 1) * w);
  return out;
}

std::vector<double> flat(const TensorD& t) { return {t.values().begin(), t.values().end()}; }

GeneratorSpec small_spec() { return {.data_shape = {1, 8, 8}, .channels = {4, 8}, .latent_dim = 6}; }

}  // namespace

TEST_CASE("generator losses on hand-checked inputs") {
  const TensorD x({1, 4}, 0.7);
  auto zero = loss_gen_values<double>(x, x, TensorD({1, 3}, 0.0), TensorD({1, 3}, 0.0), 2.5e-4);
  CHECK(zero.gen == 0.0);
  CHECK(zero.rec == 0.0);
  CHECK(zero.dis == 0.0);
  // mu = 1, sigma^2 = 1, K = l = 1.
  auto one = loss_gen_values<double>(x, x, TensorD({1, 1}, 1.0), TensorD({1, 1}, 0.0), 2.5e-4);
  CHECK(one.dis == doctest::Approx(-0.5));
  CHECK(one.gen == doctest::Approx(2.5e-4 * 0.5));
  CHECK_THROWS_AS(loss_gen_values<double>(x, x, TensorD({1, 1}), TensorD({1, 1}), -1.0), std::invalid_argument);
}

TEST_CASE("generator losses match scalar loops") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> d(1, 6);
    const std::size_t k = d(rng), l = d(rng), m = d(rng);
    const TensorD recon = oracle::random_tensor({k, m}, rng, -2, 2), target = oracle::random_tensor({k, m}, rng, -2, 2);
    const TensorD mu = oracle::random_tensor({k, l}, rng, -2, 2), logvar = oracle::random_tensor({k, l}, rng, -3, 2);
    const double lambda = std::uniform_real_distribution<double>(0, 2)(rng);
    const auto v = loss_gen_values<double>(recon, target, mu, logvar, lambda);
    const double rec = oracle::rec_loss(flat(recon), flat(target));
    const double dis = oracle::dis_loss(rows(mu), rows(logvar));
    CHECK(std::abs(v.rec - rec) < 1e-10);
    CHECK(std::abs(v.dis - dis) < 1e-10);
    CHECK(std::abs(v.gen - oracle::gen_loss(rec, dis, lambda)) < 1e-10);
    // The distribution term is the negated Gaussian KL to the prior.
    CHECK(v.dis <= 0.0);
    CHECK(std::abs(-v.dis - oracle::gaussian_kl(rows(mu), rows(logvar))) < 1e-10);
  }
}

TEST_CASE("distribution term is zero only at the prior") {
  CHECK(loss_gen_values<double>(TensorD({1}), TensorD({1}), TensorD({2, 3}, 0.0), TensorD({2, 3}, 0.0), 1).dis == 0.0);
  CHECK(loss_gen_values<double>(TensorD({1}), TensorD({1}), TensorD({2, 3}, 1e-3), TensorD({2, 3}, 0.0), 1).dis < 0.0);
  CHECK(loss_gen_values<double>(TensorD({1}), TensorD({1}), TensorD({2, 3}, 0.0), TensorD({2, 3}, 1e-3), 1).dis < 0.0);
}

TEST_CASE("lambda 0 gives pure reconstruction") {
  std::mt19937_64 rng(1);
  const auto a = oracle::random_tensor({2, 5}, rng), b = oracle::random_tensor({2, 5}, rng);
  const auto v = loss_gen_values<double>(a, b, oracle::random_tensor({2, 3}, rng), oracle::random_tensor({2, 3}, rng), 0.0);
  CHECK(v.gen == v.rec);
}

TEST_CASE("generator loss gradients match finite differences") {
  std::mt19937_64 rng(4);
  const TensorD target = oracle::random_tensor({3, 4}, rng);
  oracle::Fn fn = [&](const std::vector<Var<double>>& p) {
    return loss_gen<double>(p[0], Var<double>::constant(target), p[1], p[2], 0.3).gen;
  };
  std::vector<TensorD> in{oracle::random_tensor({3, 4}, rng), oracle::random_tensor({3, 2}, rng),
                          oracle::random_tensor({3, 2}, rng)};
  CHECK(oracle::max_relative_error(fn, in) < 1e-4);
}

TEST_CASE("vae forward: shapes, mean path determinism, sigma to zero") {
  for (auto shape : {Shape{1, 8, 8}, Shape{1, 28, 28}, Shape{3, 5, 7}}) {
    GeneratorSpec spec = small_spec();
    spec.data_shape = shape;
    const auto gen = init_generator(spec, 2);
    Shape batch{3};
    batch.insert(batch.end(), shape.begin(), shape.end());
    const TensorF z(batch, 0.4f);
    const auto a = vae_forward(gen, z, false, 1);
    CHECK(a.recon.shape() == batch);
    CHECK(a.mu.shape() == Shape{3, 6});
    CHECK(vae_forward(gen, z, false, 99).recon == a.recon);
    CHECK_FALSE(vae_forward(gen, z, true, 1).recon == a.recon);
  }
  // Drive log-variance far negative: the sampled path collapses to the mean.
  auto gen = init_generator(small_spec(), 3);
  for (auto& p : gen.params) {
    if (p.name == "logvar.weight") p.value.fill(0.0f);
    if (p.name == "logvar.bias") p.value.fill(-60.0f);
  }
  const TensorF z({2, 1, 8, 8}, 0.2f);
  const auto mean = vae_forward(gen, z, false, 0).recon;
  const auto sampled = vae_forward(gen, z, true, 5).recon;
  for (std::size_t i = 0; i < mean.size(); ++i) CHECK(sampled[i] == doctest::Approx(mean[i]).epsilon(1e-6));
}

TEST_CASE("sigmoid output stays in the unit interval") {
  GeneratorSpec spec = small_spec();
  spec.output = OutputActivation::sigmoid;
  const auto out = vae_forward(init_generator(spec, 1), TensorF({2, 1, 8, 8}, 3.0f), true, 1).recon;
  for (float v : out.values()) CHECK((v >= 0.0f && v <= 1.0f));
}

TEST_CASE("train_generator: zero steps, errors, reconstruction progress") {
  auto gen = init_generator(small_spec(), 4);
  const auto bank = init_noise({1, 8, 8}, 3, 1);
  std::mt19937_64 rng(8);
  SupervisionTargets targets;
  for (int k = 0; k < 3; ++k) targets.per_class.push_back({oracle::random_tensor({1, 8, 8}, rng).cast<float>()});
  const auto before = fingerprint(gen.params);
  train_generator(gen, bank, targets, 0, 0.005, 0);
  CHECK(fingerprint(gen.params) == before);
  CHECK_FALSE(gen.trained);

  SupervisionTargets missing = targets;
  missing.per_class.pop_back();
  CHECK_THROWS_AS(train_generator(gen, bank, missing, 1, 0.005, 0), std::invalid_argument);
  missing = targets;
  missing.per_class[1].clear();
  CHECK_THROWS_AS(train_generator(gen, bank, missing, 1, 0.005, 0), std::invalid_argument);

  const auto bank_copy = bank;
  const auto log = train_generator(gen, bank, targets, 300, 0.005, 0);
  CHECK(gen.trained);
  CHECK(log.steps.back().rec < 0.5 * log.steps.front().rec);
  for (std::size_t k = 0; k < 3; ++k) CHECK(bank.noises[k] == bank_copy.noises[k]);
}

TEST_CASE("proxies: one per class by default, labelled, deterministic") {
  const auto gen = init_generator(small_spec(), 4);
  const auto bank = init_noise({1, 8, 8}, 10, 2);
  const auto p = generate_proxies(bank, gen);
  CHECK(p.images.shape() == Shape{10, 1, 8, 8});
  for (int k = 0; k < 10; ++k) CHECK(p.labels[static_cast<std::size_t>(k)] == k);
  CHECK(generate_proxies(bank, gen).images == p.images);
  const auto many = generate_proxies(bank, gen, {.per_class = 3, .seed = 1});
  CHECK(many.images.shape() == Shape{30, 1, 8, 8});
  CHECK(std::equal(p.images.data(), p.images.data() + p.images.size(), many.images.data()));
}

TEST_CASE("generator bundle round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "geniu_test_generator";
  std::filesystem::remove_all(dir);
  auto gen = init_generator(small_spec(), 9);
  gen.trained = true;
  gen.steps_trained = 12;
  save_generator(dir, gen);
  const auto back = load_generator(dir);
  CHECK(fingerprint(back.params) == fingerprint(gen.params));
  CHECK(back.trained);
  CHECK(back.steps_trained == 12);
  CHECK(back.spec.channels == gen.spec.channels);
  CHECK(back.spec.lambda == gen.spec.lambda);
}
