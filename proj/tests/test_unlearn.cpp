#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <regex>
#include <set>
#include <type_traits>

#include "doctest.h"
#include "geniu/experiment.hpp"
#include "geniu/unlearn.hpp"
#include "oracles/gradcheck.hpp"
#include "oracles/loss_oracles.hpp"

using namespace geniu;
namespace oracle = geniu::testing;
namespace fs = std::filesystem;

// The entry point admits exactly the trained model, prompts, generator and
// request. A Dataset parameter would change this type.
static_assert(std::is_same_v<decltype(&run_unlearning),
                             UnlearnResult (*)(const ModelParams&, const NoiseBank&, const GeneratorParams&,
                                               const UnlearnRequest&, const RoundObserver&)>);

namespace {

std::set<std::string> reachable_headers(const fs::path& start) {
  const fs::path include_dir = fs::path(GENIU_SOURCE_DIR) / "include";
  const std::regex inc(R"re(^\s*#\s*include\s*"(geniu/[^"]+)")re");
  std::set<std::string> seen;
  std::vector<fs::path> todo{start};
  while (!todo.empty()) {
    const auto file = todo.back();
    todo.pop_back();
    std::ifstream in(file);
    REQUIRE(in.good());
    std::string line;
    std::smatch m;
    while (std::getline(in, line)) {
      if (std::regex_search(line, m, inc) && seen.insert(m[1]).second) todo.push_back(include_dir / m[1].str());
    }
  }
  return seen;
}

std::vector<std::vector<double>> rows(const TensorD& t) {
  std::vector<std::vector<double>> out(t.dim(0));
  const std::size_t w = t.size() / t.dim(0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].assign(t.data() + i * w, t.data() + (i + 1) * w);
  return out;
}

double loss_of(const TensorD& logits, const std::vector<int>& labels, const std::vector<int>& forget, double eps) {
  return in_batch_loss_logits<double>(Var<double>::constant(logits), labels, forget, eps).value()[0];
}

// One trained blob pipeline shared by the end-to-end cases.
struct Pipeline {
  ExperimentConfig cfg;
  DataSplits data;
  TrainPhaseResult phase;
};

const Pipeline& pipeline() {
  static const Pipeline p = [] {
    Pipeline p;
    p.cfg = preset_config("blobs");
    p.cfg.data.n_per_class = 300;
    set_majority(p.cfg, 3);
    p.data = load_data(p.cfg);
    p.phase = run_training_phase(imbalanced_train(p.cfg, p.data.train), p.cfg.arch, p.cfg.generator, phase_config(p.cfg));
    return p;
  }();
  return p;
}

}  // namespace

TEST_CASE("unlearning sources never reach the dataset header") {
  const fs::path root(GENIU_SOURCE_DIR);
  for (const auto& start : {root / "include/geniu/unlearn.hpp", root / "src/unlearn.cpp"}) {
    const auto headers = reachable_headers(start);
    CHECK(headers.count("geniu/classifier.hpp") == 1);
    CHECK(headers.count("geniu/data.hpp") == 0);
    CHECK(headers.count("geniu/train.hpp") == 0);
  }
}

TEST_CASE("in-batch loss: direct substitution") {
  CHECK(in_batch_loss_from_ce<double>({0.5, 0.7, 2.0}, {0, 1, 2}, {2}, 1e-6) == doctest::Approx(1.7));
  // A single retain proxy contributes its own CE.
  CHECK(in_batch_loss_from_ce<double>({0.42}, {0}, {1}, 1e-6) == 0.42);
}

TEST_CASE("in-batch loss matches the scalar oracle") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng() % 9, per = 1 + rng() % 3;
    const TensorD logits = oracle::random_tensor({k * per, k}, rng, -4, 4);
    std::vector<int> labels;
    for (std::size_t i = 0; i < k * per; ++i) labels.push_back(static_cast<int>(i % k));
    std::vector<int> forget{static_cast<int>(rng() % k)};
    if (k > 3 && trial % 2) forget.push_back((forget[0] + 1) % static_cast<int>(k));
    const double want = oracle::unlearn_loss(rows(logits), labels, forget, 1e-6);
    CHECK(std::abs(loss_of(logits, labels, forget, 1e-6) - want) < 1e-10);
  }
}

TEST_CASE("in-batch loss gradients match finite differences") {
  std::mt19937_64 rng(3);
  const std::vector<int> labels{0, 1, 2, 3};
  oracle::Fn fn = [&](const std::vector<Var<double>>& p) { return in_batch_loss_logits<double>(p[0], labels, {1}, 1e-6); };
  CHECK(oracle::max_relative_error(fn, {oracle::random_tensor({4, 4}, rng, -2, 2)}) < 1e-4);
}

TEST_CASE("epsilon floor keeps a perfectly classified forget proxy finite") {
  // CE of the forget proxy is exactly 0 in double precision.
  const TensorD logits({2, 3}, std::vector<double>{1000, 0, 0, 0, 1, 0});
  const std::vector<int> labels{0, 1};
  const double ce_retain = oracle::cross_entropy({0, 1, 0}, 1);
  const double clamped = loss_of(logits, labels, {0}, 1e-6);
  CHECK(std::isfinite(clamped));
  CHECK(clamped == doctest::Approx(1e6 + ce_retain));
  CHECK(std::isinf(oracle::unlearn_loss(rows(logits), labels, {0}, 0.0)));

  const std::vector<TensorD> in{logits};
  auto r = value_and_grad<double>(
      [&](const std::vector<Var<double>>& p) { return in_batch_loss_logits<double>(p[0], labels, {0}, 1e-6); }, in);
  for (double g : r.grads[0].values()) CHECK(std::isfinite(g));
}

TEST_CASE("request validation") {
  UnlearnRequest r;
  CHECK_THROWS_AS(r.validate(10), std::invalid_argument);
  r.forget = {3, 3};
  CHECK_THROWS_AS(r.validate(10), std::invalid_argument);
  r.forget = {10};
  CHECK_THROWS_AS(r.validate(10), std::invalid_argument);
  r.forget = {0, 1, 2};
  CHECK_THROWS_AS(r.validate(3), std::invalid_argument);
  r.forget = {0};
  r.epsilon = 0.0;
  CHECK_THROWS_AS(r.validate(3), std::invalid_argument);
  r.epsilon = 1e-6;
  CHECK_NOTHROW(r.validate(3));
}

TEST_CASE("untrained generator is refused") {
  const ArchSpec arch{.kind = ArchKind::mlp, .widths = {8}, .input_shape = {1, 8, 8}, .num_classes = 4};
  const auto model = init_model(arch, 0);
  const auto bank = init_noise({1, 8, 8}, 4, 0);
  const auto gen = init_generator({.data_shape = {1, 8, 8}, .channels = {4}, .latent_dim = 4}, 0);
  UnlearnRequest req;
  req.forget = {1};
  CHECK_THROWS_AS(run_unlearning(model, bank, gen, req), std::runtime_error);
}

TEST_CASE("zero rounds is the identity for both strategies") {
  const auto& p = pipeline();
  auto req = unlearn_request(p.cfg);
  req.rounds = 0;
  const auto in_batch = run_unlearning(p.phase.classifier, p.phase.bank, p.phase.generator, req);
  CHECK(fingerprint(in_batch.model) == fingerprint(p.phase.classifier));
  CHECK(in_batch.trajectory.size() == 1);
  req.strategy = TuningStrategy::impair_repair;
  const auto ir = run_unlearning(p.phase.classifier, p.phase.bank, p.phase.generator, req);
  CHECK(fingerprint(ir.model) == fingerprint(p.phase.classifier));
}

TEST_CASE("trajectory lengths, observer rounds and determinism") {
  const auto& p = pipeline();
  auto req = unlearn_request(p.cfg);
  req.rounds = 7;
  std::vector<std::size_t> seen;
  RoundObserver obs = [&](std::size_t round, const ModelParams&) -> std::optional<RoundEval> {
    seen.push_back(round);
    return RoundEval{0.5, 0.25};
  };
  const auto a = run_unlearning(p.phase.classifier, p.phase.bank, p.phase.generator, req, obs);
  REQUIRE(a.trajectory.size() == 8);
  CHECK(seen == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});
  CHECK(a.trajectory.back().eval->forget_acc == 0.25);
  CHECK(a.proxies.labels.size() == 10);
  const auto b = run_unlearning(p.phase.classifier, p.phase.bank, p.phase.generator, req);
  CHECK(fingerprint(a.model) == fingerprint(b.model));
  CHECK_FALSE(b.trajectory.back().eval.has_value());

  req.strategy = TuningStrategy::impair_repair;
  const auto ir = run_unlearning(p.phase.classifier, p.phase.bank, p.phase.generator, req);
  REQUIRE(ir.trajectory.size() == 15);
  CHECK(ir.trajectory[7].phase == "impair");
  CHECK(ir.trajectory[8].phase == "repair");
  CHECK(ir.trajectory.back().round == 14);

  const auto csv = trajectory_csv(a.trajectory);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
}

TEST_CASE("proxy CE trends: forget rises, retain does not") {
  const auto& p = pipeline();
  const auto r = run_unlearning(p.phase.classifier, p.phase.bank, p.phase.generator, unlearn_request(p.cfg));
  const auto& t = r.trajectory;
  std::size_t rising = 0;
  for (std::size_t i = 1; i < t.size(); ++i) rising += t[i].forget_ce >= t[i - 1].forget_ce;
  CHECK(static_cast<double>(rising) >= 0.9 * static_cast<double>(t.size() - 1));
  CHECK(t.back().forget_ce > t.front().forget_ce);
  CHECK(t.back().retain_ce <= t.front().retain_ce);
  CHECK(fingerprint(p.phase.classifier) != fingerprint(r.model));
}

TEST_CASE("multi-class forget uses one batch with every class") {
  const auto& p = pipeline();
  auto req = unlearn_request(p.cfg);
  req.forget = {0, 1};
  req.rounds = 20;
  const auto r = run_unlearning(p.phase.classifier, p.phase.bank, p.phase.generator, req);
  std::set<int> classes(r.proxies.labels.begin(), r.proxies.labels.end());
  CHECK(classes.size() == 10);
  CHECK(r.trajectory.back().forget_ce > r.trajectory.front().forget_ce);
}
