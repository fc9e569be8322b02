#include "geniu/noise.hpp"

#include <cmath>
#include <random>

#include "geniu/bundle.hpp"
#include "geniu/random.hpp"

namespace geniu {

Shape NoiseBank::sample_shape() const {
  if (noises.empty()) throw std::invalid_argument("noise bank is empty");
  return noises.front().shape();
}

TensorF NoiseBank::stacked() const {
  const Shape s = sample_shape();
  Shape out{noises.size()};
  out.insert(out.end(), s.begin(), s.end());
  std::vector<float> v;
  v.reserve(element_count(out));
  for (const auto& z : noises) v.insert(v.end(), z.values().begin(), z.values().end());
  return TensorF(std::move(out), std::move(v));
}

void NoiseBank::validate() const {
  if (noises.empty()) throw std::invalid_argument("noise bank is empty");
  if (labels.size() != noises.size()) throw std::invalid_argument("noise bank: label count mismatch");
  const Shape s = noises.front().shape();
  for (std::size_t k = 0; k < noises.size(); ++k) {
    if (noises[k].shape() != s) throw ShapeError("noise bank", s, noises[k].shape());
    if (labels[k] != static_cast<int>(k)) throw std::invalid_argument("noise bank: labels must be 0..K-1 in order");
  }
}

NoiseBank init_noise(const Shape& input_shape, std::size_t num_classes, std::uint64_t seed) {
  NoiseBank bank;
  Rng rng = make_rng(seed, "noise-init");
  std::normal_distribution<float> normal(0.0f, 1.0f);
  for (std::size_t k = 0; k < num_classes; ++k) {
    TensorF z(input_shape);
    for (auto& v : z.values()) v = normal(rng);
    bank.noises.push_back(std::move(z));
    bank.labels.push_back(static_cast<int>(k));
  }
  return bank;
}

NoiseTrainLog train_noise_bank(NoiseBank& bank, const ModelParams& classifier, std::size_t steps, double lr) {
  bank.validate();
  if (bank.num_classes() != classifier.arch.num_classes) {
    throw std::invalid_argument("noise bank size differs from classifier class count");
  }
  const std::size_t k = bank.num_classes();
  std::vector<Var<float>> frozen;
  for (const auto& p : classifier.params) frozen.push_back(Var<float>::constant(p.value));

  ParamList<float> z{{"noise", bank.stacked()}};
  AdamState<float> adam(AdamConfig{.lr = lr});
  NoiseTrainLog log;
  std::vector<double> per_class(k);
  auto loss_fn = [&](const std::vector<Var<float>>& p) {
    auto ce = ag::softmax_cross_entropy(forward_graph(classifier.arch, frozen, p[0]), bank.labels);
    for (std::size_t i = 0; i < k; ++i) per_class[i] = ce.value()[i];
    return ag::sum(ce);
  };
  for (std::size_t step = 0; step < steps; ++step) {
    auto r = value_and_grad<float>(loss_fn, tensors_of(z));
    if (!std::isfinite(r.loss)) throw std::runtime_error("noise training: non-finite loss at step " + std::to_string(step));
    log.ce.push_back(per_class);
    adam_step<float>(z, r.grads, adam);
  }
  const std::size_t per = element_count(bank.sample_shape());
  for (std::size_t i = 0; i < k; ++i) {
    std::copy(z[0].value.data() + i * per, z[0].value.data() + (i + 1) * per, bank.noises[i].data());
  }
  const auto final_logits = forward(classifier, z[0].value);
  auto ce = ag::softmax_cross_entropy(Var<float>::constant(final_logits), bank.labels);
  log.final_ce.assign(ce.value().values().begin(), ce.value().values().end());
  bank.classifier_fingerprint = fingerprint(classifier);
  return log;
}

bool gate_check(const NoiseBank& bank, const ModelParams& classifier) {
  bank.validate();
  const auto pred = argmax_rows(forward(classifier, bank.stacked()));
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if (pred[k] != bank.labels[k]) return false;
  }
  return true;
}

void save_noise_bank(const std::filesystem::path& dir, const NoiseBank& bank) {
  bank.validate();
  ParamList<float> entries;
  for (std::size_t k = 0; k < bank.noises.size(); ++k) entries.push_back({"noise_" + std::to_string(k), bank.noises[k]});
  nlohmann::json meta{{"labels", bank.labels},
                      {"trained_at_epoch", bank.trained_at_epoch},
                      {"classifier_fingerprint", bank.classifier_fingerprint}};
  save_bundle(dir, "noise_bank", entries, meta);
}

NoiseBank load_noise_bank(const std::filesystem::path& dir) {
  auto b = load_bundle(dir, "noise_bank");
  NoiseBank bank;
  for (auto& p : b.params) bank.noises.push_back(std::move(p.value));
  bank.labels = b.meta.at("labels").get<std::vector<int>>();
  bank.trained_at_epoch = b.meta.value("trained_at_epoch", -1);
  bank.classifier_fingerprint = b.meta.value("classifier_fingerprint", std::uint64_t{0});
  bank.validate();
  return bank;
}

}  // namespace geniu
