#include "geniu/unlearn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace geniu {

void UnlearnRequest::validate(std::size_t num_classes) const {
  if (forget.empty()) throw std::invalid_argument("unlearn: forget set is empty");
  std::vector<int> sorted = forget;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("unlearn: forget set has duplicates");
  }
  for (int c : sorted) {
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
      throw std::invalid_argument("unlearn: forget class " + std::to_string(c) + " out of range");
    }
  }
  if (sorted.size() >= num_classes) throw std::invalid_argument("unlearn: forget set must leave a retained class");
  if (!(epsilon > 0.0)) throw std::invalid_argument("unlearn: epsilon must be > 0");
  if (!(lr >= 0.0)) throw std::invalid_argument("unlearn: lr must be >= 0");
  if (proxies_per_class == 0) throw std::invalid_argument("unlearn: proxies per class must be >= 1");
}

namespace {

bool contains(const std::vector<int>& set, int c) {
  return std::find(set.begin(), set.end(), c) != set.end();
}

std::vector<Var<float>> constants(const ParamList<float>& params) {
  std::vector<Var<float>> out;
  for (const auto& p : params) out.push_back(Var<float>::constant(p.value));
  return out;
}

// Per-proxy CE of the current model, split into forget/retain means.
std::pair<double, double> split_ce(const ModelParams& model, const ProxySet& proxies, const std::vector<int>& forget) {
  auto ce = ag::softmax_cross_entropy(Var<float>::constant(forward(model, proxies.images)), proxies.labels);
  double f = 0, r = 0;
  std::size_t nf = 0, nr = 0;
  for (std::size_t i = 0; i < proxies.labels.size(); ++i) {
    if (contains(forget, proxies.labels[i])) {
      f += ce.value()[i];
      ++nf;
    } else {
      r += ce.value()[i];
      ++nr;
    }
  }
  return {nf ? f / static_cast<double>(nf) : 0.0, nr ? r / static_cast<double>(nr) : 0.0};
}

RoundRecord record(std::size_t round, const std::string& phase, double loss, const ModelParams& model,
                   const ProxySet& proxies, const std::vector<int>& forget, const RoundObserver& observer) {
  RoundRecord rec;
  rec.round = round;
  rec.phase = phase;
  rec.loss = loss;
  std::tie(rec.forget_ce, rec.retain_ce) = split_ce(model, proxies, forget);
  if (observer) rec.eval = observer(round, model);
  return rec;
}

void check_proxies(const ModelParams& model, const ProxySet& proxies) {
  const std::size_t k = model.arch.num_classes;
  std::vector<std::size_t> counts(k, 0);
  for (int y : proxies.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) throw std::invalid_argument("unlearn: proxy label out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  for (auto c : counts) {
    if (c != counts.front() || c == 0) throw std::invalid_argument("unlearn: proxies must cover every class equally");
  }
}

// Adam descent on `objective` for `steps` steps, recording after each step.
void tune(ModelParams& model, std::size_t steps, double lr, const std::string& phase, std::size_t first_round,
          const std::function<Var<float>(const std::vector<Var<float>>&)>& objective,
          const std::function<double(const ModelParams&)>& loss_value, const ProxySet& proxies,
          const std::vector<int>& forget, const RoundObserver& observer, std::vector<RoundRecord>& out) {
  AdamState<float> adam(AdamConfig{.lr = lr});
  for (std::size_t s = 0; s < steps; ++s) {
    auto r = value_and_grad<float>(objective, tensors_of(model.params));
    if (!std::isfinite(r.loss)) throw std::runtime_error(phase + ": non-finite loss at round " + std::to_string(s));
    adam_step<float>(model.params, r.grads, adam);
    out.push_back(record(first_round + s + 1, phase, loss_value(model), model, proxies, forget, observer));
  }
}

}  // namespace

template <typename T>
Var<T> in_batch_loss_logits(const Var<T>& logits, const std::vector<int>& labels, const std::vector<int>& forget,
                            double epsilon) {
  auto ce = ag::softmax_cross_entropy(logits, labels);
  const std::size_t n = labels.size();
  // Masks split the per-proxy CE vector into its two roles.
  Tensor<T> retain_mask({n}, T(0)), forget_mask({n}, T(0));
  for (std::size_t i = 0; i < n; ++i) (contains(forget, labels[i]) ? forget_mask : retain_mask)[i] = T(1);
  auto retain = ag::sum(ag::mul(ce, Var<T>::constant(retain_mask)));
  auto recip = ag::reciprocal(ag::clamp_min(ce, static_cast<T>(epsilon)));
  auto forget_term = ag::sum(ag::mul(recip, Var<T>::constant(forget_mask)));
  return ag::add(retain, forget_term);
}

template Var<float> in_batch_loss_logits(const Var<float>&, const std::vector<int>&, const std::vector<int>&, double);
template Var<double> in_batch_loss_logits(const Var<double>&, const std::vector<int>&, const std::vector<int>&,
                                          double);

Var<float> in_batch_loss(const ArchSpec& arch, const std::vector<Var<float>>& params, const ProxySet& proxies,
                         const std::vector<int>& forget, double epsilon) {
  return in_batch_loss_logits(forward_graph(arch, params, Var<float>::constant(proxies.images)), proxies.labels, forget,
                              epsilon);
}

UnlearnResult in_batch_tuning(const ModelParams& original, const ProxySet& proxies, const UnlearnRequest& request,
                              const RoundObserver& observer) {
  request.validate(original.arch.num_classes);
  check_proxies(original, proxies);
  UnlearnResult out{original, {}, proxies};
  auto objective = [&](const std::vector<Var<float>>& p) {
    return in_batch_loss(original.arch, p, proxies, request.forget, request.epsilon);
  };
  auto value = [&](const ModelParams& m) { return static_cast<double>(objective(constants(m.params)).value()[0]); };
  out.trajectory.push_back(record(0, "in_batch", value(out.model), out.model, proxies, request.forget, observer));
  tune(out.model, request.rounds, request.lr, "in_batch", 0, objective, value, proxies, request.forget, observer,
       out.trajectory);
  return out;
}

UnlearnResult impair_repair(const ModelParams& original, const ProxySet& proxies, const std::vector<int>& forget,
                            std::size_t rounds, double lr, const RoundObserver& observer) {
  UnlearnRequest check;
  check.forget = forget;
  check.lr = lr;
  check.validate(original.arch.num_classes);
  check_proxies(original, proxies);

  std::vector<std::size_t> f_idx, r_idx;
  for (std::size_t i = 0; i < proxies.labels.size(); ++i) (contains(forget, proxies.labels[i]) ? f_idx : r_idx).push_back(i);
  TensorF f_mask({proxies.labels.size()}, 0.0f), r_mask({proxies.labels.size()}, 0.0f);
  for (auto i : f_idx) f_mask[i] = 1.0f;
  for (auto i : r_idx) r_mask[i] = 1.0f;
  auto masked_ce = [&](const std::vector<Var<float>>& p, const TensorF& mask) {
    auto ce = ag::softmax_cross_entropy(forward_graph(original.arch, p, Var<float>::constant(proxies.images)),
                                        proxies.labels);
    return ag::sum(ag::mul(ce, Var<float>::constant(mask)));
  };
  auto impair = [&](const std::vector<Var<float>>& p) { return ag::neg(masked_ce(p, f_mask)); };
  auto repair = [&](const std::vector<Var<float>>& p) { return masked_ce(p, r_mask); };
  auto impair_value = [&](const ModelParams& m) { return static_cast<double>(impair(constants(m.params)).value()[0]); };
  auto repair_value = [&](const ModelParams& m) { return static_cast<double>(repair(constants(m.params)).value()[0]); };

  UnlearnResult out{original, {}, proxies};
  out.trajectory.push_back(record(0, "impair", impair_value(out.model), out.model, proxies, forget, observer));
  tune(out.model, rounds, lr, "impair", 0, impair, impair_value, proxies, forget, observer, out.trajectory);
  tune(out.model, rounds, lr, "repair", rounds, repair, repair_value, proxies, forget, observer, out.trajectory);
  return out;
}

UnlearnResult run_unlearning(const ModelParams& original, const NoiseBank& bank, const GeneratorParams& generator,
                             const UnlearnRequest& request, const RoundObserver& observer) {
  request.validate(original.arch.num_classes);
  if (!generator.trained) throw std::runtime_error("unlearn: generator was never trained (gate did not pass)");
  if (bank.num_classes() != original.arch.num_classes) {
    throw std::invalid_argument("unlearn: noise bank size differs from classifier class count");
  }
  // Proxies are produced once, before any tuning round.
  const auto proxies =
      generate_proxies(bank, generator, {.per_class = request.proxies_per_class, .sample = false, .seed = request.seed});
  if (request.strategy == TuningStrategy::impair_repair) {
    return impair_repair(original, proxies, request.forget, request.rounds, request.lr, observer);
  }
  return in_batch_tuning(original, proxies, request, observer);
}

std::string trajectory_csv(const std::vector<RoundRecord>& trajectory) {
  std::ostringstream o;
  o.precision(9);
  o << "round,phase,loss,forget_proxy_ce,retain_proxy_ce,test_retain_acc,test_forget_acc\n";
  for (const auto& r : trajectory) {
    o << r.round << ',' << r.phase << ',' << r.loss << ',' << r.forget_ce << ',' << r.retain_ce << ',';
    if (r.eval) o << r.eval->retain_acc << ',' << r.eval->forget_acc;
    else o << ',';
    o << '\n';
  }
  return o.str();
}

}  // namespace geniu
