#include "geniu/generator.hpp"

#include <cmath>
#include <random>

#include "geniu/bundle.hpp"
#include "geniu/random.hpp"

namespace geniu {

void GeneratorSpec::validate() const {
  if (data_shape.size() != 3 || element_count(data_shape) == 0) {
    throw std::invalid_argument("generator: data shape must be [C,H,W], got " + shape_string(data_shape));
  }
  if (channels.empty()) throw std::invalid_argument("generator: channel list must be nonempty");
  for (auto c : channels) {
    if (c == 0) throw std::invalid_argument("generator: zero channel width");
  }
  if (latent_dim == 0) throw std::invalid_argument("generator: latent dimension must be > 0");
  if (!(lambda >= 0.0)) throw std::invalid_argument("generator: lambda must be >= 0");
}

std::vector<std::pair<std::size_t, std::size_t>> GeneratorSpec::spatial_sizes() const {
  std::vector<std::pair<std::size_t, std::size_t>> sizes{{data_shape[1], data_shape[2]}};
  for (std::size_t i = 0; i < channels.size(); ++i) {
    auto [h, w] = sizes.back();
    sizes.push_back({(h - 1) / 2 + 1, (w - 1) / 2 + 1});
  }
  return sizes;
}

namespace {

TensorF uniform(const Shape& shape, float bound, Rng& rng) {
  std::uniform_real_distribution<float> u(-bound, bound);
  TensorF t(shape);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

std::size_t bottleneck_size(const GeneratorSpec& spec) {
  const auto [h, w] = spec.spatial_sizes().back();
  return spec.channels.back() * h * w;
}

}  // namespace

GeneratorParams init_generator(const GeneratorSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng = make_rng(seed, "generator-init");
  GeneratorParams gen{spec, {}, false, 0};
  auto add_layer = [&](const std::string& name, Shape wshape, std::size_t fan_in, std::size_t out, float gain) {
    const float wb = gain * std::sqrt(6.0f / static_cast<float>(fan_in));
    const float bb = 1.0f / std::sqrt(static_cast<float>(fan_in));
    gen.params.push_back({name + ".weight", uniform(wshape, wb, rng)});
    gen.params.push_back({name + ".bias", uniform({out}, bb, rng)});
  };
  std::size_t c = spec.data_shape[0];
  for (std::size_t i = 0; i < spec.channels.size(); ++i) {
    add_layer("enc" + std::to_string(i), {spec.channels[i], c, 3, 3}, c * 9, spec.channels[i], 1.0f);
    c = spec.channels[i];
  }
  const std::size_t flat = bottleneck_size(spec);
  // Small heads start the posterior near the prior.
  add_layer("mu", {flat, spec.latent_dim}, flat, spec.latent_dim, 0.1f);
  add_layer("logvar", {flat, spec.latent_dim}, flat, spec.latent_dim, 0.1f);
  add_layer("dec_in", {spec.latent_dim, flat}, spec.latent_dim, flat, 1.0f);
  for (std::size_t i = spec.channels.size(); i-- > 0;) {
    const std::size_t out = i > 0 ? spec.channels[i - 1] : spec.data_shape[0];
    add_layer("dec" + std::to_string(i), {out, spec.channels[i], 3, 3}, spec.channels[i] * 9, out,
              i > 0 ? 1.0f : 0.5f);
  }
  return gen;
}

VaeGraph<float> vae_graph(const GeneratorSpec& spec, const std::vector<Var<float>>& params, const Var<float>& z,
                          const TensorF* eps) {
  const auto& s = z.shape();
  if (s.size() != 4 || Shape(s.begin() + 1, s.end()) != spec.data_shape) {
    Shape expected{0};
    expected.insert(expected.end(), spec.data_shape.begin(), spec.data_shape.end());
    throw ShapeError("generator forward", s, expected);
  }
  const std::size_t levels = spec.channels.size();
  if (params.size() != 4 * levels + 6) throw std::invalid_argument("generator forward: wrong parameter count");
  const auto sizes = spec.spatial_sizes();
  const std::size_t n = s[0];

  std::size_t p = 0;
  Var<float> h = z;
  for (std::size_t i = 0; i < levels; ++i, p += 2) {
    h = ag::relu(ag::add_bias(ag::conv2d(h, params[p], {.stride = 2, .padding = 1}), params[p + 1]));
  }
  h = ag::flatten(h);
  Var<float> mu = ag::add_bias(ag::matmul(h, params[p]), params[p + 1]);
  Var<float> logvar = ag::add_bias(ag::matmul(h, params[p + 2]), params[p + 3]);
  p += 4;

  Var<float> code = mu;
  if (eps) {
    if (eps->shape() != mu.shape()) throw ShapeError("generator eps", eps->shape(), mu.shape());
    auto sigma = ag::exp(ag::scale(logvar, 0.5f));
    code = ag::add(mu, ag::mul(sigma, Var<float>::constant(*eps)));
  }

  Var<float> d = ag::relu(ag::add_bias(ag::matmul(code, params[p]), params[p + 1]));
  p += 2;
  d = ag::reshape(d, Shape{n, spec.channels.back(), sizes.back().first, sizes.back().second});
  for (std::size_t i = levels; i-- > 0; p += 2) {
    d = ag::upsample_nearest2d(d, sizes[i].first, sizes[i].second);
    d = ag::add_bias(ag::conv2d(d, params[p], {.stride = 1, .padding = 1}), params[p + 1]);
    if (i > 0) d = ag::relu(d);
  }
  if (spec.output == OutputActivation::sigmoid) d = ag::sigmoid(d);
  return {d, mu, logvar};
}

namespace {

TensorF standard_normal(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  TensorF t(shape);
  for (auto& v : t.values()) v = normal(rng);
  return t;
}

std::vector<Var<float>> constants(const ParamList<float>& params) {
  std::vector<Var<float>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(Var<float>::constant(p.value));
  return out;
}

}  // namespace

VaeOutput vae_forward(const GeneratorParams& gen, const TensorF& z_batch, bool sample, std::uint64_t seed) {
  TensorF eps;
  if (sample) eps = standard_normal({z_batch.dim(0), gen.spec.latent_dim}, seed);
  auto g = vae_graph(gen.spec, constants(gen.params), Var<float>::constant(z_batch), sample ? &eps : nullptr);
  VaeOutput out{g.recon.value(), g.mu.value(), g.logvar.value()};
  if (!out.recon.all_finite() || !out.mu.all_finite() || !out.logvar.all_finite()) {
    throw std::runtime_error("generator forward produced non-finite activations");
  }
  return out;
}

template <typename T>
GenLossGraph<T> loss_gen(const Var<T>& recon, const Var<T>& target, const Var<T>& mu, const Var<T>& logvar,
                         double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("loss_gen: lambda must be >= 0");
  if (mu.shape() != logvar.shape()) throw ShapeError("loss_gen mu/logvar", mu.shape(), logvar.shape());
  auto rec = ag::mse(recon, target);
  const T batch = static_cast<T>(mu.shape().empty() ? 1 : mu.shape()[0]);
  auto inner = ag::sub(ag::sub(ag::add_scalar(logvar, T(1)), ag::exp(logvar)), ag::square(mu));
  auto dis = ag::scale(ag::sum(inner), T(1) / (T(2) * batch));
  auto gen = ag::sub(rec, ag::scale(dis, static_cast<T>(lambda)));
  return {gen, rec, dis};
}

template <typename T>
GenLossValues loss_gen_values(const Tensor<T>& recon, const Tensor<T>& target, const Tensor<T>& mu,
                              const Tensor<T>& logvar, double lambda) {
  auto g = loss_gen<T>(Var<T>::constant(recon), Var<T>::constant(target), Var<T>::constant(mu),
                       Var<T>::constant(logvar), lambda);
  return {static_cast<double>(g.gen.value()[0]), static_cast<double>(g.rec.value()[0]),
          static_cast<double>(g.dis.value()[0])};
}

template GenLossGraph<float> loss_gen(const Var<float>&, const Var<float>&, const Var<float>&, const Var<float>&,
                                      double);
template GenLossGraph<double> loss_gen(const Var<double>&, const Var<double>&, const Var<double>&,
                                       const Var<double>&, double);
template GenLossValues loss_gen_values(const TensorF&, const TensorF&, const TensorF&, const TensorF&, double);
template GenLossValues loss_gen_values(const TensorD&, const TensorD&, const TensorD&, const TensorD&, double);

GenTrainLog train_generator(GeneratorParams& gen, const NoiseBank& bank, const SupervisionTargets& targets,
                            std::size_t steps, double lr, std::uint64_t seed, AdamState<float>* state) {
  bank.validate();
  const std::size_t k = bank.num_classes();
  if (bank.sample_shape() != gen.spec.data_shape) {
    throw ShapeError("train_generator noise", bank.sample_shape(), gen.spec.data_shape);
  }
  if (targets.per_class.size() != k) {
    throw std::invalid_argument("train_generator: supervision covers " + std::to_string(targets.per_class.size()) +
                                " classes, expected " + std::to_string(k));
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (targets.per_class[c].empty()) {
      throw std::invalid_argument("train_generator: no supervision sample for class " + std::to_string(c));
    }
    for (const auto& t : targets.per_class[c]) {
      if (t.shape() != gen.spec.data_shape) throw ShapeError("train_generator target", t.shape(), gen.spec.data_shape);
    }
  }

  AdamState<float> local(AdamConfig{.lr = lr});
  AdamState<float>& adam = state ? *state : local;
  adam.config.lr = lr;
  const auto z = Var<float>::constant(bank.stacked());
  const std::size_t per = element_count(gen.spec.data_shape);
  Shape batch_shape{k};
  batch_shape.insert(batch_shape.end(), gen.spec.data_shape.begin(), gen.spec.data_shape.end());

  GenTrainLog log;
  for (std::size_t step = 0; step < steps; ++step) {
    std::vector<float> tv;
    tv.reserve(k * per);
    for (std::size_t c = 0; c < k; ++c) {
      const auto& options = targets.per_class[c];
      const auto& t = options[step % options.size()];
      tv.insert(tv.end(), t.values().begin(), t.values().end());
    }
    const auto target = Var<float>::constant(TensorF(batch_shape, std::move(tv)));
    const TensorF eps = standard_normal({k, gen.spec.latent_dim}, derive_seed(seed, "vae-eps", step));
    GenLossValues values{};
    auto loss_fn = [&](const std::vector<Var<float>>& p) {
      auto g = vae_graph(gen.spec, p, z, &eps);
      auto l = loss_gen<float>(g.recon, target, g.mu, g.logvar, gen.spec.lambda);
      values = {l.gen.value()[0], l.rec.value()[0], l.dis.value()[0]};
      return l.gen;
    };
    auto r = value_and_grad<float>(loss_fn, tensors_of(gen.params));
    if (!std::isfinite(r.loss)) {
      throw std::runtime_error("generator training: non-finite loss at step " + std::to_string(step));
    }
    adam_step<float>(gen.params, r.grads, adam);
    log.steps.push_back(values);
  }
  if (steps > 0) gen.trained = true;
  gen.steps_trained += steps;
  return log;
}

ProxySet generate_proxies(const NoiseBank& bank, const GeneratorParams& gen, const ProxyOptions& options) {
  bank.validate();
  if (options.per_class == 0) throw std::invalid_argument("generate_proxies: per_class must be >= 1");
  const std::size_t k = bank.num_classes();
  const TensorF z = bank.stacked();
  const std::size_t per = element_count(gen.spec.data_shape);
  Shape shape{k * options.per_class};
  shape.insert(shape.end(), gen.spec.data_shape.begin(), gen.spec.data_shape.end());
  std::vector<float> images;
  images.reserve(element_count(shape));
  ProxySet out;
  for (std::size_t copy = 0; copy < options.per_class; ++copy) {
    const bool sample = options.sample || copy > 0;
    const auto o = vae_forward(gen, z, sample, derive_seed(options.seed, "proxy-eps", copy));
    images.insert(images.end(), o.recon.data(), o.recon.data() + k * per);
    out.labels.insert(out.labels.end(), bank.labels.begin(), bank.labels.end());
  }
  out.images = TensorF(std::move(shape), std::move(images));
  return out;
}

nlohmann::json generator_spec_to_json(const GeneratorSpec& spec) {
  return {{"data_shape", spec.data_shape},
          {"channels", spec.channels},
          {"latent_dim", spec.latent_dim},
          {"lambda", spec.lambda},
          {"output", spec.output == OutputActivation::sigmoid ? "sigmoid" : "identity"}};
}

GeneratorSpec generator_spec_from_json(const nlohmann::json& j) {
  GeneratorSpec s;
  if (j.contains("data_shape")) s.data_shape = j.at("data_shape").get<Shape>();
  if (j.contains("channels")) s.channels = j.at("channels").get<std::vector<std::size_t>>();
  if (j.contains("latent_dim")) s.latent_dim = j.at("latent_dim").get<std::size_t>();
  if (j.contains("lambda")) s.lambda = j.at("lambda").get<double>();
  const auto out = j.value("output", std::string("identity"));
  if (out == "identity") {
    s.output = OutputActivation::identity;
  } else if (out == "sigmoid") {
    s.output = OutputActivation::sigmoid;
  } else {
    throw std::invalid_argument("generator: unknown output activation '" + out + "'");
  }
  return s;
}

void save_generator(const std::filesystem::path& dir, const GeneratorParams& gen) {
  nlohmann::json meta{{"spec", generator_spec_to_json(gen.spec)},
                      {"trained", gen.trained},
                      {"steps_trained", gen.steps_trained}};
  save_bundle(dir, "generator", gen.params, meta);
}

GeneratorParams load_generator(const std::filesystem::path& dir) {
  auto b = load_bundle(dir, "generator");
  GeneratorParams gen;
  gen.spec = generator_spec_from_json(b.meta.at("spec"));
  gen.spec.validate();
  gen.params = std::move(b.params);
  gen.trained = b.meta.value("trained", false);
  gen.steps_trained = b.meta.value("steps_trained", std::size_t{0});
  const auto fresh = init_generator(gen.spec, 0);
  if (fresh.params.size() != gen.params.size()) throw std::runtime_error("generator bundle: parameter count mismatch");
  for (std::size_t i = 0; i < gen.params.size(); ++i) {
    if (fresh.params[i].value.shape() != gen.params[i].value.shape()) {
      throw ShapeError("generator bundle[" + gen.params[i].name + "]", fresh.params[i].value.shape(),
                       gen.params[i].value.shape());
    }
  }
  return gen;
}

}  // namespace geniu
