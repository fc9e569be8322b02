#include "geniu/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "geniu/bundle.hpp"
#include "geniu/random.hpp"

namespace geniu {

void ArchSpec::validate() const {
  if (widths.empty()) throw std::invalid_argument("arch: layer width list must be nonempty");
  for (auto w : widths) {
    if (w == 0) throw std::invalid_argument("arch: zero layer width");
  }
  if (input_shape.size() != 3 || element_count(input_shape) == 0) {
    throw std::invalid_argument("arch: input shape must be [C,H,W], got " + shape_string(input_shape));
  }
  if (num_classes < 2) throw std::invalid_argument("arch: need at least 2 classes");
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

namespace {

TensorF uniform(const Shape& shape, float bound, Rng& rng) {
  std::uniform_real_distribution<float> u(-bound, bound);
  TensorF t(shape);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

}  // namespace

ModelParams init_model(const ArchSpec& arch, std::uint64_t seed) {
  arch.validate();
  Rng rng = make_rng(seed, "classifier-init");
  ModelParams m{arch, {}};
  // He-uniform weights, fan-in uniform biases.
  auto add_layer = [&](const std::string& name, Shape wshape, std::size_t fan_in, std::size_t out) {
    const float wb = std::sqrt(6.0f / static_cast<float>(fan_in));
    const float bb = 1.0f / std::sqrt(static_cast<float>(fan_in));
    m.params.push_back({name + ".weight", uniform(wshape, wb, rng)});
    m.params.push_back({name + ".bias", uniform({out}, bb, rng)});
  };
  if (arch.kind == ArchKind::mlp) {
    std::size_t in = element_count(arch.input_shape);
    for (std::size_t i = 0; i < arch.widths.size(); ++i) {
      add_layer("fc" + std::to_string(i), {in, arch.widths[i]}, in, arch.widths[i]);
      in = arch.widths[i];
    }
    add_layer("head", {in, arch.num_classes}, in, arch.num_classes);
  } else {
    std::size_t c = arch.input_shape[0];
    for (std::size_t i = 0; i < arch.widths.size(); ++i) {
      add_layer("conv" + std::to_string(i), {arch.widths[i], c, 3, 3}, c * 9, arch.widths[i]);
      c = arch.widths[i];
    }
    add_layer("head", {c, arch.num_classes}, c, arch.num_classes);
  }
  return m;
}

Var<float> forward_graph(const ArchSpec& arch, const std::vector<Var<float>>& params, const Var<float>& images) {
  const auto& s = images.shape();
  if (s.size() != 4 || Shape(s.begin() + 1, s.end()) != arch.input_shape) {
    Shape expected{0};
    expected.insert(expected.end(), arch.input_shape.begin(), arch.input_shape.end());
    throw ShapeError("classifier forward", s, expected);
  }
  const std::size_t layers = arch.widths.size();
  if (params.size() != 2 * (layers + 1)) throw std::invalid_argument("classifier forward: wrong parameter count");
  Var<float> h = images;
  if (arch.kind == ArchKind::mlp) {
    h = ag::flatten(h);
    for (std::size_t i = 0; i < layers; ++i) h = ag::relu(ag::add_bias(ag::matmul(h, params[2 * i]), params[2 * i + 1]));
  } else {
    for (std::size_t i = 0; i < layers; ++i) {
      h = ag::relu(ag::add_bias(ag::conv2d(h, params[2 * i], {.stride = 2, .padding = 1}), params[2 * i + 1]));
    }
    h = ag::global_avg_pool(h);
  }
  return ag::add_bias(ag::matmul(h, params[2 * layers]), params[2 * layers + 1]);
}

TensorF forward(const ModelParams& model, const TensorF& images) {
  std::vector<Var<float>> p;
  p.reserve(model.params.size());
  for (const auto& np : model.params) p.push_back(Var<float>::constant(np.value));
  TensorF out = forward_graph(model.arch, p, Var<float>::constant(images)).value();
  if (!out.all_finite()) throw std::runtime_error("classifier forward produced non-finite logits");
  return out;
}

TensorF forward_chunked(const ModelParams& model, const TensorF& images, std::size_t chunk) {
  const std::size_t n = images.dim(0);
  if (n <= chunk) return forward(model, images);
  const std::size_t per = images.size() / n;
  const std::size_t k = model.arch.num_classes;
  std::vector<float> logits;
  logits.reserve(n * k);
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t len = std::min(chunk, n - start);
    Shape s = images.shape();
    s[0] = len;
    TensorF part(s, std::vector<float>(images.data() + start * per, images.data() + (start + len) * per));
    TensorF out = forward(model, part);
    logits.insert(logits.end(), out.values().begin(), out.values().end());
  }
  return TensorF({n, k}, std::move(logits));
}

std::vector<int> argmax_rows(const TensorF& logits) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = logits.data() + i * k;
    out[i] = static_cast<int>(std::max_element(row, row + k) - row);
  }
  return out;
}

std::vector<double> logit_entropy(const TensorF& logits) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = logits.data() + i * k;
    const double m = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - m);
    const double log_z = std::log(z);
    double e = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double log_p = row[j] - m - log_z;
      e -= std::exp(log_p) * log_p;
    }
    out[i] = e;
  }
  return out;
}

std::uint64_t fingerprint(const ModelParams& model) {
  return fingerprint(model.params);
}

nlohmann::json arch_to_json(const ArchSpec& arch) {
  return {{"kind", arch.kind == ArchKind::mlp ? "mlp" : "smallcnn"},
          {"widths", arch.widths},
          {"input_shape", arch.input_shape},
          {"num_classes", arch.num_classes}};
}

ArchSpec arch_from_json(const nlohmann::json& j) {
  ArchSpec a;
  const auto kind = j.value("kind", std::string("mlp"));
  if (kind == "mlp") {
    a.kind = ArchKind::mlp;
  } else if (kind == "smallcnn") {
    a.kind = ArchKind::smallcnn;
  } else {
    throw std::invalid_argument("arch: unknown kind '" + kind + "'");
  }
  if (j.contains("widths")) a.widths = j.at("widths").get<std::vector<std::size_t>>();
  if (j.contains("input_shape")) a.input_shape = j.at("input_shape").get<Shape>();
  if (j.contains("num_classes")) a.num_classes = j.at("num_classes").get<std::size_t>();
  return a;
}

void save_model(const std::filesystem::path& dir, const ModelParams& model, const nlohmann::json& meta) {
  nlohmann::json m = meta.is_object() ? meta : nlohmann::json::object();
  m["architecture"] = arch_to_json(model.arch);
  save_bundle(dir, "classifier", model.params, m);
}

ModelParams load_model(const std::filesystem::path& dir) {
  auto b = load_bundle(dir, "classifier");
  ModelParams m{arch_from_json(b.meta.at("architecture")), std::move(b.params)};
  m.arch.validate();
  const auto fresh = init_model(m.arch, 0);
  if (fresh.params.size() != m.params.size()) throw std::runtime_error("model bundle: parameter count mismatch");
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    if (fresh.params[i].value.shape() != m.params[i].value.shape()) {
      throw ShapeError("model bundle[" + m.params[i].name + "]", fresh.params[i].value.shape(), m.params[i].value.shape());
    }
  }
  return m;
}

}  // namespace geniu
