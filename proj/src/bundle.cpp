#include "geniu/bundle.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace geniu {

namespace fs = std::filesystem;

namespace {

std::string file_name_for(const std::string& param_name) {
  std::string out;
  for (char c : param_name) out.push_back((std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') ? c : '.');
  return out + ".bin";
}

}  // namespace

void save_bundle(const fs::path& dir, const std::string& kind, const ParamList<float>& params,
                 const nlohmann::json& meta) {
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["kind"] = kind;
  manifest["format"] = "u32 rank, u32 dims, f32 little-endian";
  manifest["parameters"] = nlohmann::json::array();
  for (const auto& p : params) {
    const std::string file = file_name_for(p.name);
    save_tensor((dir / file).string(), p.value);
    manifest["parameters"].push_back({{"name", p.name}, {"file", file}, {"shape", p.value.shape()}});
  }
  manifest["meta"] = meta;
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

LoadedBundle load_bundle(const fs::path& dir, const std::string& expected_kind) {
  const auto manifest = read_json_file(dir / "manifest.json");
  LoadedBundle out;
  out.kind = manifest.at("kind").get<std::string>();
  if (!expected_kind.empty() && out.kind != expected_kind) {
    throw std::runtime_error("bundle " + dir.string() + " holds '" + out.kind + "', expected '" + expected_kind + "'");
  }
  for (const auto& entry : manifest.at("parameters")) {
    TensorF t = load_tensor((dir / entry.at("file").get<std::string>()).string());
    const auto shape = entry.at("shape").get<Shape>();
    if (t.shape() != shape) throw ShapeError("load_bundle[" + entry.at("name").get<std::string>() + "]", shape, t.shape());
    out.params.push_back({entry.at("name").get<std::string>(), std::move(t)});
  }
  out.meta = manifest.value("meta", nlohmann::json::object());
  return out;
}

std::uintmax_t directory_bytes(const fs::path& dir) {
  if (!fs::exists(dir)) throw std::runtime_error("missing artifact: " + dir.string());
  if (fs::is_regular_file(dir)) return fs::file_size(dir);
  std::uintmax_t total = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) total += e.file_size();
  }
  return total;
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("invalid JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace geniu
