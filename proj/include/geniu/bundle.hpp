#pragma once

#include <filesystem>
#include <string>

#include "geniu/optim.hpp"
#include "json.hpp"

namespace geniu {

// On-disk parameter bundle: <dir>/manifest.json plus one tensor file per
// entry. The manifest lists entries in order with file name and shape; `meta`
// is stored verbatim under "meta".
void save_bundle(const std::filesystem::path& dir, const std::string& kind, const ParamList<float>& params,
                 const nlohmann::json& meta);

struct LoadedBundle {
  std::string kind;
  ParamList<float> params;
  nlohmann::json meta;
};

LoadedBundle load_bundle(const std::filesystem::path& dir, const std::string& expected_kind);

// Total size in bytes of every regular file under dir.
std::uintmax_t directory_bytes(const std::filesystem::path& dir);

// Writes text so that identical content yields identical bytes.
void write_text_file(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace geniu
