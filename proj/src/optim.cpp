#include "geniu/optim.hpp"

namespace geniu {

std::uint64_t fingerprint(const ParamList<float>& params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params) {
    for (char c : p.name) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
    h = fingerprint(p.value, h);
  }
  return h;
}

}  // namespace geniu
