#pragma once

#include <cstdint>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace swinifs {

inline constexpr const char* kSeedEnvVar = "SWINIFS_SEED";

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = splitmix64(seed);
  for (unsigned char c : tag) h = splitmix64(h ^ c);
  return h;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) { return splitmix64(splitmix64(seed) ^ index); }

// Every stochastic source in training and evaluation draws from a stream
// derived from one root seed.
struct SeedPlan {
  std::uint64_t root = 0;

  std::uint64_t init() const { return mix_seed(root, "init"); }
  std::uint64_t batch_order() const { return mix_seed(root, "batch"); }
  std::uint64_t drop_path() const { return mix_seed(root, "drop_path"); }
  std::uint64_t noise(std::uint64_t sample_index, std::uint64_t draw = 0) const {
    return mix_seed(mix_seed(mix_seed(root, "noise"), sample_index), draw);
  }
};

// Returns the root seed from SWINIFS_SEED when set, else the fallback.
inline std::uint64_t root_seed_from_env(std::uint64_t fallback) {
  if (const char* v = std::getenv(kSeedEnvVar); v && *v) {
    try {
      return std::stoull(v);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string(kSeedEnvVar) + " is not an unsigned integer: " + v);
    }
  }
  return fallback;
}

inline SeedPlan seed_everything(std::uint64_t seed) { return SeedPlan{seed}; }

}  // namespace swinifs
