#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace odml {

// Deterministic random source with named substreams. mt19937_64 has a fully
// specified output sequence; the distribution helpers below replace the
// implementation-defined std::*_distribution adaptors, so every stream is
// reproducible across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent stream derived from (seed, name). All randomness in this
  // project flows from one 64-bit seed through named substreams
  // ("sampling", "support", "init", "baseline", ...).
  Rng substream(std::string_view name) const;

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via the Marsaglia polar method.
  double gaussian();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  // k distinct indices out of [0, n), in draw order. Requires k <= n.
  std::vector<std::size_t> choose(std::size_t n, std::size_t k);

 private:
  std::uint64_t seed_ = 0;
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// FNV-1a over the bytes of a name; used to derive substream seeds.
std::uint64_t hash_name(std::string_view name);

// SplitMix64 scramble, used to whiten substream seeds.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace odml
