#ifndef TREECAST_RANDOM_HPP
#define TREECAST_RANDOM_HPP

#include <cstdint>
#include <initializer_list>

namespace treecast {

namespace detail {

// SplitMix64 finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

/// Combine a seed with any number of integer labels into a stream key.
constexpr std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> labels) {
  std::uint64_t h = detail::mix64(seed + detail::kGolden);
  for (std::uint64_t l : labels) h = detail::mix64(h ^ (detail::mix64(l + detail::kGolden) + (h << 6) + (h >> 2)));
  return h;
}

/// Counter-based uniform source: the i-th output is a pure function of
/// (key, i). Copying a source forks it.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  constexpr explicit CounterRng(std::uint64_t key) : key_(key) {}

  constexpr std::uint64_t next_u64() { return detail::mix64(key_ + (++counter_) * detail::kGolden); }

  /// Uniform on [0, 1) with 53 bits.
  constexpr double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  constexpr double uniform_pos() { return 1.0 - uniform(); }

  /// Uniform integer in [0, n), Lemire's multiply-shift (bias < n / 2^64).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }
  constexpr std::uint64_t operator()() { return next_u64(); }

  constexpr std::uint64_t key() const { return key_; }
  constexpr std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Stream of distribution draws. Draw number i uses its own sub-key
/// derive(key, i), so a draw's value depends only on (seed, labels, i) no
/// matter how many uniforms earlier draws consumed.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::initializer_list<std::uint64_t> labels = {})
      : key_(derive_key(seed, labels)) {}

  /// Uniform source for the next draw.
  CounterRng next_draw() { return CounterRng(detail::mix64(key_ ^ ((++draws_) * detail::kGolden))); }

  /// Plain uniform on [0, 1), consuming one draw index.
  double uniform() { return next_draw().uniform(); }
  std::uint64_t below(std::uint64_t n) { return next_draw().below(n); }

  std::uint64_t draws() const { return draws_; }

 private:
  std::uint64_t key_;
  std::uint64_t draws_ = 0;
};

}  // namespace treecast

#endif  // TREECAST_RANDOM_HPP
