#pragma once

// Counter-based random streams.
//
// Every draw site in the project owns a stream keyed by
// (master seed, suite, category, index, label). The output at position k of
// a stream is a pure function of (key, k), so adding a new draw site never
// shifts the values seen by existing ones. All distribution transforms are
// implemented here rather than taken from <random>, whose distributions are
// not bit-identical across standard libraries.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string_view>
#include <utility>

namespace agentmart {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_label(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

  static constexpr CounterRng derive(std::uint64_t master_seed,
                                     std::string_view suite,
                                     std::string_view category,
                                     std::uint64_t index,
                                     std::string_view label) noexcept {
    std::uint64_t k = mix64(master_seed ^ 0x6a09e667f3bcc909ULL);
    k = mix64(k ^ hash_label(suite));
    k = mix64(k ^ hash_label(category));
    k = mix64(k + 0x9e3779b97f4a7c15ULL * (index + 1));
    k = mix64(k ^ hash_label(label));
    return CounterRng(k);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t position() const noexcept { return counter_; }

  // Uniform on the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  // Uniform integer on the closed range [lo, hi], unbiased by rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>((*this)());
    const std::uint64_t limit = max() - max() % span;
    std::uint64_t x;
    do {
      x = (*this)();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
  }

  // Standard normal via Box-Muller; consumes two words per draw.
  double normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sigma) noexcept {
    return mean + sigma * normal();
  }

  double lognormal(double mu, double sigma) noexcept {
    return std::exp(normal(mu, sigma));
  }

  // Type I extreme value (Gumbel) with location 0, scale 1.
  double gumbel() noexcept { return -std::log(-std::log(uniform())); }

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace agentmart
