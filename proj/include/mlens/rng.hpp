#pragma once

// Deterministic randomness utilities. Everything stochastic in the library is
// seeded through derive_seed so results are reproducible across platforms and
// independent of evaluation order. std::*_distribution is avoided on purpose:
// its output is implementation-defined.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace mlens {

using Rng = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline void mix_into(std::uint64_t& state, std::uint64_t token) {
  state = splitmix64(state ^ token);
}

inline void mix_token(std::uint64_t& state, std::uint64_t v) { mix_into(state, v); }
inline void mix_token(std::uint64_t& state, std::int64_t v) {
  mix_into(state, static_cast<std::uint64_t>(v));
}
inline void mix_token(std::uint64_t& state, int v) {
  mix_into(state, static_cast<std::uint64_t>(static_cast<std::int64_t>(v)));
}
inline void mix_token(std::uint64_t& state, std::string_view s) { mix_into(state, fnv1a(s)); }
inline void mix_token(std::uint64_t& state, const char* s) { mix_into(state, fnv1a(s)); }

}  // namespace detail

// Stable seed derivation: mixes the base seed with a sequence of tokens
// (integers and/or strings). Same inputs -> same seed, always.
template <class... Tokens>
std::uint64_t derive_seed(std::uint64_t base, Tokens&&... tokens) {
  std::uint64_t state = detail::splitmix64(base);
  (detail::mix_token(state, std::forward<Tokens>(tokens)), ...);
  return detail::splitmix64(state);
}

// Uniform integer in [0, bound) by rejection; bound must be > 0.
inline std::uint64_t rng_below(Rng& g, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % bound);
  std::uint64_t r;
  do {
    r = g();
  } while (r >= limit);
  return r % bound;
}

// Uniform double in [0, 1) with 53 random bits.
inline double rng_double(Rng& g) { return std::ldexp(static_cast<double>(g() >> 11), -53); }

// Fisher-Yates shuffle (descending index form).
template <class T>
void rng_shuffle(Rng& g, std::vector<T>& v) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng_below(g, i));
    std::swap(v[i - 1], v[j]);
  }
}

// n indices sampled uniformly with replacement from [0, n) — one bootstrap draw.
inline std::vector<int> bootstrap_indices(Rng& g, int n) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (auto& i : idx) i = static_cast<int>(rng_below(g, static_cast<std::uint64_t>(n)));
  return idx;
}

// Identity permutation of size n, then shuffled.
inline std::vector<int> random_permutation(Rng& g, int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  rng_shuffle(g, p);
  return p;
}

}  // namespace mlens
