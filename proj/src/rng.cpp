#include "tierfl/rng.hpp"

#include <stdexcept>

namespace tierfl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                          std::uint64_t index) {
  std::uint64_t s = splitmix64(master);
  s = splitmix64(s ^ fnv1a64(stream));
  return splitmix64(s ^ splitmix64(index + 0x51ed2701ULL));
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index needs n >= 1");
  // Reject the lowest 2^64 mod n values so the modulo is unbiased.
  const std::uint64_t range = n;
  const std::uint64_t threshold = (0 - range) % range;
  std::uint64_t x = rng();
  while (x < threshold) x = rng();
  return static_cast<std::size_t>(x % range);
}

}  // namespace tierfl
