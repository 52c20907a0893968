#include "freenoise/rng.hpp"

#include <cmath>
#include <numbers>

namespace freenoise {

namespace {

constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer; bijective on u64.
uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {
  key_ = mix64(mix64(seed + kGolden) ^ (stream + kGolden));
}

uint64_t Rng::next_u64() {
  // splitmix64 evaluated at an arbitrary counter offset.
  return mix64(key_ + (++counter_) * kGolden);
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

float Rng::next_normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - next_double();  // (0, 1]: keeps log() finite
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = static_cast<float>(r * std::sin(theta));
  have_spare_ = true;
  return static_cast<float>(r * std::cos(theta));
}

Array Rng::normal(std::vector<int> shape) {
  Array out(std::move(shape));
  for (size_t i = 0; i < out.size(); ++i) out.data()[i] = next_normal();
  return out;
}

uint64_t Rng::bounded(uint64_t bound) {
  // Lemire reduction; bias below 2^-64 is irrelevant here and the result is
  // platform-independent, unlike std::uniform_int_distribution.
  return static_cast<uint64_t>(
      (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
}

std::vector<int> Rng::permutation(int n) {
  std::vector<int> p(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) p[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(bounded(static_cast<uint64_t>(i) + 1));
    std::swap(p[i], p[j]);
  }
  return p;
}

}  // namespace freenoise
