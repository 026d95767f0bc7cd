#include "fedstale/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fedstale {
namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_key(std::uint64_t seed,
                         std::initializer_list<std::uint64_t> path) {
  std::uint64_t key = mix64(seed + kGamma);
  for (std::uint64_t part : path) {
    key = mix64(key ^ mix64(part + kGamma));
  }
  return key;
}

CounterRng::CounterRng(std::uint64_t seed, StreamTag tag,
                       std::initializer_list<std::uint64_t> path)
    : key_(derive_key(derive_key(seed, {static_cast<std::uint64_t>(tag)}), path)) {}

CounterRng::result_type CounterRng::operator()() {
  ++counter_;
  return mix64(key_ + counter_ * kGamma);
}

double CounterRng::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double CounterRng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = radius * std::sin(angle);
  has_cached_normal_ = true;
  return radius * std::cos(angle);
}

std::uint64_t CounterRng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("CounterRng::below: n must be positive");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t x = (*this)();
  while (x >= limit) x = (*this)();
  return x % n;
}

}  // namespace fedstale
