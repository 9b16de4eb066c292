#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "polybandit/common.hpp"

namespace polybandit {

// Module tags used when deriving streams.
enum class StreamTag : std::uint64_t {
  Env = 1,
  Probe = 2,
  Init = 3,
  Spectral = 4,
  Tensor = 5,
  Noiseless = 6,
  Rl = 7,
  Baseline = 8,
  Harness = 9,
  Model = 10,
};

std::uint64_t mix64(std::uint64_t x);

// Counter-based generator: output i is mix64(key + i * golden).  Two streams
// with the same key produce identical sequences regardless of where they are
// created, which keeps parallel runs reproducible.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t key = 0) : key_(key) {}

  // Key from (seed, module, candidate, iteration).
  static Stream derive(std::uint64_t seed, StreamTag tag, std::uint64_t candidate = 0,
                       std::uint64_t iteration = 0);
  Stream child(std::uint64_t index) const;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type(0); }
  result_type operator()() { return mix64(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

  double normal() { return normal_(*this); }
  double uniform() { return uniform_(*this); }
  Vec normal_vec(int d);
  Vec unit_sphere(int d);
  // Gaussian N(0, I/d) conditioned on the unit ball.
  Vec ball_gaussian(int d);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> uniform_;
};

}  // namespace polybandit
