#include "polybandit/rng.hpp"

namespace polybandit {

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

Stream Stream::derive(std::uint64_t seed, StreamTag tag, std::uint64_t candidate,
                      std::uint64_t iteration) {
  std::uint64_t k = mix64(seed ^ 0x5851F42D4C957F2DULL);
  k = mix64(k ^ static_cast<std::uint64_t>(tag));
  k = mix64(k ^ (candidate * 0xD6E8FEB86659FD93ULL));
  k = mix64(k ^ (iteration * 0xA0761D6478BD642FULL));
  return Stream(k);
}

Stream Stream::child(std::uint64_t index) const {
  return Stream(mix64(key_ ^ mix64(index + 0x632BE59BD9B4E019ULL)));
}

Vec Stream::normal_vec(int d) {
  Vec v(d);
  for (int i = 0; i < d; ++i) v[i] = normal();
  return v;
}

Vec Stream::unit_sphere(int d) {
  for (;;) {
    Vec v = normal_vec(d);
    double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

Vec Stream::ball_gaussian(int d) {
  for (;;) {
    Vec v = normal_vec(d) / std::sqrt(static_cast<double>(d));
    if (v.norm() <= 1.0) return v;
  }
}

}  // namespace polybandit
