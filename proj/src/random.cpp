#include "eki/random.hpp"

#include <cmath>

namespace eki {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t stream_key(const RandomStream& s) {
  std::uint64_t k = mix64(s.seed + kGolden);
  k = mix64(k ^ (static_cast<std::uint64_t>(s.purpose) + kGolden));
  k = mix64(k ^ ((static_cast<std::uint64_t>(s.member) << 32 |
                  static_cast<std::uint64_t>(s.iteration)) +
                 kGolden));
  return k;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master + kGolden) ^ (index + 0xD1B54A32D192ED03ULL));
}

GaussianSource::GaussianSource(const RandomStream& stream) : state_(stream_key(stream)) {}

std::uint64_t GaussianSource::next_bits() {
  state_ += kGolden;
  return mix64(state_);
}

double GaussianSource::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0,1], u2 in [0,1)
  const double u1 = (static_cast<double>(next_bits() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(next_bits() >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 6.283185307179586476925286766559 * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

std::vector<double> gaussian_draws(const RandomStream& stream, std::size_t n) {
  std::vector<double> out(n);
  gaussian_draws(stream, out);
  return out;
}

void gaussian_draws(const RandomStream& stream, std::span<double> out) {
  GaussianSource src(stream);
  for (double& v : out) v = src.next();
}

}  // namespace eki
