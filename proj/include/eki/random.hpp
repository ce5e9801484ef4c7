#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace eki {

/// Stream purposes; part of the stream id so draws for different roles never
/// overlap even under the same seed.
namespace stream_purpose {
inline constexpr std::uint32_t kGeneric = 0;
inline constexpr std::uint32_t kTruth = 1;
inline constexpr std::uint32_t kTruthNoise = 2;
inline constexpr std::uint32_t kEnsembleInit = 3;
inline constexpr std::uint32_t kPerturbation = 4;
}  // namespace stream_purpose

/// Keyed, counter-based random stream. A stream is fully identified by
/// (seed, purpose, member, iteration); the same id always reproduces the same
/// draw sequence, and distinct ids give statistically independent sequences.
/// Keying by (member, iteration) makes ensemble runs order-independent.
struct RandomStream {
  std::uint64_t seed = 0;
  std::uint32_t purpose = stream_purpose::kGeneric;
  std::uint32_t member = 0;
  std::uint32_t iteration = 0;

  RandomStream with_purpose(std::uint32_t p) const {
    RandomStream s = *this;
    s.purpose = p;
    return s;
  }
  RandomStream with_member(std::uint32_t m) const {
    RandomStream s = *this;
    s.member = m;
    return s;
  }
  RandomStream with_iteration(std::uint32_t n) const {
    RandomStream s = *this;
    s.iteration = n;
    return s;
  }
};

/// Derives an independent child seed, used to give each replication of an
/// experiment its own stream family.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Sequential standard-normal source over one stream (Box-Muller pairs on the
/// keyed counter generator).
class GaussianSource {
 public:
  explicit GaussianSource(const RandomStream& stream);
  double next();

 private:
  std::uint64_t next_bits();
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// n i.i.d. standard normal draws, deterministic given the stream id.
std::vector<double> gaussian_draws(const RandomStream& stream, std::size_t n);
void gaussian_draws(const RandomStream& stream, std::span<double> out);

}  // namespace eki
