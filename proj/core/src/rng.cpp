#include "cmpbayes/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cmpbayes {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::mt19937_64 make_engine(SeedSpec seed) {
  std::seed_seq seq{
      static_cast<std::uint32_t>(seed.master_seed),
      static_cast<std::uint32_t>(seed.master_seed >> 32),
      static_cast<std::uint32_t>(seed.stream_id),
      static_cast<std::uint32_t>(seed.stream_id >> 32),
  };
  return std::mt19937_64(seq);
}

}  // namespace

SeedSpec SeedSpec::child(std::uint64_t index) const noexcept {
  return {master_seed, splitmix64(splitmix64(stream_id) ^ index)};
}

std::uint64_t stable_hash(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RandomStream::RandomStream(SeedSpec seed) : engine_(make_engine(seed)) {}

double RandomStream::uniform() {
  // Midpoint of one of 2^53 equal cells, so never exactly 0 or 1.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

CmpSampler::CmpSampler(const CmpParams& params, const TruncationPolicy& policy) {
  const TermGrid grid = normalizer_terms(params, policy);
  cdf_.resize(grid.size());
  double running = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    running += std::exp(grid.log_terms[j] - grid.log_z);
    cdf_[j] = running;
  }
  // Rounding can leave the total a hair under 1; the last cell absorbs it.
  cdf_.back() = 1.0;
}

std::int64_t CmpSampler::operator()(RandomStream& stream) const {
  const double u = stream.uniform();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return static_cast<std::int64_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(), std::ssize(cdf_) - 1));
}

std::vector<std::int64_t> sample_cmp(const CmpParams& params, std::size_t count, SeedSpec seed,
                                     const TruncationPolicy& policy) {
  const CmpSampler sampler(params, policy);
  RandomStream stream(seed);
  std::vector<std::int64_t> out(count);
  for (auto& x : out) x = sampler(stream);
  return out;
}

}  // namespace cmpbayes
