#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "cmpbayes/cmp.hpp"

namespace cmpbayes {

/// Identifies one reproducible random stream.
///
/// A stream is std::mt19937_64 seeded through std::seed_seq with the four
/// 32-bit halves of (master_seed, stream_id). Both the engine and seed_seq are
/// fully specified by the C++ standard, so streams are identical across
/// platforms. Uniforms and normals are derived from raw 64-bit outputs here
/// rather than through <random> distributions, whose algorithms are not
/// specified.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;

  /// Sub-stream for a task with the given index (chain, replicate, ...).
  /// Mixes the index into stream_id with the SplitMix64 finalizer.
  SeedSpec child(std::uint64_t index) const noexcept;

  friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

/// FNV-1a, used to turn names (settings, priors) into stream indices.
std::uint64_t stable_hash(std::string_view text) noexcept;

class RandomStream {
 public:
  explicit RandomStream(SeedSpec seed);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform();

  /// Standard normal via the Box-Muller transform (one variate per call).
  double normal();

 private:
  std::mt19937_64 engine_;
};

/// Inverse-CDF sampler over the truncated CMP pmf. The cumulative table uses
/// the same truncation length as log_normalizer, so every draw lies in
/// [0, K-1].
class CmpSampler {
 public:
  CmpSampler(const CmpParams& params, const TruncationPolicy& policy = {});

  std::int64_t operator()(RandomStream& stream) const;

  std::size_t support_size() const noexcept { return cdf_.size(); }

 private:
  std::vector<double> cdf_;
};

std::vector<std::int64_t> sample_cmp(const CmpParams& params, std::size_t count, SeedSpec seed,
                                     const TruncationPolicy& policy = {});

}  // namespace cmpbayes
