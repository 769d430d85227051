#pragma once

#include <cstdint>
#include <span>

namespace cmpbayes {

/// (n, S1 = sum x_i, S2 = sum ln(x_i!)): everything the CMP likelihood needs.
/// n = 0 is the explicit "no data" value used for prior-only targets.
struct SufficientStats {
  std::int64_t n = 0;
  std::int64_t s1 = 0;
  double s2 = 0.0;

  double xbar() const noexcept { return n > 0 ? static_cast<double>(s1) / static_cast<double>(n) : 0.0; }
  double mean_lnfact() const noexcept { return n > 0 ? s2 / static_cast<double>(n) : 0.0; }

  static SufficientStats none() noexcept { return {}; }

  friend bool operator==(const SufficientStats&, const SufficientStats&) = default;
};

/// Throws kEmptyData for an empty span and kInvalidParams for negative counts.
SufficientStats sufficient_stats(std::span<const std::int64_t> data);

}  // namespace cmpbayes
