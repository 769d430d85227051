#include "cmpbayes/stats.hpp"

#include <fmt/format.h>

#include "cmpbayes/cmp.hpp"
#include "cmpbayes/error.hpp"

namespace cmpbayes {

SufficientStats sufficient_stats(std::span<const std::int64_t> data) {
  if (data.empty()) throw Error(ErrorCode::kEmptyData, "dataset is empty");
  SufficientStats stats;
  for (std::int64_t x : data) {
    if (x < 0) throw Error(ErrorCode::kInvalidParams, fmt::format("counts must be nonnegative, got {}", x));
    ++stats.n;
    stats.s1 += x;
    stats.s2 += ln_factorial(x);
  }
  return stats;
}

}  // namespace cmpbayes
