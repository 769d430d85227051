#include "cmpbayes/posterior.hpp"

#include <cmath>

#include "cmpbayes/error.hpp"

namespace cmpbayes {

double log_posterior(const PriorSpec& spec, const SufficientStats& stats, const CmpParams& params,
                     const TruncationPolicy& policy) {
  const double log_lambda = std::log(params.lambda());
  const double nu = params.nu();
  const double n = static_cast<double>(stats.n);
  const double s1 = static_cast<double>(stats.s1);

  if (const auto* h = std::get_if<ConjugateHyper>(&spec)) {
    const double log_z = log_normalizer(params, policy);
    return (h->a() + s1 - 1.0) * log_lambda - nu * (h->b() + stats.s2) - (h->c() + n) * log_z;
  }
  if (std::holds_alternative<FlatPrior>(spec)) {
    const double log_z = stats.n > 0 ? log_normalizer(params, policy) : 0.0;
    return (s1 - 1.0) * log_lambda - nu * stats.s2 - n * log_z;
  }
  const MomentsWithLogZ mz = moments_with_log_z(params, policy);
  return jeffreys_log_density(mz.moments, params) + s1 * log_lambda - nu * stats.s2 - n * mz.log_z;
}

bool flat_posterior_propriety(const SufficientStats& stats) {
  if (stats.n <= 0 || stats.s1 <= 0 || !(stats.s2 > 0.0)) return false;
  return conjugate_propriety(ConjugateHyper{static_cast<double>(stats.s1), stats.s2, static_cast<double>(stats.n)});
}

std::optional<bool> posterior_propriety(const PriorSpec& spec, const SufficientStats& stats) {
  if (const auto* h = std::get_if<ConjugateHyper>(&spec)) {
    return conjugate_propriety(h->updated(stats));
  }
  if (std::holds_alternative<FlatPrior>(spec)) return flat_posterior_propriety(stats);
  return std::nullopt;
}

}  // namespace cmpbayes
