#pragma once

#include <optional>

#include "cmpbayes/cmp.hpp"
#include "cmpbayes/priors.hpp"
#include "cmpbayes/stats.hpp"

namespace cmpbayes {

/// log prior + log likelihood, up to an additive constant. ln Z is evaluated
/// once per call.
double log_posterior(const PriorSpec& spec, const SufficientStats& stats, const CmpParams& params,
                     const TruncationPolicy& policy = {});

/// The flat-prior posterior is the conjugate kernel with (a, b, c) = (S1, S2, n);
/// it is proper iff S1, S2, n > 0 and that triple satisfies the conjugate
/// propriety inequality.
bool flat_posterior_propriety(const SufficientStats& stats);

/// Posterior propriety where it is decidable: conjugate (via the updated
/// hyperparameters) and flat. Jeffreys returns nullopt.
std::optional<bool> posterior_propriety(const PriorSpec& spec, const SufficientStats& stats);

}  // namespace cmpbayes
