#pragma once

#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "cmpbayes/cmp.hpp"
#include "cmpbayes/priors.hpp"
#include "cmpbayes/rng.hpp"
#include "cmpbayes/stats.hpp"

namespace cmpbayes {

enum class Adaptation {
  /// Proposal covariance estimated from warmup draws (full 2x2).
  kDense,
  /// Only the per-coordinate variances are estimated.
  kDiagonal,
};

struct McmcConfig {
  int chains = 4;
  int warmup = 2000;
  int keep = 2000;
  /// Post-warmup iterations per retained draw. Random-walk proposals are
  /// strongly autocorrelated on these targets; retaining every 10th step
  /// keeps R-hat stable at the default chain length.
  int thin = 10;
  double target_accept = 0.30;
  double init_jitter = 0.5;
  double nu_floor = 1e-4;
  Adaptation adaptation = Adaptation::kDense;
  /// Run chains on separate threads. Output does not depend on this.
  bool parallel = true;

  void validate() const;
};

enum class Parameter { kLambda, kNu };

std::string_view to_string(Parameter p);

struct ChainDraws {
  std::vector<double> lambda;
  std::vector<double> nu;
  /// Acceptance rate over all post-warmup iterations.
  double acceptance_rate = 0.0;
  /// Post-warmup proposals (thinned-out ones included) whose log target was not finite.
  int divergences = 0;
  int warmup_divergences = 0;
  /// Frozen global proposal scale after warmup.
  double step_scale = 0.0;

  std::span<const double> values(Parameter p) const { return p == Parameter::kLambda ? lambda : nu; }
};

struct Draws {
  std::vector<ChainDraws> chains;
  double nu_floor = 0.0;
  int thin = 1;

  std::size_t iterations() const { return chains.empty() ? 0 : chains.front().lambda.size(); }

  int total_divergences() const;
  /// Divergences over post-warmup proposals.
  double divergence_rate() const;
  /// More than 1% of post-warmup proposals diverged.
  bool divergence_flagged() const { return divergence_rate() > 0.01; }
  std::vector<double> pooled(Parameter p) const;
};

/// Adaptive random-walk Metropolis on (ln lambda, ln nu).
///
/// The target adds the log-Jacobian ln lambda + ln nu to the log posterior
/// and restricts nu >= config.nu_floor. Warmup runs Robbins-Monro adaptation
/// of the log proposal scale toward config.target_accept, re-estimating the
/// proposal covariance at the end of two warmup windows; everything is frozen
/// afterwards. Chain c uses stream seed.child(c), so output does not depend on
/// scheduling.
///
/// Throws kImproperPosterior when the posterior is decidably improper and
/// kAllDivergent when a chain cannot take a finite post-warmup step.
Draws run_chains(const PriorSpec& spec, const SufficientStats& stats, const McmcConfig& config,
                 SeedSpec seed, const TruncationPolicy& policy = {});

/// Split-chain potential scale reduction factor: each chain is cut in half
/// and R-hat = sqrt(((m-1)/m W + B) / W), where m is the half length, W the
/// mean within-half variance and B the variance of the half means.
/// Requires >= 2 chains of >= 100 draws. Throws kZeroVariance if W == 0.
double split_rhat(std::span<const std::vector<double>> chains);
double split_rhat(const Draws& draws, Parameter p);

/// Quantile of sorted data with linear interpolation between order
/// statistics: h = (N - 1) p, q = x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
double interpolated_quantile(std::span<const double> sorted, double p);

struct ParameterSummary {
  double median = 0.0;
  double cri_low = 0.0;
  double cri_high = 0.0;
  double rhat = 0.0;
};

struct PosteriorSummary {
  ParameterSummary lambda;
  ParameterSummary nu;
  std::size_t n_kept = 0;

  const ParameterSummary& operator[](Parameter p) const { return p == Parameter::kLambda ? lambda : nu; }
};

/// Pooled median and equal-tailed 95% interval plus split R-hat.
PosteriorSummary summarize(const Draws& draws);

/// CSV with header "chain,iter,lambda,nu".
void write_draws_csv(std::ostream& out, const Draws& draws);

}  // namespace cmpbayes
