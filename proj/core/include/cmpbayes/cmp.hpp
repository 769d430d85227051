#pragma once

#include <cstdint>
#include <vector>

#include "cmpbayes/stats.hpp"

namespace cmpbayes {

/// Location of a Conway-Maxwell-Poisson distribution: generalized rate
/// lambda > 0 and dispersion nu >= 0. nu = 0 is only a distribution when
/// lambda < 1 (geometric case); construction rejects anything else.
class CmpParams {
 public:
  CmpParams(double lambda, double nu);

  double lambda() const noexcept { return lambda_; }
  double nu() const noexcept { return nu_; }

  friend bool operator==(const CmpParams&, const CmpParams&) = default;

 private:
  double lambda_;
  double nu_;
};

/// Controls truncation of the normalizing series. At least base_terms terms
/// are summed; the series is extended until a geometric bound on the
/// remaining tail falls below tail_tol relative to the partial sum.
struct TruncationPolicy {
  int base_terms = 101;
  double tail_tol = 1e-10;
  int max_terms = 10000;

  void validate() const;
};

/// Log-domain terms t_j = j ln(lambda) - nu ln(j!) for j < K together with
/// ln Z over the same grid. Shared by the normalizer, the moments and the
/// inverse-CDF sampler so all three see the same K.
struct TermGrid {
  std::vector<double> log_terms;
  double log_z = 0.0;

  std::size_t size() const noexcept { return log_terms.size(); }
};

struct CmpMoments {
  double e_x = 0.0;
  double e_x2 = 0.0;
  double e_lnfact = 0.0;
  double e_lnfact2 = 0.0;
  double e_x_lnfact = 0.0;
  // Central moments from a second pass over the grid; numerically preferable
  // to differencing the raw moments above.
  double var_x = 0.0;
  double var_lnfact = 0.0;
  double cov_x_lnfact = 0.0;
};

/// First and second partial derivatives of ln Z(lambda, nu).
struct LogZDerivatives {
  double d_dlambda = 0.0;
  double d_dnu = 0.0;
  double d2_dlambda2 = 0.0;
  double d2_dnu2 = 0.0;
  double d2_dlambda_dnu = 0.0;
};

/// ln(j!) via a precomputed lgamma table, falling back to std::lgamma past it.
double ln_factorial(std::int64_t j);

double log_normalizer(const CmpParams& params, const TruncationPolicy& policy = {});

/// Number of series terms log_normalizer would use for these inputs.
int truncation_length(const CmpParams& params, const TruncationPolicy& policy = {});

TermGrid normalizer_terms(const CmpParams& params, const TruncationPolicy& policy = {});

double log_pmf(std::int64_t x, const CmpParams& params, const TruncationPolicy& policy = {});

/// S1 ln(lambda) - nu S2 - n ln Z. Stats with n = 0 contribute nothing.
double log_likelihood(const SufficientStats& stats, const CmpParams& params,
                      const TruncationPolicy& policy = {});

CmpMoments moments(const CmpParams& params, const TruncationPolicy& policy = {});

/// Moments plus the ln Z they were computed against.
struct MomentsWithLogZ {
  CmpMoments moments;
  double log_z = 0.0;
};
MomentsWithLogZ moments_with_log_z(const CmpParams& params, const TruncationPolicy& policy = {});

LogZDerivatives logz_derivatives(const CmpMoments& m, double lambda);
LogZDerivatives logz_hessian(const CmpParams& params, const TruncationPolicy& policy = {});

}  // namespace cmpbayes
