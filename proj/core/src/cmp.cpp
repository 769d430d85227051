#include "cmpbayes/cmp.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <fmt/format.h>

#include "cmpbayes/error.hpp"

namespace cmpbayes {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidParams: return "invalid-params";
    case ErrorCode::kTruncationNotConverged: return "truncation-not-converged";
    case ErrorCode::kInvalidHyper: return "invalid-hyper";
    case ErrorCode::kNonpositiveDeterminant: return "nonpositive-determinant";
    case ErrorCode::kEmptyData: return "empty-data";
    case ErrorCode::kImproperPosterior: return "improper-posterior";
    case ErrorCode::kAllDivergent: return "all-divergent";
    case ErrorCode::kZeroVariance: return "zero-variance";
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kParseError: return "parse-error";
    case ErrorCode::kUnknownPrior: return "unknown-prior";
    case ErrorCode::kIo: return "io-error";
  }
  return "unknown";
}

CmpParams::CmpParams(double lambda, double nu) : lambda_(lambda), nu_(nu) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::kInvalidParams, fmt::format("lambda must be positive and finite, got {}", lambda));
  }
  if (!(nu >= 0.0) || !std::isfinite(nu)) {
    throw Error(ErrorCode::kInvalidParams, fmt::format("nu must be nonnegative and finite, got {}", nu));
  }
  if (nu == 0.0 && lambda >= 1.0) {
    throw Error(ErrorCode::kInvalidParams,
                fmt::format("nu = 0 requires lambda < 1 (geometric case), got lambda = {}", lambda));
  }
}

void TruncationPolicy::validate() const {
  if (base_terms < 2) {
    throw Error(ErrorCode::kInvalidConfig, fmt::format("base_terms must be >= 2, got {}", base_terms));
  }
  if (max_terms < base_terms) {
    throw Error(ErrorCode::kInvalidConfig,
                fmt::format("max_terms ({}) must be >= base_terms ({})", max_terms, base_terms));
  }
  if (!(tail_tol > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, fmt::format("tail_tol must be positive, got {}", tail_tol));
  }
}

namespace {

constexpr std::int64_t kFactorialTableSize = 10001;

const std::vector<double>& factorial_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(kFactorialTableSize);
    for (std::int64_t j = 2; j < kFactorialTableSize; ++j) {
      t[j] = std::lgamma(static_cast<double>(j) + 1.0);
    }
    return t;
  }();
  return table;
}

// Online log-sum-exp: sum = exp(max) * scaled.
struct LogSumExp {
  double max = -std::numeric_limits<double>::infinity();
  double scaled = 0.0;

  void add(double t) {
    if (t > max) {
      scaled = scaled * std::exp(max - t) + 1.0;
      max = t;
    } else {
      scaled += std::exp(t - max);
    }
  }
  double value() const { return max + std::log(scaled); }
};

struct Truncation {
  int terms = 0;
  double log_z = 0.0;
};

[[noreturn]] void throw_not_converged(const CmpParams& p, const TruncationPolicy& policy) {
  throw Error(ErrorCode::kTruncationNotConverged,
              fmt::format("normalizing series for lambda = {}, nu = {} did not converge within {} terms",
                          p.lambda(), p.nu(), policy.max_terms));
}

// Sums terms until at least base_terms are in and the remaining tail, bounded
// by the geometric series of the (decreasing) term ratio
// lambda / (j + 1)^nu, is below tail_tol relative to the partial sum.
template <class OnTerm>
Truncation truncate_series(const CmpParams& p, const TruncationPolicy& policy, OnTerm&& on_term) {
  policy.validate();
  const double log_lambda = std::log(p.lambda());
  const double nu = p.nu();

  // Terms increase up to j ~ lambda^(1/nu); a peak beyond the cap can never converge.
  if (nu > 0.0 && log_lambda / nu > std::log(static_cast<double>(policy.max_terms))) {
    throw_not_converged(p, policy);
  }

  const double log_tol = std::log(policy.tail_tol);
  LogSumExp sum;
  for (int j = 0; j < policy.max_terms; ++j) {
    const double t = j * log_lambda - nu * ln_factorial(j);
    on_term(t);
    sum.add(t);
    const int count = j + 1;
    if (count < policy.base_terms) continue;

    const double log_ratio = log_lambda - nu * std::log(static_cast<double>(j) + 1.0);
    if (log_ratio >= 0.0) continue;
    // log of t_j * r / (1 - r), relative to the partial sum.
    const double log_tail = t + log_ratio - std::log1p(-std::exp(log_ratio)) - sum.value();
    if (log_tail < log_tol) return {count, sum.value()};
  }
  throw_not_converged(p, policy);
}

double log_pmf_numerator(std::int64_t x, const CmpParams& params) {
  return static_cast<double>(x) * std::log(params.lambda()) - params.nu() * ln_factorial(x);
}

}  // namespace

double ln_factorial(std::int64_t j) {
  if (j < kFactorialTableSize) return factorial_table()[static_cast<std::size_t>(j)];
  return std::lgamma(static_cast<double>(j) + 1.0);
}

double log_normalizer(const CmpParams& params, const TruncationPolicy& policy) {
  return truncate_series(params, policy, [](double) {}).log_z;
}

int truncation_length(const CmpParams& params, const TruncationPolicy& policy) {
  return truncate_series(params, policy, [](double) {}).terms;
}

TermGrid normalizer_terms(const CmpParams& params, const TruncationPolicy& policy) {
  TermGrid grid;
  grid.log_terms.reserve(static_cast<std::size_t>(policy.base_terms));
  grid.log_z = truncate_series(params, policy, [&](double t) { grid.log_terms.push_back(t); }).log_z;
  return grid;
}

double log_pmf(std::int64_t x, const CmpParams& params, const TruncationPolicy& policy) {
  if (x < 0) throw Error(ErrorCode::kInvalidParams, fmt::format("x must be nonnegative, got {}", x));
  return log_pmf_numerator(x, params) - log_normalizer(params, policy);
}

double log_likelihood(const SufficientStats& stats, const CmpParams& params, const TruncationPolicy& policy) {
  if (stats.n == 0) return 0.0;
  return static_cast<double>(stats.s1) * std::log(params.lambda()) - params.nu() * stats.s2 -
         static_cast<double>(stats.n) * log_normalizer(params, policy);
}

MomentsWithLogZ moments_with_log_z(const CmpParams& params, const TruncationPolicy& policy) {
  const TermGrid grid = normalizer_terms(params, policy);
  const std::size_t k = grid.size();

  std::vector<double> prob(k);
  CmpMoments m;
  for (std::size_t j = 0; j < k; ++j) {
    const double p = std::exp(grid.log_terms[j] - grid.log_z);
    const double x = static_cast<double>(j);
    const double l = ln_factorial(static_cast<std::int64_t>(j));
    prob[j] = p;
    m.e_x += p * x;
    m.e_x2 += p * x * x;
    m.e_lnfact += p * l;
    m.e_lnfact2 += p * l * l;
    m.e_x_lnfact += p * x * l;
  }
  for (std::size_t j = 0; j < k; ++j) {
    const double dx = static_cast<double>(j) - m.e_x;
    const double dl = ln_factorial(static_cast<std::int64_t>(j)) - m.e_lnfact;
    m.var_x += prob[j] * dx * dx;
    m.var_lnfact += prob[j] * dl * dl;
    m.cov_x_lnfact += prob[j] * dx * dl;
  }
  return {m, grid.log_z};
}

CmpMoments moments(const CmpParams& params, const TruncationPolicy& policy) {
  return moments_with_log_z(params, policy).moments;
}

LogZDerivatives logz_derivatives(const CmpMoments& m, double lambda) {
  LogZDerivatives d;
  d.d_dlambda = m.e_x / lambda;
  d.d_dnu = -m.e_lnfact;
  d.d2_dlambda2 = (m.var_x - m.e_x) / (lambda * lambda);
  d.d2_dnu2 = m.var_lnfact;
  d.d2_dlambda_dnu = -m.cov_x_lnfact / lambda;
  return d;
}

LogZDerivatives logz_hessian(const CmpParams& params, const TruncationPolicy& policy) {
  return logz_derivatives(moments(params, policy), params.lambda());
}

}  // namespace cmpbayes
