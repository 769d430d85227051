#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "cmpbayes/cmp.hpp"
#include "cmpbayes/error.hpp"
#include "support/oracles.hpp"

namespace cmpbayes {
namespace {

void expect_error(ErrorCode code, auto&& fn) {
  try {
    fn();
    FAIL() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TEST(CmpParams, RejectsInvalidDomain) {
  expect_error(ErrorCode::kInvalidParams, [] { CmpParams(0.0, 1.0); });
  expect_error(ErrorCode::kInvalidParams, [] { CmpParams(-1.0, 1.0); });
  expect_error(ErrorCode::kInvalidParams, [] { CmpParams(2.0, -0.1); });
  expect_error(ErrorCode::kInvalidParams, [] { CmpParams(1.0, 0.0); });
  expect_error(ErrorCode::kInvalidParams, [] { CmpParams(std::nan(""), 1.0); });
  EXPECT_NO_THROW(CmpParams(0.99, 0.0));
}

TEST(TruncationPolicy, Validates) {
  EXPECT_NO_THROW(TruncationPolicy{}.validate());
  expect_error(ErrorCode::kInvalidConfig, [] { TruncationPolicy{1, 1e-10, 100}.validate(); });
  expect_error(ErrorCode::kInvalidConfig, [] { TruncationPolicy{200, 1e-10, 100}.validate(); });
  expect_error(ErrorCode::kInvalidConfig, [] { TruncationPolicy{101, 0.0, 10000}.validate(); });
}

TEST(LnFactorial, MatchesLgammaInsideAndBeyondTable) {
  EXPECT_EQ(ln_factorial(0), 0.0);
  EXPECT_EQ(ln_factorial(1), 0.0);
  EXPECT_NEAR(ln_factorial(5), std::log(120.0), 1e-13);
  EXPECT_NEAR(ln_factorial(20000), std::lgamma(20001.0), 1e-9);
}

TEST(LogNormalizer, ClosedForms) {
  EXPECT_NEAR(log_normalizer(CmpParams(1.0, 1.0)), 1.0, 1e-12);
  EXPECT_NEAR(log_normalizer(CmpParams(0.5, 0.0)), std::numbers::ln2, 1e-12);
  EXPECT_NEAR(log_normalizer(CmpParams(2.0, 1e8)), std::log(3.0), 1e-9);
}

TEST(LogNormalizer, ExtendedPrecisionSeries) {
  // 500-term long double series.
  EXPECT_NEAR(static_cast<double>(oracle::log_z(3.0, 0.5)), 5.8470568195952737, 1e-12);
  EXPECT_NEAR(log_normalizer(CmpParams(3.0, 0.5)), 5.8470568195952737, 1e-10);
  EXPECT_NEAR(log_normalizer(CmpParams(3.0, 2.0)), 1.9683698226598291, 1e-10);
  for (const auto& g : oracle::study_grid()) {
    EXPECT_NEAR(log_normalizer(CmpParams(g.lambda, g.nu)), static_cast<double>(oracle::log_z(g.lambda, g.nu)), 1e-10)
        << g.lambda << "," << g.nu;
  }
}

TEST(LogNormalizer, ExtendsPastBaseTermsWhenTailIsHeavy) {
  const CmpParams p(0.99, 0.0);
  EXPECT_GT(truncation_length(p), 101);
  EXPECT_NEAR(log_normalizer(p), -std::log(0.01), 1e-8);
  EXPECT_GT(truncation_length(CmpParams(60.0, 0.5)), 3600);
  EXPECT_NEAR(log_normalizer(CmpParams(50.0, 1.0)), 50.0, 1e-9);
}

TEST(LogNormalizer, ReportsNonConvergence) {
  expect_error(ErrorCode::kTruncationNotConverged, [] { log_normalizer(CmpParams(0.9999999, 0.0)); });
  expect_error(ErrorCode::kTruncationNotConverged, [] { log_normalizer(CmpParams(1e6, 1.0)); });
}

TEST(LogNormalizer, TruncationPolicyInsensitiveOnStudyGrid) {
  const TruncationPolicy wide{500, 1e-10, 10000};
  for (const auto& g : oracle::study_grid()) {
    const CmpParams p(g.lambda, g.nu);
    EXPECT_LT(std::abs(log_normalizer(p) - log_normalizer(p, wide)), 1e-8);
  }
}

TEST(LogNormalizer, MonotoneInBothParameters) {
  for (double nu : {0.0, 0.3, 1.0, 2.5}) {
    double prev = -INFINITY;
    for (double lambda : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const double z = log_normalizer(CmpParams(lambda, nu));
      EXPECT_GT(z, prev);
      prev = z;
    }
  }
  for (double lambda : {0.5, 3.0, 4.0}) {
    double prev = INFINITY;
    for (double nu : {lambda < 1 ? 0.0 : 0.25, 0.5, 1.0, 2.0, 5.0}) {
      const double z = log_normalizer(CmpParams(lambda, nu));
      EXPECT_LT(z, prev);
      prev = z;
    }
  }
}

TEST(LogPmf, Examples) {
  EXPECT_NEAR(log_pmf(0, CmpParams(3.0, 0.5)), -log_normalizer(CmpParams(3.0, 0.5)), 1e-14);
  EXPECT_NEAR(log_pmf(3, CmpParams(4.0, 1.0)), 3 * std::log(4.0) - 4 - std::log(6.0), 1e-12);
  EXPECT_NEAR(log_pmf(2, CmpParams(0.5, 0.0)), std::log(0.125), 1e-12);
}

TEST(LogPmf, PoissonSpecialCase) {
  for (double lambda : {0.5, 3.0, 4.0, 10.0}) {
    for (int x = 0; x <= 50; ++x) {
      EXPECT_NEAR(log_pmf(x, CmpParams(lambda, 1.0)), oracle::poisson_log_pmf(x, lambda), 1e-10);
    }
  }
}

TEST(LogPmf, GeometricSpecialCase) {
  for (double lambda : {0.1, 0.5, 0.9}) {
    for (int x = 0; x <= 50; ++x) {
      EXPECT_NEAR(log_pmf(x, CmpParams(lambda, 0.0)), oracle::geometric_log_pmf(x, lambda), 1e-10);
    }
  }
}

TEST(LogPmf, SumsToOneOverTruncationGrid) {
  for (const auto& g : oracle::study_grid()) {
    const CmpParams p(g.lambda, g.nu);
    const int k = truncation_length(p);
    double total = 0.0;
    for (int x = 0; x < k; ++x) total += std::exp(log_pmf(x, p));
    EXPECT_NEAR(total, 1.0, 1e-8);
  }
}

TEST(LogLikelihood, Examples) {
  const CmpParams p(3.0, 0.5);
  EXPECT_NEAR(log_likelihood({1, 0, 0.0}, p), log_pmf(0, p), 1e-14);
  EXPECT_NEAR(log_likelihood({2, 2, std::numbers::ln2}, CmpParams(1.0, 1.0)), -std::numbers::ln2 - 2.0, 1e-12);
  EXPECT_EQ(log_likelihood(SufficientStats::none(), p), 0.0);

  const std::vector<std::int64_t> data{3, 1, 4, 1, 5};
  double per_point = 0.0;
  for (auto x : data) per_point += log_pmf(x, p);
  const double ll = log_likelihood(sufficient_stats(data), p);
  EXPECT_NEAR(ll, per_point, 1e-11);
  EXPECT_NEAR(ll, -18.733364577801856, 1e-10);
}

TEST(Moments, PoissonAndGeometric) {
  const auto poisson = moments(CmpParams(4.0, 1.0));
  EXPECT_NEAR(poisson.e_x, 4.0, 1e-8);
  EXPECT_NEAR(poisson.e_x2 - poisson.e_x * poisson.e_x, 4.0, 1e-8);
  EXPECT_NEAR(poisson.var_x, 4.0, 1e-8);
  EXPECT_NEAR(moments(CmpParams(0.5, 0.0)).e_x, 1.0, 1e-8);
}

TEST(Moments, MatchExtendedPrecisionSums) {
  struct Frozen {
    double lambda, nu, e_x, var_x, e_l, var_l, cov;
  };
  // 500-term sums at 40 significant digits, rounded.
  const Frozen cases[] = {
      {3.0, 0.5, 9.5209127661960817, 17.938042336328422, 14.905040038526626, 97.83332315880524, 41.546531722720564},
      {4.0, 1.0, 4.0, 4.0, 3.6318501443605263, 9.6226290088689606, 6.0774182487291835},
      {3.0, 2.0, 1.4535485249622122, 0.88719668558017718, 0.48067272097572346, 0.5181539524622091,
       0.61480347269169132},
  };
  for (const auto& f : cases) {
    const auto m = moments(CmpParams(f.lambda, f.nu));
    const auto o = oracle::moments(f.lambda, f.nu);
    EXPECT_NEAR(m.e_x, f.e_x, 1e-9 * f.e_x);
    EXPECT_NEAR(m.var_x, f.var_x, 1e-9 * f.var_x);
    EXPECT_NEAR(m.e_lnfact, f.e_l, 1e-9 * f.e_l);
    EXPECT_NEAR(m.var_lnfact, f.var_l, 1e-9 * f.var_l);
    EXPECT_NEAR(m.cov_x_lnfact, f.cov, 1e-9 * f.cov);
    EXPECT_NEAR(m.var_x, static_cast<double>(o.var_x), 1e-9 * f.var_x);
    EXPECT_NEAR(m.cov_x_lnfact, static_cast<double>(o.cov), 1e-9 * f.cov);
  }
}

TEST(Moments, DispersionDirection) {
  const auto over = moments(CmpParams(3.0, 0.5));
  EXPECT_GT(over.var_x, over.e_x);
  const auto under = moments(CmpParams(3.0, 2.0));
  EXPECT_LT(under.var_x, under.e_x);
}

TEST(Moments, VariancesNonnegative) {
  for (double lambda : {0.1, 0.5, 3.0, 20.0}) {
    for (double nu : {0.5, 1.0, 3.0, 40.0}) {
      const auto m = moments(CmpParams(lambda, nu));
      EXPECT_GE(m.e_x2 - m.e_x * m.e_x, -1e-9);
      EXPECT_GE(m.e_lnfact2 - m.e_lnfact * m.e_lnfact, -1e-9);
      EXPECT_GE(m.var_x, 0.0);
      EXPECT_GE(m.var_lnfact, 0.0);
    }
  }
}

TEST(LogzHessian, PoissonIdentity) {
  const auto d = logz_hessian(CmpParams(4.0, 1.0));
  EXPECT_NEAR(d.d_dlambda, 1.0, 1e-10);
  EXPECT_NEAR(d.d2_dlambda2, 0.0, 1e-9);
  EXPECT_GE(logz_hessian(CmpParams(0.5, 0.0)).d2_dnu2, 0.0);
}

TEST(LogzHessian, MatchesFiniteDifferencesOnStudyGrid) {
  auto f = [](double l, double n) { return log_normalizer(CmpParams(l, n)); };
  for (const auto& g : oracle::study_grid()) {
    const auto d = logz_hessian(CmpParams(g.lambda, g.nu));
    const auto fd = oracle::central_differences(f, g.lambda, g.nu);
    EXPECT_LT(oracle::relative_error(d.d_dlambda, fd.d_l), 1e-4);
    EXPECT_LT(oracle::relative_error(d.d_dnu, fd.d_n), 1e-4);
    if (g.nu == 1.0) {
      // Poisson: the exact value is zero.
      EXPECT_NEAR(d.d2_dlambda2, 0.0, 1e-10);
      EXPECT_NEAR(fd.d_ll, 0.0, 1e-5);
    } else {
      EXPECT_LT(oracle::relative_error(d.d2_dlambda2, fd.d_ll), 1e-4) << g.lambda << "," << g.nu;
    }
    EXPECT_LT(oracle::relative_error(d.d2_dnu2, fd.d_nn), 1e-4);
    EXPECT_LT(oracle::relative_error(d.d2_dlambda_dnu, fd.d_ln), 1e-4);
  }
}

TEST(LogzHessian, AbsoluteStepExample) {
  // Step 1e-5 in both coordinates at (3, 0.5).
  const double h = 1e-5;
  auto f = [](double l, double n) { return log_normalizer(CmpParams(l, n)); };
  const auto d = logz_hessian(CmpParams(3.0, 0.5));
  EXPECT_LT(oracle::relative_error(d.d_dlambda, (f(3 + h, 0.5) - f(3 - h, 0.5)) / (2 * h)), 1e-4);
  EXPECT_LT(oracle::relative_error(d.d_dnu, (f(3, 0.5 + h) - f(3, 0.5 - h)) / (2 * h)), 1e-4);
}

TEST(NormalizerTerms, GridMatchesLogNormalizer) {
  const CmpParams p(3.0, 0.5);
  const auto grid = normalizer_terms(p);
  EXPECT_EQ(static_cast<int>(grid.size()), truncation_length(p));
  EXPECT_DOUBLE_EQ(grid.log_z, log_normalizer(p));
  EXPECT_DOUBLE_EQ(moments_with_log_z(p).log_z, grid.log_z);
}

}  // namespace
}  // namespace cmpbayes
