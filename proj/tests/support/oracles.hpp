#pragma once

// Reference computations that share no code with the library: fixed-length
// long double series, closed forms and brute-force quadrature.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

namespace oracle {

// Nine (lambda, nu) points spanning the simulation settings.
struct GridPoint {
  double lambda;
  double nu;
};

inline std::vector<GridPoint> study_grid() {
  std::vector<GridPoint> out;
  for (double lambda : {3.0, 3.5, 4.0}) {
    for (double nu : {0.5, 1.0, 2.0}) out.push_back({lambda, nu});
  }
  return out;
}

inline long double ln_fact(std::int64_t j) { return std::lgamma(static_cast<long double>(j) + 1.0L); }

// ln Z from exactly `terms` terms, summed in long double around the largest term.
inline long double log_z(double lambda, double nu, int terms = 500) {
  std::vector<long double> t(terms);
  for (int j = 0; j < terms; ++j) t[j] = j * std::log(static_cast<long double>(lambda)) - nu * ln_fact(j);
  const long double peak = *std::max_element(t.begin(), t.end());
  long double sum = 0.0L;
  for (long double x : t) sum += std::exp(x - peak);
  return peak + std::log(sum);
}

struct Moments {
  long double e_x = 0, var_x = 0, e_l = 0, var_l = 0, cov = 0;
};

inline Moments moments(double lambda, double nu, int terms = 500) {
  const long double lz = log_z(lambda, nu, terms);
  std::vector<long double> p(terms), l(terms);
  Moments m;
  for (int j = 0; j < terms; ++j) {
    l[j] = ln_fact(j);
    p[j] = std::exp(j * std::log(static_cast<long double>(lambda)) - nu * l[j] - lz);
    m.e_x += p[j] * j;
    m.e_l += p[j] * l[j];
  }
  for (int j = 0; j < terms; ++j) {
    m.var_x += p[j] * (j - m.e_x) * (j - m.e_x);
    m.var_l += p[j] * (l[j] - m.e_l) * (l[j] - m.e_l);
    m.cov += p[j] * (j - m.e_x) * (l[j] - m.e_l);
  }
  return m;
}

inline double poisson_log_pmf(std::int64_t x, double lambda) {
  return x * std::log(lambda) - lambda - std::lgamma(x + 1.0);
}

inline double geometric_log_pmf(std::int64_t x, double lambda) { return x * std::log(lambda) + std::log1p(-lambda); }

// Central differences of f(lambda, nu). Steps are relative to the point.
struct FiniteDifferences {
  double d_l, d_n, d_ll, d_nn, d_ln;
};

template <class F>
FiniteDifferences central_differences(F f, double lambda, double nu, double rel_step = 1e-4) {
  const double h = rel_step * lambda;
  const double k = rel_step * nu;
  const double f0 = f(lambda, nu);
  FiniteDifferences d{};
  d.d_l = (f(lambda + h, nu) - f(lambda - h, nu)) / (2 * h);
  d.d_n = (f(lambda, nu + k) - f(lambda, nu - k)) / (2 * k);
  d.d_ll = (f(lambda + h, nu) - 2 * f0 + f(lambda - h, nu)) / (h * h);
  d.d_nn = (f(lambda, nu + k) - 2 * f0 + f(lambda, nu - k)) / (k * k);
  d.d_ln = (f(lambda + h, nu + k) - f(lambda + h, nu - k) - f(lambda - h, nu + k) + f(lambda - h, nu - k)) / (4 * h * k);
  return d;
}

inline double relative_error(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-12);
}

inline double variance(std::span<const double> xs) {
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / (xs.size() - 1);
}

// Pearson chi-square against expected probabilities, pooling adjacent cells
// (from the right) until each has expected count >= 5. Returns the p-value.
inline double chi_square_p_value(const std::vector<double>& observed, const std::vector<double>& probs,
                                 double total) {
  std::vector<double> obs_pooled, exp_pooled;
  double o = 0.0, e = 0.0;
  for (std::size_t i = probs.size(); i-- > 0;) {
    o += observed[i];
    e += probs[i] * total;
    if (e >= 5.0) {
      obs_pooled.push_back(o);
      exp_pooled.push_back(e);
      o = e = 0.0;
    }
  }
  if (e > 0.0 || o > 0.0) {
    obs_pooled.back() += o;
    exp_pooled.back() += e;
  }
  double stat = 0.0;
  for (std::size_t i = 0; i < obs_pooled.size(); ++i) {
    const double d = obs_pooled[i] - exp_pooled[i];
    stat += d * d / exp_pooled[i];
  }
  const double dof = static_cast<double>(obs_pooled.size()) - 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), stat));
}

inline double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Monte Carlo standard error of the median of a pooled sample made of
// independent chains, from the spread of per-batch medians.
inline double batch_median_se(std::span<const std::vector<double>> chains, int batches_per_chain = 20) {
  std::vector<double> meds;
  for (const auto& c : chains) {
    const std::size_t len = c.size() / batches_per_chain;
    for (int b = 0; b < batches_per_chain; ++b) {
      meds.emplace_back(median(std::vector<double>(c.begin() + b * len, c.begin() + (b + 1) * len)));
    }
  }
  return std::sqrt(variance(meds) / meds.size());
}

// Posterior marginal quantiles of the conjugate kernel
//   lambda^(a-1) exp(-nu b) Z^(-c)
// by quadrature on a (ln lambda, ln nu) grid, Jacobian included.
struct GridPosterior {
  double lambda_median;
  double nu_median;
  double lambda_lo, lambda_hi, nu_lo, nu_hi;
};

inline GridPosterior conjugate_grid_posterior(double a, double b, double c, double u_lo, double u_hi, double v_lo,
                                             double v_hi, int points = 300, int terms = 200) {
  std::vector<long double> lf(terms);
  for (int j = 0; j < terms; ++j) lf[j] = ln_fact(j);
  const double du = (u_hi - u_lo) / (points - 1);
  const double dv = (v_hi - v_lo) / (points - 1);
  std::vector<long double> logw(static_cast<std::size_t>(points) * points);
  std::vector<long double> t(terms);
  for (int i = 0; i < points; ++i) {
    const long double u = u_lo + i * du;
    for (int k = 0; k < points; ++k) {
      const long double v = v_lo + k * dv;
      const long double nu = std::exp(v);
      long double peak = -1e300L;
      for (int j = 0; j < terms; ++j) {
        t[j] = j * u - nu * lf[j];
        peak = std::max(peak, t[j]);
      }
      long double s = 0.0L;
      for (int j = 0; j < terms; ++j) s += std::exp(t[j] - peak);
      const long double lz = peak + std::log(s);
      logw[i * points + k] = a * u - nu * b - c * lz + v;
    }
  }
  const long double top = *std::max_element(logw.begin(), logw.end());
  std::vector<long double> mu(points, 0.0L), mv(points, 0.0L);
  for (int i = 0; i < points; ++i) {
    for (int k = 0; k < points; ++k) {
      const long double w = std::exp(logw[i * points + k] - top);
      mu[i] += w;
      mv[k] += w;
    }
  }
  auto quantile = [](const std::vector<long double>& m, double lo, double step, double p) {
    const long double total = std::accumulate(m.begin(), m.end(), 0.0L);
    long double run = 0.0L;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const long double next = run + m[i];
      if (next / total >= p) {
        // Mass of cell i spread uniformly over [x_i - step/2, x_i + step/2].
        const double frac = static_cast<double>((p * total - run) / m[i]);
        return std::exp(lo + (static_cast<double>(i) - 0.5 + frac) * step);
      }
      run = next;
    }
    return std::exp(lo + (m.size() - 1) * step);
  };
  return {quantile(mu, u_lo, du, 0.5),   quantile(mv, v_lo, dv, 0.5),   quantile(mu, u_lo, du, 0.025),
          quantile(mu, u_lo, du, 0.975), quantile(mv, v_lo, dv, 0.025), quantile(mv, v_lo, dv, 0.975)};
}

}  // namespace oracle
