#include "cmpbayes/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "cmpbayes/error.hpp"
#include "cmpbayes/posterior.hpp"

namespace cmpbayes {

std::string_view to_string(Parameter p) { return p == Parameter::kLambda ? "lambda" : "nu"; }

void McmcConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidConfig, msg); };
  if (chains < 2) fail(fmt::format("chains must be >= 2 for R-hat, got {}", chains));
  if (warmup < 1) fail(fmt::format("warmup must be positive, got {}", warmup));
  if (keep < 100) fail(fmt::format("keep must be >= 100, got {}", keep));
  if (thin < 1) fail(fmt::format("thin must be positive, got {}", thin));
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    fail(fmt::format("target_accept must lie in (0, 1), got {}", target_accept));
  }
  if (!(init_jitter > 0.0)) fail(fmt::format("init_jitter must be positive, got {}", init_jitter));
  if (!(nu_floor > 0.0)) fail(fmt::format("nu_floor must be positive, got {}", nu_floor));
}

int Draws::total_divergences() const {
  int total = 0;
  for (const auto& c : chains) total += c.divergences;
  return total;
}

double Draws::divergence_rate() const {
  const std::size_t proposals = chains.size() * iterations() * static_cast<std::size_t>(thin);
  return proposals == 0 ? 0.0 : static_cast<double>(total_divergences()) / static_cast<double>(proposals);
}

std::vector<double> Draws::pooled(Parameter p) const {
  std::vector<double> out;
  out.reserve(chains.size() * iterations());
  for (const auto& c : chains) {
    const auto v = c.values(p);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Point {
  double u = 0.0;  // ln lambda
  double v = 0.0;  // ln nu
};

struct Evaluation {
  double value = kNegInf;
  bool in_support = false;
  bool finite = false;
};

// Log posterior on (ln lambda, ln nu) including the log-Jacobian.
class LogTarget {
 public:
  LogTarget(const PriorSpec& spec, const SufficientStats& stats, double nu_floor, const TruncationPolicy& policy)
      : spec_(spec), stats_(stats), log_nu_floor_(std::log(nu_floor)), policy_(policy) {}

  Evaluation operator()(Point p) const {
    Evaluation e;
    if (p.v < log_nu_floor_ || !std::isfinite(p.u) || !std::isfinite(p.v)) return e;
    e.in_support = true;
    try {
      const CmpParams params(std::exp(p.u), std::exp(p.v));
      e.value = log_posterior(spec_, stats_, params, policy_) + p.u + p.v;
    } catch (const Error&) {
      return e;
    }
    e.finite = std::isfinite(e.value);
    if (!e.finite) e.value = kNegInf;
    return e;
  }

 private:
  const PriorSpec& spec_;
  const SufficientStats& stats_;
  double log_nu_floor_;
  const TruncationPolicy& policy_;
};

// Lower-triangular factor of the 2x2 proposal covariance.
struct Cholesky2 {
  double l11 = 1.0;
  double l21 = 0.0;
  double l22 = 1.0;
};

// Running covariance of warmup draws over one adaptation window.
class WindowCovariance {
 public:
  void add(Point p) {
    ++n_;
    const double du = p.u - mean_u_;
    const double dv = p.v - mean_v_;
    mean_u_ += du / n_;
    mean_v_ += dv / n_;
    m_uu_ += du * (p.u - mean_u_);
    m_vv_ += dv * (p.v - mean_v_);
    m_uv_ += du * (p.v - mean_v_);
  }

  int count() const { return n_; }

  // Shrinks slightly toward a small multiple of the identity so a window that
  // barely moved still yields a usable factor.
  Cholesky2 factor(Adaptation mode) const {
    const double k = static_cast<double>(n_);
    const double w = k / (k + 5.0);
    const double ridge = 1e-8 * (5.0 / (k + 5.0));
    const double s_uu = w * m_uu_ / (k - 1.0) + ridge;
    const double s_vv = w * m_vv_ / (k - 1.0) + ridge;
    const double s_uv = mode == Adaptation::kDense ? w * m_uv_ / (k - 1.0) : 0.0;
    Cholesky2 c;
    c.l11 = std::sqrt(s_uu);
    c.l21 = s_uv / c.l11;
    const double rest = s_vv - c.l21 * c.l21;
    if (rest > 0.0 && std::isfinite(rest)) {
      c.l22 = std::sqrt(rest);
    } else {
      c.l21 = 0.0;
      c.l22 = std::sqrt(s_vv);
    }
    return c;
  }

 private:
  int n_ = 0;
  double mean_u_ = 0.0;
  double mean_v_ = 0.0;
  double m_uu_ = 0.0;
  double m_vv_ = 0.0;
  double m_uv_ = 0.0;
};

constexpr int kMaxInitAttempts = 100;
constexpr int kMinWindowDraws = 20;
const double kOptimalScale2d = 2.38 / std::sqrt(2.0);

ChainDraws run_chain(const LogTarget& target, const McmcConfig& cfg, double xbar, SeedSpec seed) {
  RandomStream rng(seed);

  Point current;
  Evaluation cur_eval;
  for (int attempt = 0; attempt < kMaxInitAttempts && !cur_eval.finite; ++attempt) {
    current.u = std::log(std::max(xbar, 0.5)) + cfg.init_jitter * rng.normal();
    current.v = cfg.init_jitter * rng.normal();
    cur_eval = target(current);
  }
  if (!cur_eval.finite) {
    throw Error(ErrorCode::kAllDivergent,
                fmt::format("no finite starting point found in {} attempts", kMaxInitAttempts));
  }

  // Window boundaries as fractions of warmup: covariance re-estimated at the
  // end of [0.10, 0.35) and [0.35, 0.75); the scale alone adapts on
  // [0.75, 1.0) and is frozen at its average over that stretch.
  const int w = cfg.warmup;
  const int window_a = static_cast<int>(0.10 * w);
  const int window_b = static_cast<int>(0.35 * w);
  const int window_c = static_cast<int>(0.75 * w);

  Cholesky2 chol;
  double log_scale = std::log(0.1);
  int adapt_step = 0;
  WindowCovariance window;
  double final_log_scale_sum = 0.0;
  int final_log_scale_count = 0;

  ChainDraws out;
  out.lambda.reserve(static_cast<std::size_t>(cfg.keep));
  out.nu.reserve(static_cast<std::size_t>(cfg.keep));
  int accepted = 0;

  const int sampling = cfg.keep * cfg.thin;
  const int total = cfg.warmup + sampling;
  for (int it = 0; it < total; ++it) {
    const bool warming = it < cfg.warmup;
    const double scale = std::exp(log_scale);
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    const Point proposal{current.u + scale * chol.l11 * z1,
                         current.v + scale * (chol.l21 * z1 + chol.l22 * z2)};
    const Evaluation prop_eval = target(proposal);

    double accept_prob = 0.0;
    if (prop_eval.finite) {
      accept_prob = std::min(1.0, std::exp(prop_eval.value - cur_eval.value));
    } else if (prop_eval.in_support) {
      if (warming) {
        ++out.warmup_divergences;
      } else {
        ++out.divergences;
      }
    }
    // The uniform is drawn unconditionally so the stream position never
    // depends on whether the proposal was evaluable.
    const double u = rng.uniform();
    const bool accept = prop_eval.finite && u < accept_prob;
    if (accept) {
      current = proposal;
      cur_eval = prop_eval;
    }

    if (warming) {
      ++adapt_step;
      log_scale += std::pow(static_cast<double>(adapt_step), -0.6) * (accept_prob - cfg.target_accept);
      if (it >= window_a && it < window_c) window.add(current);
      if ((it + 1 == window_b || it + 1 == window_c) && window.count() >= kMinWindowDraws) {
        chol = window.factor(cfg.adaptation);
        log_scale = std::log(kOptimalScale2d);
        adapt_step = 0;
        window = WindowCovariance{};
      }
      if (it >= window_c) {
        final_log_scale_sum += log_scale;
        ++final_log_scale_count;
      }
      if (it + 1 == cfg.warmup && final_log_scale_count > 0) {
        log_scale = final_log_scale_sum / final_log_scale_count;
      }
      continue;
    }

    if (accept) ++accepted;
    if ((it - cfg.warmup + 1) % cfg.thin == 0) {
      out.lambda.push_back(std::exp(current.u));
      out.nu.push_back(std::exp(current.v));
    }
  }

  out.acceptance_rate = static_cast<double>(accepted) / sampling;
  out.step_scale = std::exp(log_scale);
  if (out.divergences == sampling) {
    throw Error(ErrorCode::kAllDivergent, "every post-warmup proposal had a non-finite log posterior");
  }
  return out;
}

}  // namespace

Draws run_chains(const PriorSpec& spec, const SufficientStats& stats, const McmcConfig& config, SeedSpec seed,
                 const TruncationPolicy& policy) {
  config.validate();
  policy.validate();
  if (const auto proper = posterior_propriety(spec, stats); proper.has_value() && !*proper) {
    throw Error(ErrorCode::kImproperPosterior,
                fmt::format("posterior under {} prior is improper for n = {}, S1 = {}, S2 = {}", describe(spec),
                            stats.n, stats.s1, stats.s2));
  }

  const LogTarget target(spec, stats, config.nu_floor, policy);
  const double xbar = stats.xbar();

  Draws draws;
  draws.nu_floor = config.nu_floor;
  draws.thin = config.thin;
  draws.chains.resize(static_cast<std::size_t>(config.chains));
  if (config.parallel) {
    std::vector<std::future<ChainDraws>> futures;
    futures.reserve(draws.chains.size());
    for (int c = 0; c < config.chains; ++c) {
      futures.push_back(std::async(std::launch::async, run_chain, std::cref(target), std::cref(config), xbar,
                                   seed.child(static_cast<std::uint64_t>(c))));
    }
    for (std::size_t c = 0; c < futures.size(); ++c) draws.chains[c] = futures[c].get();
  } else {
    for (int c = 0; c < config.chains; ++c) {
      draws.chains[static_cast<std::size_t>(c)] =
          run_chain(target, config, xbar, seed.child(static_cast<std::uint64_t>(c)));
    }
  }
  return draws;
}

double split_rhat(std::span<const std::vector<double>> chains) {
  if (chains.size() < 2) throw Error(ErrorCode::kInvalidConfig, "split R-hat needs at least 2 chains");
  const std::size_t len = chains.front().size();
  for (const auto& c : chains) {
    if (c.size() != len) throw Error(ErrorCode::kInvalidConfig, "split R-hat needs chains of equal length");
  }
  if (len < 100) {
    throw Error(ErrorCode::kInvalidConfig, fmt::format("split R-hat needs >= 100 draws per chain, got {}", len));
  }

  const std::size_t m = len / 2;
  std::vector<double> means;
  std::vector<double> vars;
  for (const auto& c : chains) {
    for (std::size_t start : {std::size_t{0}, len - m}) {
      double mean = 0.0;
      for (std::size_t i = 0; i < m; ++i) mean += c[start + i];
      mean /= static_cast<double>(m);
      double ss = 0.0;
      for (std::size_t i = 0; i < m; ++i) ss += (c[start + i] - mean) * (c[start + i] - mean);
      means.push_back(mean);
      vars.push_back(ss / static_cast<double>(m - 1));
    }
  }

  const double halves = static_cast<double>(means.size());
  double within = 0.0;
  for (double v : vars) within += v;
  within /= halves;
  if (!(within > 0.0)) throw Error(ErrorCode::kZeroVariance, "split R-hat undefined: zero within-chain variance");

  double grand = 0.0;
  for (double mu : means) grand += mu;
  grand /= halves;
  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between /= (halves - 1.0);

  const double md = static_cast<double>(m);
  return std::sqrt(((md - 1.0) / md * within + between) / within);
}

double split_rhat(const Draws& draws, Parameter p) {
  std::vector<std::vector<double>> chains;
  chains.reserve(draws.chains.size());
  for (const auto& c : draws.chains) {
    const auto v = c.values(p);
    chains.emplace_back(v.begin(), v.end());
  }
  return split_rhat(chains);
}

double interpolated_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::kEmptyData, "quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

PosteriorSummary summarize(const Draws& draws) {
  if (draws.chains.empty() || draws.iterations() == 0) throw Error(ErrorCode::kEmptyData, "no draws to summarize");
  PosteriorSummary summary;
  for (Parameter p : {Parameter::kLambda, Parameter::kNu}) {
    std::vector<double> pooled = draws.pooled(p);
    std::sort(pooled.begin(), pooled.end());
    ParameterSummary s;
    s.median = interpolated_quantile(pooled, 0.5);
    s.cri_low = interpolated_quantile(pooled, 0.025);
    s.cri_high = interpolated_quantile(pooled, 0.975);
    s.rhat = split_rhat(draws, p);
    (p == Parameter::kLambda ? summary.lambda : summary.nu) = s;
    summary.n_kept = pooled.size();
  }
  return summary;
}

void write_draws_csv(std::ostream& out, const Draws& draws) {
  out << "chain,iter,lambda,nu\n";
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const auto& chain = draws.chains[c];
    for (std::size_t i = 0; i < chain.lambda.size(); ++i) {
      out << fmt::format("{},{},{:.17g},{:.17g}\n", c, i, chain.lambda[i], chain.nu[i]);
    }
  }
}

}  // namespace cmpbayes
