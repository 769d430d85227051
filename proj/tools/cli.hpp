#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cmpbayes/mcmc.hpp"
#include "cmpbayes/priors.hpp"
#include "cmpbayes/stats.hpp"

namespace cmpbayes::cli {

/// Everything needed to recompute a fit: dataset, prior, sampler settings and seed.
struct FitReport {
  std::string dataset;
  SufficientStats stats;
  std::string prior_name;
  PriorSpec prior = FlatPrior{};
  McmcConfig config;
  TruncationPolicy policy;
  std::uint64_t seed = 0;
  PosteriorSummary summary;
  std::vector<double> acceptance_rates;
  std::vector<int> divergences;
  bool divergence_flagged = false;
};

std::string report_json(const FitReport& report);
std::string report_text(const FitReport& report);
std::string report_csv(const FitReport& report);

/// Directory used for bare dataset names: $CMPBAYES_DATA_DIR, else the
/// bundled data/ directory of the source tree.
std::filesystem::path default_data_dir();

/// Entry point shared by the executable and the tests. args excludes the
/// program name. Exit codes: 0 success, 1 usage or runtime error,
/// 2 improper posterior.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cmpbayes::cli
