#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cmpbayes/cmp.hpp"
#include "cmpbayes/mcmc.hpp"

namespace cmpbayes {

struct DispersionSetting {
  std::string name;
  double lambda_true = 0.0;
  double nu_true = 0.0;
};

struct StudyConfig {
  std::vector<DispersionSetting> settings{{"equi", 4.0, 1.0}, {"over", 3.0, 0.5}, {"under", 3.0, 2.0}};
  std::vector<int> sample_sizes{25, 75, 125};
  int replicates = 100;
  McmcConfig mcmc{};
  std::vector<std::string> priors{"conj-1", "conj-data", "conj-0.1", "conj-0.01", "flat", "jeffreys"};
  std::uint64_t master_seed = 20240101;
  TruncationPolicy policy{};
  /// Replicate-level records are appended here and reused on the next run.
  std::optional<std::filesystem::path> results_file;
  /// Worker threads; 0 means std::thread::hardware_concurrency().
  unsigned threads = 0;

  void validate() const;
};

/// Reads "key = value" lines ('#' comments). Keys: settings
/// (name:lambda:nu,...), sample_sizes, replicates, priors, seed, chains,
/// warmup, keep, thin, target_accept, trunc_terms, results_file, threads.
/// Keys not present keep the StudyConfig defaults.
StudyConfig load_study_config(const std::filesystem::path& path);
StudyConfig parse_study_config(std::string_view text);

/// Outcome of one (setting, n, replicate, prior) fit.
struct ReplicateFit {
  std::string setting;
  int n = 0;
  int replicate = 0;
  std::string prior;
  bool ok = false;
  std::string failure;  // error code when !ok
  ParameterSummary lambda;
  ParameterSummary nu;
  int divergences = 0;
};

struct CellResult {
  std::string setting;
  Parameter parameter = Parameter::kLambda;
  int n = 0;
  std::string prior;
  double truth = 0.0;
  double bias = 0.0;
  double mse = 0.0;
  double coverage = 0.0;
  int n_ok = 0;
  int n_failed = 0;

  bool empty() const noexcept { return n_ok == 0; }
};

/// Equality that treats NaN fields (empty cells) as equal.
bool same_result(const CellResult& lhs, const CellResult& rhs);

/// Seed of the simulated dataset for one replicate. Depends on names and
/// indices only, never on scheduling.
SeedSpec dataset_seed(std::uint64_t master_seed, std::string_view setting, int n, int replicate);
SeedSpec fit_seed(std::uint64_t master_seed, std::string_view setting, int n, int replicate,
                  std::string_view prior);

ReplicateFit fit_replicate(const StudyConfig& config, const DispersionSetting& setting, int n,
                           int replicate, const std::string& prior);

/// Runs every (setting, n, replicate, prior) fit and aggregates. Failed fits
/// are excluded from bias/MSE/coverage and counted in n_failed.
std::vector<CellResult> run_study(const StudyConfig& config,
                                  const std::function<void(const ReplicateFit&)>& on_fit = {});

/// bias = mean(median - truth), mse = mean((median - truth)^2), coverage =
/// fraction of 95% intervals containing truth.
std::vector<CellResult> aggregate_fits(const StudyConfig& config, const std::vector<ReplicateFit>& fits);

enum class TableFormat { kCsv, kJson, kText };

TableFormat parse_table_format(std::string_view name);

/// Ordered by (setting, parameter, n, prior); settings and priors keep their
/// first-appearance order.
std::vector<CellResult> ordered(std::vector<CellResult> results);

std::string render_tables(const std::vector<CellResult>& results, TableFormat format);

std::vector<CellResult> parse_results_csv(std::string_view csv);

}  // namespace cmpbayes
