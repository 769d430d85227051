#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "cmpbayes/dataset.hpp"
#include "cmpbayes/error.hpp"
#include "cmpbayes/posterior.hpp"
#include "cmpbayes/rng.hpp"
#include "cmpbayes/study.hpp"

namespace cmpbayes::cli {

namespace {

using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitImproper = 2;

ordered_json prior_json(const PriorSpec& spec) {
  ordered_json j;
  if (const auto* h = std::get_if<ConjugateHyper>(&spec)) {
    j["family"] = "conjugate";
    j["a"] = h->a();
    j["b"] = h->b();
    j["c"] = h->c();
  } else if (std::holds_alternative<FlatPrior>(spec)) {
    j["family"] = "flat";
  } else {
    j["family"] = "jeffreys";
  }
  return j;
}

ordered_json summary_json(const ParameterSummary& s) {
  return {{"median", s.median}, {"cri_low", s.cri_low}, {"cri_high", s.cri_high}, {"rhat", s.rhat}};
}

// Writes to --out when given, otherwise to the command's output stream.
void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorCode::kIo, fmt::format("cannot write '{}'", path));
  file << text;
}

struct McmcFlags {
  int chains = McmcConfig{}.chains;
  int warmup = McmcConfig{}.warmup;
  int keep = McmcConfig{}.keep;
  int thin = McmcConfig{}.thin;
  std::string adaptation = "dense";
  int trunc_terms = TruncationPolicy{}.base_terms;
  std::uint64_t seed = 1;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--chains", chains, "Number of chains")->capture_default_str();
    cmd->add_option("--warmup", warmup, "Warmup iterations per chain")->capture_default_str();
    cmd->add_option("--keep", keep, "Retained iterations per chain")->capture_default_str();
    cmd->add_option("--thin", thin, "Post-warmup iterations per retained draw")->capture_default_str();
    cmd->add_option("--adaptation", adaptation, "Proposal covariance adaptation: dense|diagonal")
        ->check(CLI::IsMember({"dense", "diagonal"}))
        ->capture_default_str();
    cmd->add_option("--trunc-terms", trunc_terms, "Minimum number of normalizer series terms")->capture_default_str();
    cmd->add_option("--seed", seed, "Master seed")->capture_default_str();
  }

  McmcConfig config() const {
    McmcConfig c;
    c.chains = chains;
    c.warmup = warmup;
    c.keep = keep;
    c.thin = thin;
    c.adaptation = adaptation == "diagonal" ? Adaptation::kDiagonal : Adaptation::kDense;
    return c;
  }

  TruncationPolicy policy() const {
    TruncationPolicy p;
    p.base_terms = trunc_terms;
    p.max_terms = std::max(p.max_terms, trunc_terms);
    return p;
  }
};

}  // namespace

std::filesystem::path default_data_dir() { return data_directory(CMPBAYES_DEFAULT_DATA_DIR); }

std::string report_json(const FitReport& r) {
  ordered_json j;
  j["dataset"] = r.dataset;
  j["n"] = r.stats.n;
  j["s1"] = r.stats.s1;
  j["s2"] = r.stats.s2;
  j["prior"] = r.prior_name;
  j["prior_spec"] = prior_json(r.prior);
  j["seed"] = r.seed;
  j["config"] = {{"chains", r.config.chains},
                 {"warmup", r.config.warmup},
                 {"keep", r.config.keep},
                 {"thin", r.config.thin},
                 {"target_accept", r.config.target_accept},
                 {"init_jitter", r.config.init_jitter},
                 {"nu_floor", r.config.nu_floor},
                 {"adaptation", r.config.adaptation == Adaptation::kDense ? "dense" : "diagonal"},
                 {"trunc_terms", r.policy.base_terms},
                 {"tail_tol", r.policy.tail_tol},
                 {"max_terms", r.policy.max_terms}};
  j["lambda"] = summary_json(r.summary.lambda);
  j["nu"] = summary_json(r.summary.nu);
  j["n_kept"] = r.summary.n_kept;
  j["acceptance_rate"] = r.acceptance_rates;
  j["divergences"] = r.divergences;
  j["divergence_flagged"] = r.divergence_flagged;
  return j.dump(2) + "\n";
}

std::string report_text(const FitReport& r) {
  auto fmt_value = [](double x) { return std::abs(x) >= 10.0 ? fmt::format("{:.2f}", x) : fmt::format("{:.3f}", x); };
  std::string out = fmt::format("{:<20}{:>8}  {:<8}{:<28}{:>7}\n", "Data", "n", "Param.", "Est. (CrI)", "R-hat");
  for (Parameter p : {Parameter::kLambda, Parameter::kNu}) {
    const ParameterSummary& s = r.summary[p];
    const std::string est = fmt::format("{} ({}, {})", fmt_value(s.median), fmt_value(s.cri_low), fmt_value(s.cri_high));
    out += fmt::format("{:<20}{:>8}  {:<8}{:<28}{:>7.3f}\n", p == Parameter::kLambda ? r.dataset : "",
                       p == Parameter::kLambda ? std::to_string(r.stats.n) : "", to_string(p), est, s.rhat);
  }
  int total_div = 0;
  for (int d : r.divergences) total_div += d;
  out += fmt::format("\nprior {} = {}\n", r.prior_name, describe(r.prior));
  out += fmt::format("{} chains x {} kept (thin {}) after {} warmup, seed {}, nu floor {}\n", r.config.chains,
                     r.config.keep, r.config.thin, r.config.warmup, r.seed, r.config.nu_floor);
  out += fmt::format("divergent transitions: {}{}\n", total_div,
                     r.divergence_flagged ? " (more than 1% of post-warmup proposals: results unreliable)" : "");
  return out;
}

std::string report_csv(const FitReport& r) {
  std::string out = "dataset,prior,parameter,median,cri_low,cri_high,rhat\n";
  for (Parameter p : {Parameter::kLambda, Parameter::kNu}) {
    const ParameterSummary& s = r.summary[p];
    out += fmt::format("{},{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.dataset, r.prior_name, to_string(p), s.median,
                       s.cri_low, s.cri_high, s.rhat);
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian inference for the Conway-Maxwell-Poisson distribution", "cmpbayes"};
  app.require_subcommand(1);

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit a CMP model to a count dataset");
  std::string fit_dataset;
  std::string fit_prior = "conj-1";
  std::optional<double> fit_a, fit_b, fit_c;
  std::string fit_format = "text";
  std::string fit_out;
  std::string fit_draws;
  McmcFlags fit_flags;
  fit_cmd->add_option("dataset", fit_dataset, "Dataset file or bundled dataset name")->required();
  fit_cmd->add_option("--prior", fit_prior, "conj-1|conj-data|conj-0.1|conj-0.01|flat|jeffreys")->capture_default_str();
  fit_cmd->add_option("--a", fit_a, "Override conjugate hyperparameter a");
  fit_cmd->add_option("--b", fit_b, "Override conjugate hyperparameter b");
  fit_cmd->add_option("--c", fit_c, "Override conjugate hyperparameter c");
  fit_cmd->add_option("--format", fit_format, "json|csv|text")->capture_default_str();
  fit_cmd->add_option("--out", fit_out, "Write the report here instead of stdout");
  fit_cmd->add_option("--draws", fit_draws, "Also write all retained draws as CSV");
  fit_flags.add_to(fit_cmd);

  // study
  auto* study_cmd = app.add_subcommand("study", "Run the simulation study (bias, MSE, coverage)");
  std::string study_config_path;
  std::vector<std::string> study_settings;
  std::vector<int> study_n;
  std::optional<int> study_replicates;
  std::vector<std::string> study_priors;
  std::optional<std::uint64_t> study_seed;
  std::optional<int> study_chains, study_warmup, study_keep, study_thin, study_trunc;
  std::optional<unsigned> study_threads;
  std::string study_resume;
  std::string study_format = "text";
  std::string study_out;
  bool study_progress = false;
  study_cmd->add_option("--config", study_config_path, "key = value study configuration file");
  study_cmd->add_option("--settings", study_settings, "name:lambda:nu, comma separated")->delimiter(',');
  study_cmd->add_option("--n", study_n, "Sample sizes, comma separated")->delimiter(',');
  study_cmd->add_option("--replicates", study_replicates, "Simulated datasets per (setting, n)");
  study_cmd->add_option("--priors", study_priors, "Preset prior names, comma separated")->delimiter(',');
  study_cmd->add_option("--seed", study_seed, "Master seed");
  study_cmd->add_option("--chains", study_chains, "Chains per fit");
  study_cmd->add_option("--warmup", study_warmup, "Warmup iterations per chain");
  study_cmd->add_option("--keep", study_keep, "Retained iterations per chain");
  study_cmd->add_option("--thin", study_thin, "Post-warmup iterations per retained draw");
  study_cmd->add_option("--trunc-terms", study_trunc, "Minimum number of normalizer series terms");
  study_cmd->add_option("--threads", study_threads, "Worker threads (0 = all cores)");
  study_cmd->add_option("--resume", study_resume, "Replicate-level results file to append to and resume from");
  study_cmd->add_option("--format", study_format, "json|csv|text")->capture_default_str();
  study_cmd->add_option("--out", study_out, "Write the tables here instead of stdout");
  study_cmd->add_flag("--progress", study_progress, "Report each finished fit on stderr");

  // rand
  auto* rand_cmd = app.add_subcommand("rand", "Draw CMP counts, one per line");
  double rand_lambda = 0.0;
  double rand_nu = 0.0;
  std::size_t rand_count = 0;
  std::uint64_t rand_seed = 1;
  std::uint64_t rand_stream = 0;
  int rand_trunc = TruncationPolicy{}.base_terms;
  std::string rand_out;
  rand_cmd->add_option("--lambda", rand_lambda, "Rate parameter")->required();
  rand_cmd->add_option("--nu", rand_nu, "Dispersion parameter")->required();
  rand_cmd->add_option("--count", rand_count, "Number of draws")->required();
  rand_cmd->add_option("--seed", rand_seed, "Master seed")->capture_default_str();
  rand_cmd->add_option("--stream", rand_stream, "Stream id")->capture_default_str();
  rand_cmd->add_option("--trunc-terms", rand_trunc, "Minimum number of normalizer series terms")->capture_default_str();
  rand_cmd->add_option("--out", rand_out, "Write here instead of stdout");

  // check-prior
  auto* check_cmd = app.add_subcommand("check-prior", "Check propriety of a conjugate prior (a, b, c)");
  std::vector<double> check_positional;
  std::optional<double> check_a, check_b, check_c;
  check_cmd->add_option("abc", check_positional, "a b c")->expected(0, 3);
  check_cmd->add_option("--a", check_a, "a");
  check_cmd->add_option("--b", check_b, "b");
  check_cmd->add_option("--c", check_c, "c");

  // pmf
  auto* pmf_cmd = app.add_subcommand("pmf", "Tabulate the CMP probability mass function");
  double pmf_lambda = 0.0;
  double pmf_nu = 0.0;
  int pmf_max_x = 20;
  int pmf_trunc = TruncationPolicy{}.base_terms;
  std::string pmf_format = "text";
  std::string pmf_out;
  pmf_cmd->add_option("--lambda", pmf_lambda, "Rate parameter")->required();
  pmf_cmd->add_option("--nu", pmf_nu, "Dispersion parameter")->required();
  pmf_cmd->add_option("--max-x", pmf_max_x, "Largest x to tabulate")->capture_default_str();
  pmf_cmd->add_option("--trunc-terms", pmf_trunc, "Minimum number of normalizer series terms")->capture_default_str();
  pmf_cmd->add_option("--format", pmf_format, "json|csv|text")->capture_default_str();
  pmf_cmd->add_option("--out", pmf_out, "Write here instead of stdout");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (fit_cmd->parsed()) {
      const auto path = resolve_dataset(fit_dataset, default_data_dir());
      const CountDataset data = load_dataset(path);
      PriorSpec prior = find_preset(fit_prior);
      if (fit_a || fit_b || fit_c) {
        const auto* base = std::get_if<ConjugateHyper>(&prior);
        if (base == nullptr) {
          err << "error: --a/--b/--c only apply to conjugate priors\n";
          return kExitError;
        }
        prior = ConjugateHyper{fit_a.value_or(base->a()), fit_b.value_or(base->b()), fit_c.value_or(base->c())};
      }
      const TableFormat format = parse_table_format(fit_format);

      FitReport report;
      report.dataset = data.name;
      report.stats = data.stats();
      report.prior_name = fit_prior;
      report.prior = prior;
      report.config = fit_flags.config();
      report.policy = fit_flags.policy();
      report.seed = fit_flags.seed;
      const Draws draws = run_chains(prior, report.stats, report.config, SeedSpec{fit_flags.seed, 0}, report.policy);
      report.summary = summarize(draws);
      for (const auto& c : draws.chains) {
        report.acceptance_rates.push_back(c.acceptance_rate);
        report.divergences.push_back(c.divergences);
      }
      report.divergence_flagged = draws.divergence_flagged();

      if (!fit_draws.empty()) {
        std::ostringstream csv;
        write_draws_csv(csv, draws);
        emit(csv.str(), fit_draws, out);
      }
      const std::string text = format == TableFormat::kJson  ? report_json(report)
                               : format == TableFormat::kCsv ? report_csv(report)
                                                             : report_text(report);
      emit(text, fit_out, out);
      return kExitOk;
    }

    if (study_cmd->parsed()) {
      StudyConfig config = study_config_path.empty() ? StudyConfig{} : load_study_config(study_config_path);
      if (!study_settings.empty()) {
        config.settings.clear();
        for (const auto& s : study_settings) {
          const auto parsed = parse_study_config("settings = " + s).settings;
          config.settings.insert(config.settings.end(), parsed.begin(), parsed.end());
        }
      }
      if (!study_n.empty()) config.sample_sizes = study_n;
      if (study_replicates) config.replicates = *study_replicates;
      if (!study_priors.empty()) config.priors = study_priors;
      if (study_seed) config.master_seed = *study_seed;
      if (study_chains) config.mcmc.chains = *study_chains;
      if (study_warmup) config.mcmc.warmup = *study_warmup;
      if (study_keep) config.mcmc.keep = *study_keep;
      if (study_thin) config.mcmc.thin = *study_thin;
      if (study_trunc) {
        config.policy.base_terms = *study_trunc;
        config.policy.max_terms = std::max(config.policy.max_terms, *study_trunc);
      }
      if (study_threads) config.threads = *study_threads;
      if (!study_resume.empty()) config.results_file = study_resume;
      const TableFormat format = parse_table_format(study_format);

      std::function<void(const ReplicateFit&)> progress;
      if (study_progress) {
        progress = [&err](const ReplicateFit& f) {
          err << fmt::format("{} n={} rep={} {}: {}\n", f.setting, f.n, f.replicate, f.prior,
                             f.ok ? "ok" : f.failure);
        };
      }
      const auto results = run_study(config, progress);
      emit(render_tables(results, format), study_out, out);
      return kExitOk;
    }

    if (rand_cmd->parsed()) {
      TruncationPolicy policy;
      policy.base_terms = rand_trunc;
      policy.max_terms = std::max(policy.max_terms, rand_trunc);
      const auto draws = sample_cmp(CmpParams(rand_lambda, rand_nu), rand_count, SeedSpec{rand_seed, rand_stream}, policy);
      std::string text;
      text.reserve(draws.size() * 3);
      for (auto x : draws) {
        text += std::to_string(x);
        text += '\n';
      }
      emit(text, rand_out, out);
      return kExitOk;
    }

    if (check_cmd->parsed()) {
      if (!check_positional.empty() && check_positional.size() != 3) {
        err << "error: check-prior takes exactly three values a b c\n";
        return kExitError;
      }
      const double a = check_a.value_or(check_positional.size() == 3 ? check_positional[0] : NAN);
      const double b = check_b.value_or(check_positional.size() == 3 ? check_positional[1] : NAN);
      const double c = check_c.value_or(check_positional.size() == 3 ? check_positional[2] : NAN);
      const ProprietyCheck check = conjugate_propriety_check(ConjugateHyper{a, b, c});
      out << fmt::format("{}\nlhs = b/c = {:.6g}\nrhs = ln(floor(a/c)!) + (a/c - floor(a/c)) ln(floor(a/c) + 1) = {:.6g}\n",
                         check.proper ? "proper" : "improper", check.lhs, check.rhs);
      return kExitOk;
    }

    if (pmf_cmd->parsed()) {
      TruncationPolicy policy;
      policy.base_terms = pmf_trunc;
      policy.max_terms = std::max(policy.max_terms, pmf_trunc);
      const CmpParams params(pmf_lambda, pmf_nu);
      if (pmf_max_x < 0) {
        err << "error: --max-x must be nonnegative\n";
        return kExitError;
      }
      const TableFormat format = parse_table_format(pmf_format);
      std::string text;
      ordered_json rows = ordered_json::array();
      if (format == TableFormat::kCsv) text = "x,pmf\n";
      for (int x = 0; x <= pmf_max_x; ++x) {
        const double p = std::exp(log_pmf(x, params, policy));
        if (format == TableFormat::kJson) {
          rows.push_back({{"x", x}, {"pmf", p}});
        } else if (format == TableFormat::kCsv) {
          text += fmt::format("{},{:.17g}\n", x, p);
        } else {
          text += fmt::format("{:>4}  {:.10g}\n", x, p);
        }
      }
      if (format == TableFormat::kJson) text = rows.dump(2) + "\n";
      emit(text, pmf_out, out);
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kImproperPosterior ? kExitImproper : kExitError;
  }
  return kExitError;
}

}  // namespace cmpbayes::cli
