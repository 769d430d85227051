#include "cmpbayes/study.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include <fmt/format.h>

#include "cmpbayes/error.hpp"
#include "cmpbayes/posterior.hpp"
#include "cmpbayes/rng.hpp"

namespace cmpbayes {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    out.push_back(trim(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view text, std::string_view what) {
  text = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::kParseError, fmt::format("{}: cannot parse '{}' as a number", what, text));
  }
  return value;
}

double parse_real(std::string_view text, std::string_view what) {
  text = trim(text);
  if (text == "NA" || text == "nan") return kNaN;
  return parse_number<double>(text, what);
}

std::string format_real(double x) { return std::isnan(x) ? std::string("NA") : fmt::format("{:.17g}", x); }

std::string config_fingerprint(const StudyConfig& c) {
  std::string text = fmt::format("seed={};chains={};warmup={};keep={};thin={};target={:.17g};jitter={:.17g};floor={:.17g};"
                                 "adapt={};trunc={},{:.17g},{}",
                                 c.master_seed, c.mcmc.chains, c.mcmc.warmup, c.mcmc.keep, c.mcmc.thin, c.mcmc.target_accept,
                                 c.mcmc.init_jitter, c.mcmc.nu_floor, static_cast<int>(c.mcmc.adaptation),
                                 c.policy.base_terms, c.policy.tail_tol, c.policy.max_terms);
  for (const auto& s : c.settings) text += fmt::format(";{}:{:.17g}:{:.17g}", s.name, s.lambda_true, s.nu_true);
  return fmt::format("{:016x}", stable_hash(text));
}

constexpr std::string_view kFitHeader =
    "setting,n,replicate,prior,status,lambda_median,lambda_low,lambda_high,lambda_rhat,"
    "nu_median,nu_low,nu_high,nu_rhat,divergences";

std::string fit_to_csv(const ReplicateFit& f) {
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}", f.setting, f.n, f.replicate, f.prior,
                     f.ok ? std::string("ok") : f.failure, format_real(f.lambda.median),
                     format_real(f.lambda.cri_low), format_real(f.lambda.cri_high), format_real(f.lambda.rhat),
                     format_real(f.nu.median), format_real(f.nu.cri_low), format_real(f.nu.cri_high),
                     format_real(f.nu.rhat), f.divergences);
}

ReplicateFit fit_from_csv(std::string_view line) {
  const auto f = split(line, ',');
  if (f.size() != 14) throw Error(ErrorCode::kParseError, fmt::format("malformed results row '{}'", line));
  ReplicateFit r;
  r.setting = std::string(f[0]);
  r.n = parse_number<int>(f[1], "n");
  r.replicate = parse_number<int>(f[2], "replicate");
  r.prior = std::string(f[3]);
  r.ok = f[4] == "ok";
  if (!r.ok) r.failure = std::string(f[4]);
  r.lambda = {parse_real(f[5], "lambda_median"), parse_real(f[6], "lambda_low"), parse_real(f[7], "lambda_high"),
              parse_real(f[8], "lambda_rhat")};
  r.nu = {parse_real(f[9], "nu_median"), parse_real(f[10], "nu_low"), parse_real(f[11], "nu_high"),
          parse_real(f[12], "nu_rhat")};
  r.divergences = parse_number<int>(f[13], "divergences");
  return r;
}

using FitKey = std::tuple<std::string, int, int, std::string>;

FitKey key_of(const ReplicateFit& f) { return {f.setting, f.n, f.replicate, f.prior}; }

// Previously persisted fits, keyed by (setting, n, replicate, prior).
std::map<FitKey, ReplicateFit> load_results_file(const std::filesystem::path& path, const std::string& fingerprint) {
  std::map<FitKey, ReplicateFit> fits;
  std::ifstream in(path);
  if (!in) return fits;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (line_no == 1) {
      const std::string expected = "# cmpbayes-study fingerprint=" + fingerprint;
      if (t != expected) {
        throw Error(ErrorCode::kInvalidConfig,
                    fmt::format("results file '{}' was written with a different study configuration", path.string()));
      }
      continue;
    }
    if (t == kFitHeader) continue;
    ReplicateFit f = fit_from_csv(t);
    fits.emplace(key_of(f), std::move(f));
  }
  return fits;
}

}  // namespace

void StudyConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidConfig, msg); };
  if (settings.empty()) fail("study needs at least one dispersion setting");
  for (const auto& s : settings) {
    if (s.name.empty() || s.name.find(',') != std::string::npos) fail(fmt::format("bad setting name '{}'", s.name));
    CmpParams(s.lambda_true, s.nu_true);
  }
  if (sample_sizes.empty()) fail("study needs at least one sample size");
  for (int n : sample_sizes) {
    if (n < 1) fail(fmt::format("sample sizes must be positive, got {}", n));
  }
  if (replicates < 1) fail(fmt::format("replicates must be positive, got {}", replicates));
  if (priors.empty()) fail("study needs at least one prior");
  for (const auto& p : priors) find_preset(p);
  mcmc.validate();
  policy.validate();
}

StudyConfig parse_study_config(std::string_view text) {
  StudyConfig c;
  std::size_t line_no = 0;
  for (std::string_view raw : split(text, '\n')) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kParseError, fmt::format("config line {}: expected key = value", line_no));
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const std::string where = fmt::format("config line {} ({})", line_no, key);

    if (key == "settings") {
      c.settings.clear();
      for (auto item : split(value, ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 3) throw Error(ErrorCode::kParseError, where + ": expected name:lambda:nu");
        c.settings.push_back({std::string(parts[0]), parse_real(parts[1], where), parse_real(parts[2], where)});
      }
    } else if (key == "sample_sizes") {
      c.sample_sizes.clear();
      for (auto item : split(value, ',')) c.sample_sizes.push_back(parse_number<int>(item, where));
    } else if (key == "replicates") {
      c.replicates = parse_number<int>(value, where);
    } else if (key == "priors") {
      c.priors.clear();
      for (auto item : split(value, ',')) c.priors.emplace_back(item);
    } else if (key == "seed") {
      c.master_seed = parse_number<std::uint64_t>(value, where);
    } else if (key == "chains") {
      c.mcmc.chains = parse_number<int>(value, where);
    } else if (key == "warmup") {
      c.mcmc.warmup = parse_number<int>(value, where);
    } else if (key == "keep") {
      c.mcmc.keep = parse_number<int>(value, where);
    } else if (key == "thin") {
      c.mcmc.thin = parse_number<int>(value, where);
    } else if (key == "target_accept") {
      c.mcmc.target_accept = parse_real(value, where);
    } else if (key == "trunc_terms") {
      c.policy.base_terms = parse_number<int>(value, where);
    } else if (key == "results_file") {
      c.results_file = std::filesystem::path(std::string(value));
    } else if (key == "threads") {
      c.threads = parse_number<unsigned>(value, where);
    } else {
      throw Error(ErrorCode::kParseError, fmt::format("config line {}: unknown key '{}'", line_no, key));
    }
  }
  return c;
}

StudyConfig load_study_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open study config '{}'", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_study_config(buffer.str());
}

bool same_result(const CellResult& a, const CellResult& b) {
  auto same = [](double x, double y) { return (std::isnan(x) && std::isnan(y)) || x == y; };
  return a.setting == b.setting && a.parameter == b.parameter && a.n == b.n && a.prior == b.prior &&
         same(a.truth, b.truth) && same(a.bias, b.bias) && same(a.mse, b.mse) && same(a.coverage, b.coverage) &&
         a.n_ok == b.n_ok && a.n_failed == b.n_failed;
}

SeedSpec dataset_seed(std::uint64_t master_seed, std::string_view setting, int n, int replicate) {
  return SeedSpec{master_seed, 0}
      .child(stable_hash(setting))
      .child(static_cast<std::uint64_t>(n))
      .child(static_cast<std::uint64_t>(replicate))
      .child(0);
}

SeedSpec fit_seed(std::uint64_t master_seed, std::string_view setting, int n, int replicate, std::string_view prior) {
  return dataset_seed(master_seed, setting, n, replicate).child(1).child(stable_hash(prior));
}

ReplicateFit fit_replicate(const StudyConfig& config, const DispersionSetting& setting, int n, int replicate,
                           const std::string& prior) {
  ReplicateFit fit;
  fit.setting = setting.name;
  fit.n = n;
  fit.replicate = replicate;
  fit.prior = prior;
  fit.lambda = {kNaN, kNaN, kNaN, kNaN};
  fit.nu = {kNaN, kNaN, kNaN, kNaN};

  const CmpParams truth(setting.lambda_true, setting.nu_true);
  const auto data = sample_cmp(truth, static_cast<std::size_t>(n),
                               dataset_seed(config.master_seed, setting.name, n, replicate), config.policy);
  const SufficientStats stats = sufficient_stats(data);

  McmcConfig mcmc = config.mcmc;
  mcmc.parallel = false;
  try {
    const Draws draws =
        run_chains(find_preset(prior), stats, mcmc, fit_seed(config.master_seed, setting.name, n, replicate, prior),
                   config.policy);
    const PosteriorSummary summary = summarize(draws);
    fit.ok = true;
    fit.lambda = summary.lambda;
    fit.nu = summary.nu;
    fit.divergences = draws.total_divergences();
  } catch (const Error& e) {
    fit.ok = false;
    fit.failure = std::string(to_string(e.code()));
  }
  return fit;
}

std::vector<CellResult> aggregate_fits(const StudyConfig& config, const std::vector<ReplicateFit>& fits) {
  std::map<std::tuple<std::string, int, std::string>, std::vector<const ReplicateFit*>> by_cell;
  for (const auto& f : fits) by_cell[{f.setting, f.n, f.prior}].push_back(&f);

  std::vector<CellResult> results;
  for (const auto& setting : config.settings) {
    for (Parameter param : {Parameter::kLambda, Parameter::kNu}) {
      const double truth = param == Parameter::kLambda ? setting.lambda_true : setting.nu_true;
      for (int n : config.sample_sizes) {
        for (const auto& prior : config.priors) {
          CellResult cell;
          cell.setting = setting.name;
          cell.parameter = param;
          cell.n = n;
          cell.prior = prior;
          cell.truth = truth;
          double sum_err = 0.0;
          double sum_sq = 0.0;
          int covered = 0;
          const auto it = by_cell.find({setting.name, n, prior});
          if (it != by_cell.end()) {
            // Replicate order, so the floating-point sums do not depend on how
            // the fits were scheduled.
            auto cell_fits = it->second;
            std::sort(cell_fits.begin(), cell_fits.end(),
                      [](const ReplicateFit* a, const ReplicateFit* b) { return a->replicate < b->replicate; });
            for (const ReplicateFit* f : cell_fits) {
              if (!f->ok) {
                ++cell.n_failed;
                continue;
              }
              const ParameterSummary& s = param == Parameter::kLambda ? f->lambda : f->nu;
              const double err = s.median - truth;
              sum_err += err;
              sum_sq += err * err;
              if (s.cri_low <= truth && truth <= s.cri_high) ++covered;
              ++cell.n_ok;
            }
          }
          if (cell.n_ok > 0) {
            cell.bias = sum_err / cell.n_ok;
            cell.mse = sum_sq / cell.n_ok;
            cell.coverage = static_cast<double>(covered) / cell.n_ok;
          } else {
            cell.bias = cell.mse = cell.coverage = kNaN;
          }
          results.push_back(std::move(cell));
        }
      }
    }
  }
  return ordered(std::move(results));
}

std::vector<CellResult> run_study(const StudyConfig& config, const std::function<void(const ReplicateFit&)>& on_fit) {
  config.validate();

  struct Task {
    const DispersionSetting* setting;
    int n;
    int replicate;
    const std::string* prior;
  };
  std::vector<Task> tasks;
  for (const auto& s : config.settings) {
    for (int n : config.sample_sizes) {
      for (int r = 0; r < config.replicates; ++r) {
        for (const auto& p : config.priors) tasks.push_back({&s, n, r, &p});
      }
    }
  }

  const std::string fingerprint = config_fingerprint(config);
  std::map<FitKey, ReplicateFit> done;
  std::ofstream sink;
  if (config.results_file) {
    done = load_results_file(*config.results_file, fingerprint);
    const bool fresh = !std::filesystem::exists(*config.results_file) ||
                       std::filesystem::file_size(*config.results_file) == 0;
    sink.open(*config.results_file, std::ios::app);
    if (!sink) {
      throw Error(ErrorCode::kIo, fmt::format("cannot write results file '{}'", config.results_file->string()));
    }
    if (fresh) sink << "# cmpbayes-study fingerprint=" << fingerprint << '\n' << kFitHeader << '\n' << std::flush;
  }

  std::vector<ReplicateFit> fits(tasks.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& t = tasks[i];
    const auto it = done.find({t.setting->name, t.n, t.replicate, *t.prior});
    if (it != done.end()) {
      fits[i] = it->second;
    } else {
      pending.push_back(i);
    }
  }

  std::mutex report_mutex;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  auto worker = [&] {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= pending.size()) return;
      const Task& t = tasks[pending[k]];
      try {
        ReplicateFit fit = fit_replicate(config, *t.setting, t.n, t.replicate, *t.prior);
        const std::lock_guard lock(report_mutex);
        if (sink.is_open()) sink << fit_to_csv(fit) << '\n' << std::flush;
        if (on_fit) on_fit(fit);
        fits[pending[k]] = std::move(fit);
      } catch (...) {
        const std::lock_guard lock(report_mutex);
        if (!failure) failure = std::current_exception();
        next.store(pending.size());
        return;
      }
    }
  };

  unsigned threads = config.threads != 0 ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, pending.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);

  return aggregate_fits(config, fits);
}

TableFormat parse_table_format(std::string_view name) {
  if (name == "csv") return TableFormat::kCsv;
  if (name == "json") return TableFormat::kJson;
  if (name == "text") return TableFormat::kText;
  throw Error(ErrorCode::kInvalidConfig, fmt::format("unknown format '{}' (expected csv, json or text)", name));
}

std::vector<CellResult> ordered(std::vector<CellResult> results) {
  std::map<std::string, std::size_t> setting_rank;
  std::map<std::string, std::size_t> prior_rank;
  for (const auto& r : results) {
    setting_rank.emplace(r.setting, setting_rank.size());
    prior_rank.emplace(r.prior, prior_rank.size());
  }
  std::stable_sort(results.begin(), results.end(), [&](const CellResult& a, const CellResult& b) {
    return std::tuple(setting_rank[a.setting], a.parameter, a.n, prior_rank[a.prior]) <
           std::tuple(setting_rank[b.setting], b.parameter, b.n, prior_rank[b.prior]);
  });
  return results;
}

namespace {

std::string render_csv(const std::vector<CellResult>& results) {
  std::string out = "setting,parameter,n,prior,truth,bias,mse,coverage,n_ok,n_failed\n";
  for (const auto& r : results) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.setting, to_string(r.parameter), r.n, r.prior,
                       format_real(r.truth), format_real(r.bias), format_real(r.mse), format_real(r.coverage),
                       r.n_ok, r.n_failed);
  }
  return out;
}

std::string json_number(double x) { return std::isnan(x) ? std::string("null") : fmt::format("{:.17g}", x); }

std::string render_json(const std::vector<CellResult>& results) {
  std::string out = "[\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    out += fmt::format(
        "  {{\"setting\": \"{}\", \"parameter\": \"{}\", \"n\": {}, \"prior\": \"{}\", \"truth\": {}, "
        "\"bias\": {}, \"mse\": {}, \"coverage\": {}, \"n_ok\": {}, \"n_failed\": {}}}{}\n",
        r.setting, to_string(r.parameter), r.n, r.prior, json_number(r.truth), json_number(r.bias),
        json_number(r.mse), json_number(r.coverage), r.n_ok, r.n_failed, i + 1 < results.size() ? "," : "");
  }
  out += "]\n";
  return out;
}

// One block per metric laid out like the published tables: a row per
// (setting, parameter, n) and a column per prior.
std::string render_text(const std::vector<CellResult>& results) {
  std::vector<std::string> priors;
  for (const auto& r : results) {
    if (std::find(priors.begin(), priors.end(), r.prior) == priors.end()) priors.push_back(r.prior);
  }
  using RowKey = std::tuple<std::string, Parameter, int>;
  std::vector<RowKey> rows;
  std::map<std::pair<RowKey, std::string>, const CellResult*> cells;
  for (const auto& r : results) {
    RowKey key{r.setting, r.parameter, r.n};
    if (rows.empty() || rows.back() != key) rows.push_back(key);
    cells[{key, r.prior}] = &r;
  }

  constexpr int kWidth = 12;
  std::string out;
  struct Metric {
    const char* title;
    double CellResult::*field;
    const char* spec;
  };
  const Metric metrics[] = {{"Bias", &CellResult::bias, "{:.3f}"},
                            {"MSE", &CellResult::mse, "{:.3f}"},
                            {"Coverage", &CellResult::coverage, "{:.2f}"}};
  for (const auto& metric : metrics) {
    out += fmt::format("{}\n", metric.title);
    out += fmt::format("{:<8}{:<8}{:>6}", "Disp.", "Param.", "n");
    for (const auto& p : priors) out += fmt::format("{:>{}}", p, kWidth);
    out += '\n';
    std::string last_setting;
    int last_param = -1;
    for (const auto& key : rows) {
      const auto& [setting, param, n] = key;
      const bool new_setting = setting != last_setting;
      const bool new_param = new_setting || static_cast<int>(param) != last_param;
      out += fmt::format("{:<8}{:<8}{:>6}", new_setting ? setting : "", new_param ? std::string(to_string(param)) : "",
                         n);
      for (const auto& p : priors) {
        const auto it = cells.find({key, p});
        std::string text;
        if (it == cells.end()) {
          text = "";
        } else if (it->second->empty()) {
          text = fmt::format("— ({} failed)", it->second->n_failed);
        } else {
          text = fmt::format(fmt::runtime(metric.spec), it->second->*metric.field);
        }
        out += fmt::format("{:>{}}", text, kWidth);
      }
      out += '\n';
      last_setting = setting;
      last_param = static_cast<int>(param);
    }
    out += '\n';
  }

  std::string failures;
  for (const auto& r : results) {
    if (r.n_failed > 0 && r.parameter == Parameter::kLambda) {
      failures += fmt::format("  {} n={} {}: {} of {} fits failed\n", r.setting, r.n, r.prior, r.n_failed,
                              r.n_failed + r.n_ok);
    }
  }
  if (!failures.empty()) out += "Failed fits (excluded from the tables above)\n" + failures;
  return out;
}

}  // namespace

std::string render_tables(const std::vector<CellResult>& results, TableFormat format) {
  if (results.empty()) throw Error(ErrorCode::kEmptyData, "no study results to render");
  const auto sorted = ordered(results);
  switch (format) {
    case TableFormat::kCsv: return render_csv(sorted);
    case TableFormat::kJson: return render_json(sorted);
    case TableFormat::kText: return render_text(sorted);
  }
  return {};
}

std::vector<CellResult> parse_results_csv(std::string_view csv) {
  std::vector<CellResult> out;
  bool header = true;
  for (std::string_view raw : split(csv, '\n')) {
    const auto line = trim(raw);
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 10) throw Error(ErrorCode::kParseError, fmt::format("malformed results row '{}'", line));
    CellResult r;
    r.setting = std::string(f[0]);
    if (f[1] == "lambda") {
      r.parameter = Parameter::kLambda;
    } else if (f[1] == "nu") {
      r.parameter = Parameter::kNu;
    } else {
      throw Error(ErrorCode::kParseError, fmt::format("unknown parameter '{}'", f[1]));
    }
    r.n = parse_number<int>(f[2], "n");
    r.prior = std::string(f[3]);
    r.truth = parse_real(f[4], "truth");
    r.bias = parse_real(f[5], "bias");
    r.mse = parse_real(f[6], "mse");
    r.coverage = parse_real(f[7], "coverage");
    r.n_ok = parse_number<int>(f[8], "n_ok");
    r.n_failed = parse_number<int>(f[9], "n_failed");
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace cmpbayes
