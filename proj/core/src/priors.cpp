#include "cmpbayes/priors.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "cmpbayes/error.hpp"

namespace cmpbayes {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

ConjugateHyper::ConjugateHyper(double a, double b, double c) : a_(a), b_(b), c_(c) {
  if (!(a > 0.0 && b > 0.0 && c > 0.0) || !std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c)) {
    throw Error(ErrorCode::kInvalidHyper,
                fmt::format("conjugate hyperparameters must be positive and finite, got a={}, b={}, c={}", a, b, c));
  }
}

ConjugateHyper ConjugateHyper::updated(const SufficientStats& stats) const {
  return {a_ + static_cast<double>(stats.s1), b_ + stats.s2, c_ + static_cast<double>(stats.n)};
}

ProprietyCheck conjugate_propriety_check(const ConjugateHyper& h) {
  const double ratio = h.a() / h.c();
  const double whole = std::floor(ratio);
  ProprietyCheck check;
  check.lhs = h.b() / h.c();
  check.rhs = ln_factorial(static_cast<std::int64_t>(whole)) + (ratio - whole) * std::log(whole + 1.0);
  check.proper = check.lhs > check.rhs;
  return check;
}

bool conjugate_propriety(const ConjugateHyper& h) { return conjugate_propriety_check(h).proper; }

bool is_proper(const PriorSpec& spec) {
  const auto* conj = std::get_if<ConjugateHyper>(&spec);
  return conj != nullptr && conjugate_propriety(*conj);
}

std::vector<NamedPrior> preset_priors() {
  return {
      {"conj-1", ConjugateHyper{1.0, 1.0, 1.0}},
      {"conj-data", ConjugateHyper{2.0, std::numbers::ln2, 2.0}},
      {"conj-0.1", ConjugateHyper{0.1, 0.1, 0.1}},
      {"conj-0.01", ConjugateHyper{0.01, 0.01, 0.01}},
      {"flat", FlatPrior{}},
      {"jeffreys", JeffreysPrior{}},
  };
}

PriorSpec find_preset(std::string_view name) {
  for (auto& preset : preset_priors()) {
    if (preset.name == name) return preset.spec;
  }
  throw Error(ErrorCode::kUnknownPrior,
              fmt::format("unknown prior '{}' (expected conj-1, conj-data, conj-0.1, conj-0.01, flat or jeffreys)",
                          name));
}

std::string describe(const PriorSpec& spec) {
  return std::visit(Overloaded{
                        [](const ConjugateHyper& h) {
                          return fmt::format("conjugate(a={}, b={}, c={})", h.a(), h.b(), h.c());
                        },
                        [](const FlatPrior&) { return std::string("flat"); },
                        [](const JeffreysPrior&) { return std::string("jeffreys"); },
                    },
                    spec);
}

double jeffreys_log_density(const CmpParams& params, const TruncationPolicy& policy) {
  if (!(params.nu() > 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "Jeffreys prior requires nu > 0");
  }
  return jeffreys_log_density(moments(params, policy), params);
}

double jeffreys_log_density(const CmpMoments& m, const CmpParams& params) {
  if (!(params.nu() > 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "Jeffreys prior requires nu > 0");
  }
  const double lambda = params.lambda();
  const double det = (m.var_x * m.var_lnfact - m.cov_x_lnfact * m.cov_x_lnfact) / (lambda * lambda);
  if (!(det > 0.0)) {
    throw Error(ErrorCode::kNonpositiveDeterminant,
                fmt::format("Fisher information determinant {} at lambda = {}, nu = {}", det, lambda, params.nu()));
  }
  return 0.5 * std::log(det);
}

double log_prior_density(const PriorSpec& spec, const CmpParams& params, const TruncationPolicy& policy) {
  return std::visit(Overloaded{
                        [&](const ConjugateHyper& h) {
                          return (h.a() - 1.0) * std::log(params.lambda()) - params.nu() * h.b() -
                                 h.c() * log_normalizer(params, policy);
                        },
                        [&](const FlatPrior&) { return -std::log(params.lambda()); },
                        [&](const JeffreysPrior&) { return jeffreys_log_density(params, policy); },
                    },
                    spec);
}

}  // namespace cmpbayes
