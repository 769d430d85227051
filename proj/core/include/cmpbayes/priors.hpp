#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cmpbayes/cmp.hpp"

namespace cmpbayes {

/// Hyperparameters of the conjugate family
///   pi(lambda, nu) ∝ lambda^(a-1) exp(-nu b) Z(lambda, nu)^(-c).
/// All three must be strictly positive; that alone does not make the prior
/// proper (see conjugate_propriety).
class ConjugateHyper {
 public:
  ConjugateHyper(double a, double b, double c);

  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  double c() const noexcept { return c_; }

  /// Hyperparameters after observing data summarized by stats.
  ConjugateHyper updated(const SufficientStats& stats) const;

  friend bool operator==(const ConjugateHyper&, const ConjugateHyper&) = default;

 private:
  double a_;
  double b_;
  double c_;
};

/// The (a, b, c) -> 0 limit, pi ∝ 1/lambda. Improper.
struct FlatPrior {
  friend bool operator==(const FlatPrior&, const FlatPrior&) = default;
};

/// sqrt(det I(lambda, nu)) from the single-observation Fisher information.
/// Improper; propriety is not decided here.
struct JeffreysPrior {
  friend bool operator==(const JeffreysPrior&, const JeffreysPrior&) = default;
};

using PriorSpec = std::variant<ConjugateHyper, FlatPrior, JeffreysPrior>;

/// Both sides of the propriety inequality
///   b/c > ln(floor(a/c)!) + (a/c - floor(a/c)) ln(floor(a/c) + 1).
struct ProprietyCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool proper = false;
};

ProprietyCheck conjugate_propriety_check(const ConjugateHyper& h);
bool conjugate_propriety(const ConjugateHyper& h);

/// True only for conjugate specs passing conjugate_propriety.
bool is_proper(const PriorSpec& spec);

struct NamedPrior {
  std::string name;
  PriorSpec spec;
};

/// conj-1, conj-data, conj-0.1, conj-0.01, flat, jeffreys, in that order.
std::vector<NamedPrior> preset_priors();

/// Throws kUnknownPrior.
PriorSpec find_preset(std::string_view name);

std::string describe(const PriorSpec& spec);

/// 0.5 ln det of the single-observation Fisher information,
///   det = [Var(X)/lambda^2] Var(ln X!) - [Cov(X, ln X!)/lambda]^2.
/// Throws kNonpositiveDeterminant when det <= 0.
double jeffreys_log_density(const CmpParams& params, const TruncationPolicy& policy = {});

/// Same quantity from moments already computed at params.
double jeffreys_log_density(const CmpMoments& m, const CmpParams& params);

/// Unnormalized log prior density. Jeffreys requires nu > 0.
double log_prior_density(const PriorSpec& spec, const CmpParams& params,
                         const TruncationPolicy& policy = {});

}  // namespace cmpbayes
