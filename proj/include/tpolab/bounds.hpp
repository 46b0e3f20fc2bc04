#pragma once

#include <string>
#include <vector>

#include "tpolab/tpo.hpp"
#include "tpolab/types.hpp"

namespace tpolab {

struct BoundReport {
  std::string bound_name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool satisfied = false;
  double slack = 0.0;  // rhs-lhs for upper bounds, lhs-rhs for lower bounds
  std::string parameters;
};

BoundReport make_upper_report(std::string name, double lhs, double rhs,
                              std::string parameters = {});
BoundReport make_lower_report(std::string name, double lhs, double rhs,
                              std::string parameters = {});

/// kappa(x) = (x-1)^2 / (x-1-log x), increasing on (1, inf) with limit 2 at
/// x -> 1+ (evaluated by series near 1).
double kappa(double x);

/// Coverage/value-gap bound: Cov^{pi*|pi} <= 1 + kappa(e^{2Rmax/beta})
/// * (J(pi*) - J(pi)) / beta for any ratio-bounded pi.
BoundReport cov_gap_upper_bound(const PolicyTable& pi,
                                const BanditInstance& inst);

/// Exponential-moment bound: Cov^{pi*|pi*_r} <= min_b E_rho[ (E_{a~pi*}
/// exp(|r*-r-b|/beta))^2 ], the min taken over a grid plus golden-section
/// refinement.
BoundReport cov_exp_upper_bound(const RewardTable& r,
                                const BanditInstance& inst);

/// Win-rate lower bound on Cov^{pi*|pi}, maximized over a log-spaced gamma
/// grid and the comparator set; both preference-direction variants are
/// evaluated.
BoundReport win_rate_cov_lower_bound(const PolicyTable& pi,
                                     const BanditInstance& inst,
                                     const std::vector<PolicyTable>& comparators);

/// | [J(pi*) - J(pi)] - beta * E_rho[KL(pi || pi*)] |, an exact identity.
double kl_value_identity_residual(const PolicyTable& pi,
                                  const BanditInstance& inst);

/// |x - y| <= 4 e^C |sigma(x) - sigma(y)| for x, y in [-C, C].
BoundReport sigmoid_gap_check(double x, double y, double C);

/// Per-transfer-step diagnostic
///   Rmax e^{2Rmax} * min(Cov^{pi*|pi_mix^tau}, sqrt(Cov_inf(cls))/alpha)
///   * sqrt(1/tau)
/// with logarithmic factors set to 1. Trend-plot only, never pass/fail.
std::vector<double> iota_diagnostic(const RunResult& run,
                                    const PolicyClass& cls,
                                    const BanditInstance& inst,
                                    const std::vector<RewardTable>& sources,
                                    double alpha);

}  // namespace tpolab
