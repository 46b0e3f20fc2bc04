#include "tpolab/bounds.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "tpolab/core.hpp"

namespace tpolab {

namespace {
constexpr double kReportTol = 1e-9;

double golden_min(double lo, double hi, const std::function<double(double)>& f) {
  const double phi = 0.6180339887498949;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 80; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = f(x2);
    }
  }
  return f(0.5 * (lo + hi));
}

}  // namespace

BoundReport make_upper_report(std::string name, double lhs, double rhs,
                              std::string parameters) {
  BoundReport rep;
  rep.bound_name = std::move(name);
  rep.lhs = lhs;
  rep.rhs = rhs;
  rep.slack = rhs - lhs;
  rep.satisfied = lhs <= rhs + kReportTol;
  rep.parameters = std::move(parameters);
  return rep;
}

BoundReport make_lower_report(std::string name, double lhs, double rhs,
                              std::string parameters) {
  BoundReport rep;
  rep.bound_name = std::move(name);
  rep.lhs = lhs;
  rep.rhs = rhs;
  rep.slack = lhs - rhs;
  rep.satisfied = lhs >= rhs - kReportTol;
  rep.parameters = std::move(parameters);
  return rep;
}

double kappa(double x) {
  if (!(x > 1.0)) {
    throw ValidationError("kappa: domain is x > 1");
  }
  const double u = x - 1.0;
  if (u < 1e-6) {
    // kappa(1+u) = 2 / (1 - 2u/3 + u^2/2 - 2u^3/5 + ...)
    return 2.0 / (1.0 - 2.0 * u / 3.0 + u * u / 2.0);
  }
  return u * u / (u - std::log1p(u));
}

BoundReport cov_gap_upper_bound(const PolicyTable& pi,
                                const BanditInstance& inst) {
  const double limit = inst.r_max() / inst.beta() + 1e-9;
  if (max_abs_log_ratio(pi, inst.pi_ref()) > limit) {
    throw ValidationError("cov_gap_upper_bound: policy violates ratio bound");
  }
  const double lhs =
      coverage_coefficient(inst.optimal_policy(), pi, inst.rho());
  const double gap =
      inst.optimal_value() - policy_value(pi, inst.r_star(), inst);
  const double rhs =
      1.0 + kappa(std::exp(2.0 * inst.r_max() / inst.beta())) * gap /
                inst.beta();
  std::ostringstream params;
  params << "beta=" << inst.beta() << ";r_max=" << inst.r_max();
  return make_upper_report("cov_gap_upper", lhs, rhs, params.str());
}

BoundReport cov_exp_upper_bound(const RewardTable& r,
                                const BanditInstance& inst) {
  if (!r.values().allFinite()) {
    throw ValidationError("cov_exp_upper_bound: reward must be finite");
  }
  const PolicyTable pi_r = closed_form_policy(r, inst);
  const PolicyTable& pi_star = inst.optimal_policy();
  const double lhs = coverage_coefficient(pi_star, pi_r, inst.rho());

  const Matrix err = inst.r_star().values() - r.values();
  auto objective = [&](double b) {
    double total = 0.0;
    for (Eigen::Index s = 0; s < inst.num_states(); ++s) {
      const double inner =
          (pi_star.probs().row(s).array() *
           ((err.row(s).array() - b).abs() / inst.beta()).exp())
              .sum();
      total += inst.rho()(s) * inner * inner;
    }
    return total;
  };

  const int grid = 401;
  const double lo = -inst.r_max(), hi = inst.r_max();
  double best_b = lo;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid; ++i) {
    const double b = lo + (hi - lo) * i / (grid - 1);
    const double v = objective(b);
    if (v < best) {
      best = v;
      best_b = b;
    }
  }
  const double h = (hi - lo) / (grid - 1);
  const double refined = golden_min(std::max(lo, best_b - h),
                                    std::min(hi, best_b + h), objective);
  const double rhs = std::min(best, refined);
  std::ostringstream params;
  params << "beta=" << inst.beta() << ";b*~" << best_b;
  return make_upper_report("cov_exp_upper", lhs, rhs, params.str());
}

BoundReport win_rate_cov_lower_bound(
    const PolicyTable& pi, const BanditInstance& inst,
    const std::vector<PolicyTable>& comparators) {
  if (comparators.empty()) {
    throw ValidationError("win_rate_cov_lower_bound: no comparators");
  }
  const PolicyTable& pi_star = inst.optimal_policy();
  const double lhs = coverage_coefficient(pi_star, pi, inst.rho());

  double best = -std::numeric_limits<double>::infinity();
  double best_gamma = 0.0;
  int best_comparator = 0;
  for (std::size_t c = 0; c < comparators.size(); ++c) {
    const PolicyTable& bar = comparators[c];
    const double gap =
        std::max(inst.optimal_value() - policy_value(bar, inst.r_star(), inst),
                 0.0);
    const double kl_term = std::sqrt(gap / (2.0 * inst.beta()));
    const double p_bar_over_pi = win_rate(bar, pi, inst.r_star(), inst);
    const double p_pi_over_bar = 1.0 - p_bar_over_pi;
    for (int g = 0; g < 71; ++g) {
      const double gamma = std::pow(10.0, -3.0 + 7.0 * g / 70.0);
      const double log_term = std::log((1.0 + gamma) / gamma);
      for (const double p : {p_bar_over_pi, p_pi_over_bar}) {
        const double denom =
            std::sqrt((gamma + 2.0 * p) * log_term) + kl_term;
        const double value = 1.0 / denom;
        if (value > best) {
          best = value;
          best_gamma = gamma;
          best_comparator = static_cast<int>(c);
        }
      }
    }
  }
  std::ostringstream params;
  params << "gamma=" << best_gamma << ";comparator=" << best_comparator;
  return make_lower_report("win_rate_cov_lower", lhs, best, params.str());
}

double kl_value_identity_residual(const PolicyTable& pi,
                                  const BanditInstance& inst) {
  const double gap =
      inst.optimal_value() - policy_value(pi, inst.r_star(), inst);
  const double kl =
      kl_divergence(pi, inst.optimal_policy(), inst.rho());
  return std::abs(gap - inst.beta() * kl);
}

BoundReport sigmoid_gap_check(double x, double y, double C) {
  if (!(C > 0.0) || std::abs(x) > C || std::abs(y) > C) {
    throw ValidationError("sigmoid_gap_check: need x,y in [-C, C]");
  }
  const double lhs = std::abs(x - y);
  const double rhs = 4.0 * std::exp(C) * std::abs(sigmoid(x) - sigmoid(y));
  std::ostringstream params;
  params << "C=" << C;
  return make_upper_report("sigmoid_gap", lhs, rhs, params.str());
}

std::vector<double> iota_diagnostic(const RunResult& run,
                                    const PolicyClass& cls,
                                    const BanditInstance& inst,
                                    const std::vector<RewardTable>& sources,
                                    double alpha) {
  std::vector<PolicyTable> source_policies;
  source_policies.reserve(sources.size());
  for (const RewardTable& r : sources) {
    source_policies.push_back(closed_form_policy(r, inst));
  }
  const double cov_inf_term =
      std::sqrt(linf_coverability(cls)) / alpha;
  const double scale =
      inst.r_max() * std::exp(2.0 * inst.r_max());

  Matrix mix_sum = Matrix::Zero(inst.num_states(), inst.num_actions());
  std::vector<double> out;
  for (const RegretRow& row : run.trace) {
    const Matrix* probs = nullptr;
    switch (row.played.origin) {
      case PolicyOrigin::Reference:
        probs = &inst.pi_ref().probs();
        break;
      case PolicyOrigin::Online: {
        if (row.played.id < 0) {
          probs = &inst.pi_ref().probs();
        } else {
          int idx = -1;
          for (std::size_t i = 0; i < cls.ids.size(); ++i) {
            if (cls.ids[i] == row.played.id) {
              idx = static_cast<int>(i);
              break;
            }
          }
          if (idx < 0) {
            throw ValidationError("iota_diagnostic: unresolvable member tag");
          }
          probs = &cls.members[static_cast<std::size_t>(idx)].probs();
        }
        break;
      }
      case PolicyOrigin::Source:
        if (row.played.id < 0 ||
            row.played.id >= static_cast<int>(source_policies.size())) {
          throw ValidationError("iota_diagnostic: unresolvable source tag");
        }
        probs = &source_policies[static_cast<std::size_t>(row.played.id)]
                     .probs();
        break;
      case PolicyOrigin::Distilled:
        if (row.played.id < 0 ||
            row.played.id >= static_cast<int>(run.selection_log.size())) {
          throw ValidationError("iota_diagnostic: unresolvable distilled tag");
        }
        probs = &run.selection_log[static_cast<std::size_t>(row.played.id)]
                     .chosen_policy.probs();
        break;
    }
    mix_sum += *probs;
    const bool transfer_step = row.played.origin == PolicyOrigin::Source ||
                               row.played.origin == PolicyOrigin::Distilled;
    if (!transfer_step) continue;
    const double tau = static_cast<double>(row.step);
    const Matrix mix = mix_sum / tau;
    double cov = 0.0;
    for (Eigen::Index s = 0; s < inst.num_states(); ++s) {
      const auto t = inst.optimal_policy().probs().row(s).array();
      cov += inst.rho()(s) * (t.square() / mix.row(s).array()).sum();
    }
    out.push_back(scale * std::min(cov, cov_inf_term) / std::sqrt(tau));
  }
  return out;
}

}  // namespace tpolab
