#include "tpolab/core.hpp"

#include <algorithm>
#include <cmath>

namespace tpolab {

namespace {

void check_dims(const BanditInstance& inst, Eigen::Index rows,
                Eigen::Index cols, const char* what) {
  if (rows != inst.num_states() || cols != inst.num_actions()) {
    throw ValidationError(std::string(what) +
                          ": dimensions do not match the instance");
  }
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  // -softplus(-x), stable on both tails.
  if (x > 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

PolicyTable closed_form_policy(const RewardTable& r,
                               const BanditInstance& inst) {
  check_dims(inst, r.states(), r.actions(), "closed_form_policy");
  if (!r.values().allFinite()) {
    throw ValidationError("closed_form_policy: reward must be finite");
  }
  Matrix logits = inst.log_pi_ref() + r.values() / inst.beta();
  Matrix probs(logits.rows(), logits.cols());
  for (Eigen::Index s = 0; s < logits.rows(); ++s) {
    const double m = logits.row(s).maxCoeff();
    probs.row(s) = (logits.row(s).array() - m).exp();
    probs.row(s) /= probs.row(s).sum();
  }
  return PolicyTable(std::move(probs));
}

double policy_value(const PolicyTable& pi, const RewardTable& r,
                    const BanditInstance& inst) {
  check_dims(inst, pi.states(), pi.actions(), "policy_value");
  check_dims(inst, r.states(), r.actions(), "policy_value");
  const Matrix& p = pi.probs();
  double value = 0.0;
  for (Eigen::Index s = 0; s < p.rows(); ++s) {
    const auto row = p.row(s).array();
    const double expected = (row * r.values().row(s).array()).sum();
    const double kl =
        (row * (row.log() - inst.log_pi_ref().row(s).array())).sum();
    value += inst.rho()(s) * (expected - inst.beta() * kl);
  }
  return value;
}

double kl_divergence(const PolicyTable& pi, const PolicyTable& pi2,
                     const Vector& rho) {
  if (pi.states() != pi2.states() || pi.actions() != pi2.actions() ||
      rho.size() != pi.states()) {
    throw ValidationError("kl_divergence: dimension mismatch");
  }
  double total = 0.0;
  for (Eigen::Index s = 0; s < pi.states(); ++s) {
    const auto p = pi.probs().row(s).array();
    const auto q = pi2.probs().row(s).array();
    total += rho(s) * (p * (p.log() - q.log())).sum();
  }
  return total;
}

double coverage_coefficient(const PolicyTable& target, const PolicyTable& base,
                            const Vector& rho) {
  if (target.states() != base.states() ||
      target.actions() != base.actions() || rho.size() != target.states()) {
    throw ValidationError("coverage_coefficient: dimension mismatch");
  }
  double total = 0.0;
  for (Eigen::Index s = 0; s < target.states(); ++s) {
    const auto t = target.probs().row(s).array();
    const auto b = base.probs().row(s).array();
    total += rho(s) * (t.square() / b).sum();
  }
  return total;
}

double linf_coverability(const PolicyClass& cls) {
  if (cls.empty()) {
    throw ValidationError("linf_coverability: empty class");
  }
  Matrix envelope = cls.members.front().probs();
  for (std::size_t i = 1; i < cls.members.size(); ++i) {
    envelope = envelope.cwiseMax(cls.members[i].probs());
  }
  return envelope.rowwise().sum().maxCoeff();
}

RewardTable reward_from_policy(const PolicyTable& pi,
                               const BanditInstance& inst) {
  check_dims(inst, pi.states(), pi.actions(), "reward_from_policy");
  Matrix log_ratio =
      inst.beta() * (pi.probs().array().log() - inst.log_pi_ref().array());
  for (Eigen::Index s = 0; s < log_ratio.rows(); ++s) {
    log_ratio.row(s).array() -= log_ratio.row(s).minCoeff();
  }
  log_ratio = log_ratio.cwiseMax(0.0).cwiseMin(inst.r_max());
  return RewardTable(std::move(log_ratio));
}

double max_abs_log_ratio(const PolicyTable& pi, const PolicyTable& ref) {
  return (pi.probs().array().log() - ref.probs().array().log())
      .abs()
      .maxCoeff();
}

PolicyClass bounded_ratio_filter(const PolicyClass& cls,
                                 const BanditInstance& inst) {
  // Slack absorbs roundoff: closed-form policies of rewards in [0, r_max]
  // sit exactly on the bound.
  const double limit = inst.r_max() / inst.beta() + 1e-9;
  PolicyClass out;
  for (std::size_t i = 0; i < cls.members.size(); ++i) {
    if (max_abs_log_ratio(cls.members[i], inst.pi_ref()) <= limit) {
      out.add(cls.members[i], cls.ids[i]);
    }
  }
  return out;
}

PolicyTable mixture_policy(const std::vector<PolicyTable>& policies,
                           const Vector& weights) {
  if (policies.empty() ||
      weights.size() != static_cast<Eigen::Index>(policies.size())) {
    throw ValidationError("mixture_policy: weights/policies mismatch");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (!(weights(i) >= 0.0)) {
      throw ValidationError("mixture_policy: weights must be >= 0");
    }
    sum += weights(i);
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError("mixture_policy: weights must sum to 1");
  }
  Matrix mix = Matrix::Zero(policies.front().states(),
                            policies.front().actions());
  for (std::size_t i = 0; i < policies.size(); ++i) {
    if (policies[i].states() != mix.rows() ||
        policies[i].actions() != mix.cols()) {
      throw ValidationError("mixture_policy: dimension mismatch");
    }
    mix += (weights(static_cast<Eigen::Index>(i)) / sum) * policies[i].probs();
  }
  return PolicyTable(std::move(mix));
}

double bt_prob(const RewardTable& r, int s, int a, int a_tilde) {
  if (s < 0 || s >= r.states() || a < 0 || a >= r.actions() || a_tilde < 0 ||
      a_tilde >= r.actions()) {
    throw ValidationError("bt_prob: index out of range");
  }
  return sigmoid(r(s, a) - r(s, a_tilde));
}

int sample_bt_label(const RewardTable& r, int s, int a, int a_tilde,
                    Rng& rng) {
  return rng.bernoulli(bt_prob(r, s, a, a_tilde));
}

double win_rate(const PolicyTable& pi, const PolicyTable& pi2,
                const RewardTable& r, const BanditInstance& inst) {
  check_dims(inst, pi.states(), pi.actions(), "win_rate");
  check_dims(inst, pi2.states(), pi2.actions(), "win_rate");
  double total = 0.0;
  const Eigen::Index acts = inst.num_actions();
  for (Eigen::Index s = 0; s < inst.num_states(); ++s) {
    double state_sum = 0.0;
    for (Eigen::Index a = 0; a < acts; ++a) {
      double inner = 0.0;
      for (Eigen::Index b = 0; b < acts; ++b) {
        inner += pi2(s, b) * sigmoid(r(s, a) - r(s, b));
      }
      state_sum += pi(s, a) * inner;
    }
    total += inst.rho()(s) * state_sum;
  }
  return total;
}

double win_rate_mc(const PolicyTable& pi, const PolicyTable& pi2,
                   const RewardTable& r, const BanditInstance& inst, int n,
                   Rng& rng) {
  if (n < 1) throw ValidationError("win_rate_mc: n must be >= 1");
  double wins = 0.0;
  for (int i = 0; i < n; ++i) {
    const int s = rng.categorical(inst.rho());
    const int a = rng.categorical(pi.probs().row(s).transpose());
    const int b = rng.categorical(pi2.probs().row(s).transpose());
    wins += sample_bt_label(r, s, a, b, rng);
  }
  return wins / n;
}

int BonSampler::sample(int s, Rng& rng) const {
  if (n_bon < 1) throw ValidationError("bon sampler: n_bon must be >= 1");
  int best = rng.categorical(base->probs().row(s).transpose());
  double best_r = (*source_r)(s, best);
  for (int i = 1; i < n_bon; ++i) {
    const int a = rng.categorical(base->probs().row(s).transpose());
    const double ra = (*source_r)(s, a);
    if (ra > best_r || (ra == best_r && a < best)) {
      best = a;
      best_r = ra;
    }
  }
  return best;
}

PolicyTable bon_policy_table(const PolicyTable& base,
                             const RewardTable& source_r, int n_bon) {
  if (n_bon < 1) throw ValidationError("bon_policy_table: n_bon must be >= 1");
  const Eigen::Index S = base.states();
  const Eigen::Index A = base.actions();
  Matrix out(S, A);
  std::vector<int> order(static_cast<std::size_t>(A));
  for (Eigen::Index s = 0; s < S; ++s) {
    for (Eigen::Index a = 0; a < A; ++a) order[a] = static_cast<int>(a);
    // Selection priority: higher source reward first, then lower index.
    std::sort(order.begin(), order.end(), [&](int x, int y) {
      const double rx = source_r(s, x);
      const double ry = source_r(s, y);
      return rx > ry || (rx == ry && x < y);
    });
    // Action k-th in priority is returned iff all draws avoid the k-1
    // higher-priority actions and at least one draw hits it.
    double allowed = 1.0;
    for (int a : order) {
      const double p = base(s, a);
      const double lower = std::max(allowed - p, 0.0);
      out(s, a) = std::pow(allowed, n_bon) - std::pow(lower, n_bon);
      allowed = lower;
    }
    out.row(s) /= out.row(s).sum();
  }
  return PolicyTable(std::move(out));
}

}  // namespace tpolab
