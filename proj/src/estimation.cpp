#include "tpolab/estimation.hpp"

#include <cmath>
#include <limits>

namespace tpolab {

double nll_loss(const RewardTable& r, const PreferenceDataset& data) {
  if (data.empty()) throw ValidationError("nll_loss: empty dataset");
  double total = 0.0;
  for (const PreferenceSample& s : data.samples) {
    const double diff = r(s.s, s.a) - r(s.s, s.a_tilde);
    total += s.y ? -log_sigmoid(diff) : -log_sigmoid(-diff);
  }
  return total / static_cast<double>(data.size());
}

double hellinger_sq_bt(const RewardTable& r1, const RewardTable& r2, int s,
                       int a, int a_tilde) {
  const double p1 = bt_prob(r1, s, a, a_tilde);
  const double p2 = bt_prob(r2, s, a, a_tilde);
  return 1.0 - std::sqrt(p1 * p2) - std::sqrt((1.0 - p1) * (1.0 - p2));
}

double value_vs_ref(const PolicyTable& pi, const RewardTable& r,
                    const BanditInstance& inst) {
  if (pi.states() != inst.num_states() || pi.actions() != inst.num_actions() ||
      r.states() != inst.num_states() || r.actions() != inst.num_actions()) {
    throw ValidationError("value_vs_ref: dimension mismatch");
  }
  double total = 0.0;
  for (Eigen::Index s = 0; s < pi.states(); ++s) {
    const auto p = pi.probs().row(s).array();
    const auto q = inst.pi_ref().probs().row(s).array();
    const auto rv = r.values().row(s).array();
    const double ediff = (p * rv).sum() - (q * rv).sum();
    const double kl = (p * (p.log() - inst.log_pi_ref().row(s).array())).sum();
    total += inst.rho()(s) * (ediff - inst.beta() * kl);
  }
  return total;
}

double rpo_eta_appendix(const BanditInstance& inst, std::size_t class_size,
                        std::size_t data_size, double delta) {
  const double c = 1.0 + std::exp(inst.r_max());
  return std::sqrt(24.0 * std::log(static_cast<double>(class_size) / delta) /
                   static_cast<double>(data_size)) /
         (c * c);
}

double rpo_eta_alg2(const BanditInstance& inst, std::size_t class_size,
                    std::size_t data_size, double delta, double T, double c) {
  const double d = 1.0 + std::exp(inst.r_max());
  return c *
         std::sqrt(std::log(static_cast<double>(class_size) * T / delta) /
                   static_cast<double>(data_size)) /
         (d * d);
}

ClassTables::ClassTables(const PolicyClass& cls, const BanditInstance& inst) {
  const std::size_t m = cls.size();
  induced_rewards.reserve(m);
  for (const PolicyTable& pi : cls.members) {
    induced_rewards.push_back(reward_from_policy(pi, inst));
  }
  ediff.resize(m, m);
  kl_to_ref.resize(m);
  j_value.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    kl_to_ref(i) = kl_divergence(cls.members[i], inst.pi_ref(), inst.rho());
    j_value(i) = policy_value(cls.members[i], inst.r_star(), inst);
    for (std::size_t j = 0; j < m; ++j) {
      const Matrix& rv = induced_rewards[j].values();
      double e = 0.0;
      for (Eigen::Index s = 0; s < inst.num_states(); ++s) {
        e += inst.rho()(s) *
             ((cls.members[i].probs().row(s) - inst.pi_ref().probs().row(s))
                  .dot(rv.row(s)));
      }
      ediff(i, j) = e;
    }
  }
}

void NllAccumulator::add(const PreferenceSample& s) {
  for (std::size_t j = 0; j < rewards_->size(); ++j) {
    const RewardTable& r = (*rewards_)[j];
    const double diff = r(s.s, s.a) - r(s.s, s.a_tilde);
    sums_(static_cast<Eigen::Index>(j)) +=
        s.y ? -log_sigmoid(diff) : -log_sigmoid(-diff);
  }
  ++count_;
}

Vector NllAccumulator::means() const {
  if (count_ == 0) throw ValidationError("nll accumulator is empty");
  return sums_ / static_cast<double>(count_);
}

int mle_reward_index(const PolicyClass& cls, const Vector& nll_means) {
  if (cls.empty()) throw ValidationError("mle_reward: empty class");
  int best = 0;
  for (int j = 1; j < nll_means.size(); ++j) {
    if (nll_means(j) < nll_means(best)) best = j;
  }
  (void)cls;
  return best;
}

RewardTable mle_reward(const PolicyClass& cls, const PreferenceDataset& data,
                       const BanditInstance& inst) {
  if (cls.empty()) throw ValidationError("mle_reward: empty class");
  if (data.empty()) throw ValidationError("mle_reward: empty dataset");
  ClassTables tables(cls, inst);
  NllAccumulator acc(&tables.induced_rewards);
  for (const PreferenceSample& s : data.samples) acc.add(s);
  return tables.induced_rewards[static_cast<std::size_t>(
      mle_reward_index(cls, acc.means()))];
}

namespace {

// Inner minimization of (1/eta) L_D(r) + lambda . ediff(., r) over R^Pi.
int inner_min_reward(const Matrix& ediff, const Vector& nll_means,
                     const Vector& lambda, double inv_eta, double* value) {
  const Eigen::Index m = nll_means.size();
  int best = 0;
  double best_v = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < m; ++j) {
    const double v = inv_eta * nll_means(j) + lambda.dot(ediff.col(j));
    if (v < best_v) {
      best_v = v;
      best = static_cast<int>(j);
    }
  }
  if (value) *value = best_v;
  return best;
}

double mixture_kl_to_ref(const PolicyClass& cls, const Vector& lambda,
                         const BanditInstance& inst, Matrix* mix_out) {
  Matrix mix = Matrix::Zero(inst.num_states(), inst.num_actions());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) > 0.0) mix += lambda(i) * cls.members[i].probs();
  }
  double kl = 0.0;
  for (Eigen::Index s = 0; s < mix.rows(); ++s) {
    const auto p = mix.row(s).array();
    kl += inst.rho()(s) *
          (p * (p.log() - inst.log_pi_ref().row(s).array())).sum();
  }
  if (mix_out) *mix_out = std::move(mix);
  return kl;
}

// Full objective G(lambda) for the mixture parameterization.
double mixture_objective(const PolicyClass& cls, const ClassTables& tables,
                         const Vector& nll_means, const BanditInstance& inst,
                         double inv_eta, const Vector& lambda,
                         int* active_reward, double* inner_value) {
  double inner = 0.0;
  const int j = inner_min_reward(tables.ediff, nll_means, lambda, inv_eta,
                                 &inner);
  if (active_reward) *active_reward = j;
  if (inner_value) *inner_value = inner;
  return inner - inst.beta() * mixture_kl_to_ref(cls, lambda, inst, nullptr);
}

}  // namespace

RpoSolution rpo_solve_stats(const PolicyClass& cls, const ClassTables& tables,
                            const Vector& nll_means, const BanditInstance& inst,
                            double eta, RpoMode mode) {
  if (cls.empty()) throw ValidationError("rpo_solve: empty class");
  if (!(eta > 0.0)) throw ValidationError("rpo_solve: eta must be positive");
  const double inv_eta = 1.0 / eta;
  const Eigen::Index m = static_cast<Eigen::Index>(cls.size());

  // Enumerate pass; also the warm start for mixture mode.
  int best_i = 0, best_j = 0;
  double best_obj = -std::numeric_limits<double>::infinity();
  double best_inner = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    double inner = std::numeric_limits<double>::infinity();
    int j = 0;
    for (Eigen::Index jj = 0; jj < m; ++jj) {
      const double v = inv_eta * nll_means(jj) + tables.ediff(i, jj);
      if (v < inner) {
        inner = v;
        j = static_cast<int>(jj);
      }
    }
    const double obj = inner - inst.beta() * tables.kl_to_ref(i);
    if (obj > best_obj) {
      best_obj = obj;
      best_i = static_cast<int>(i);
      best_j = j;
      best_inner = inner;
    }
  }

  RpoSolution sol;
  sol.mode = mode;
  if (mode == RpoMode::Enumerate) {
    sol.pi_dstl = cls.members[static_cast<std::size_t>(best_i)];
    sol.mixture_weights = Vector::Zero(m);
    sol.mixture_weights(best_i) = 1.0;
    sol.member_index = best_i;
    sol.reward_index = best_j;
    sol.r_dstl = tables.induced_rewards[static_cast<std::size_t>(best_j)];
    sol.objective = best_obj;
    sol.inner_min_value = best_inner;
    sol.converged = true;
    return sol;
  }

  // Frank-Wolfe over mixture weights, warm-started at the best vertex. The
  // objective is concave (min of affine functions of lambda plus a concave
  // -beta*KL term), so the FW gap certifies convergence.
  Vector lambda = Vector::Zero(m);
  lambda(best_i) = 1.0;
  const int max_iters = 500;
  const double gap_tol = 1e-8;
  bool converged = false;
  int active = best_j;
  double inner_val = best_inner;
  double obj = best_obj;
  Matrix mix(inst.num_states(), inst.num_actions());
  for (int it = 0; it < max_iters; ++it) {
    obj = mixture_objective(cls, tables, nll_means, inst, inv_eta, lambda,
                            &active, &inner_val);
    // Supergradient of G at lambda using the active inner reward.
    mixture_kl_to_ref(cls, lambda, inst, &mix);
    Vector grad(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      double kl_term = 0.0;
      for (Eigen::Index s = 0; s < mix.rows(); ++s) {
        const auto pi_i = cls.members[i].probs().row(s).array();
        const auto mix_s = mix.row(s).array();
        kl_term += inst.rho()(s) *
                   (pi_i *
                    (mix_s.log() - inst.log_pi_ref().row(s).array() + 1.0))
                       .sum();
      }
      grad(i) = tables.ediff(i, active) - inst.beta() * kl_term;
    }
    Eigen::Index vertex = 0;
    grad.maxCoeff(&vertex);
    Vector direction = -lambda;
    direction(vertex) += 1.0;
    const double gap = grad.dot(direction);
    if (gap < gap_tol) {
      converged = true;
      break;
    }
    // Golden-section line search along the FW segment.
    const double phi = 0.6180339887498949;
    double lo = 0.0, hi = 1.0;
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    auto eval = [&](double t) {
      Vector trial = lambda + t * direction;
      return mixture_objective(cls, tables, nll_means, inst, inv_eta, trial,
                               nullptr, nullptr);
    };
    double f1 = eval(x1), f2 = eval(x2);
    for (int ls = 0; ls < 40; ++ls) {
      if (f1 < f2) {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + phi * (hi - lo);
        f2 = eval(x2);
      } else {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - phi * (hi - lo);
        f1 = eval(x1);
      }
    }
    const double step = 0.5 * (lo + hi);
    if (step <= 0.0) {
      converged = true;
      break;
    }
    lambda += step * direction;
    lambda = lambda.cwiseMax(0.0);
    lambda /= lambda.sum();
  }
  obj = mixture_objective(cls, tables, nll_means, inst, inv_eta, lambda,
                          &active, &inner_val);

  sol.mixture_weights = lambda;
  sol.pi_dstl = mixture_policy(cls.members, lambda);
  sol.member_index = -1;
  sol.reward_index = active;
  sol.r_dstl = tables.induced_rewards[static_cast<std::size_t>(active)];
  sol.objective = obj;
  sol.inner_min_value = inner_val;
  sol.converged = converged;
  return sol;
}

RpoSolution rpo_solve(const PolicyClass& cls, const PreferenceDataset& data,
                      const BanditInstance& inst, double eta, RpoMode mode) {
  if (data.empty()) throw ValidationError("rpo_solve: empty dataset");
  ClassTables tables(cls, inst);
  NllAccumulator acc(&tables.induced_rewards);
  for (const PreferenceSample& s : data.samples) acc.add(s);
  return rpo_solve_stats(cls, tables, acc.means(), inst, eta, mode);
}

}  // namespace tpolab
