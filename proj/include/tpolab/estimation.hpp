#pragma once

#include <cstddef>
#include <vector>

#include "tpolab/core.hpp"
#include "tpolab/types.hpp"

namespace tpolab {

/// Average negative log-likelihood of a reward on preference data.
double nll_loss(const RewardTable& r, const PreferenceDataset& data);

/// Squared Hellinger distance between the BT label distributions of two
/// rewards at one comparison.
double hellinger_sq_bt(const RewardTable& r1, const RewardTable& r2, int s,
                       int a, int a_tilde);

/// E_{rho,pi}[r] - E_{rho,pi_ref}[r] - beta*KL(pi||pi_ref). With r = r_star
/// this equals J_beta(pi) - J_beta(pi_ref) exactly.
double value_vs_ref(const PolicyTable& pi, const RewardTable& r,
                    const BanditInstance& inst);

/// Default eta for the offline learner (appendix form).
double rpo_eta_appendix(const BanditInstance& inst, std::size_t class_size,
                        std::size_t data_size, double delta);
/// Alternative eta stated alongside the selection algorithm; c defaults to 1.
double rpo_eta_alg2(const BanditInstance& inst, std::size_t class_size,
                    std::size_t data_size, double delta, double T, double c);

/// Per-(class, instance) tables reused across estimator calls: the induced
/// reward class, expected-reward gaps vs pi_ref, KL terms and true values.
struct ClassTables {
  std::vector<RewardTable> induced_rewards;  // one per member
  Matrix ediff;      // ediff(i,j) = E_{rho,pi_i}[r_j] - E_{rho,pi_ref}[r_j]
  Vector kl_to_ref;  // KL(pi_i || pi_ref)
  Vector j_value;    // J_beta(pi_i; r_star)

  ClassTables() = default;
  ClassTables(const PolicyClass& cls, const BanditInstance& inst);
};

/// Streaming per-reward NLL sums for an append-only dataset.
class NllAccumulator {
 public:
  NllAccumulator() = default;
  explicit NllAccumulator(const std::vector<RewardTable>* rewards)
      : rewards_(rewards), sums_(Vector::Zero(rewards->size())) {}

  void add(const PreferenceSample& s);
  std::size_t count() const { return count_; }
  /// Average NLL per reward; requires a non-empty accumulated set.
  Vector means() const;

 private:
  const std::vector<RewardTable>* rewards_ = nullptr;
  Vector sums_;
  std::size_t count_ = 0;
};

int mle_reward_index(const PolicyClass& cls, const Vector& nll_means);
/// NLL minimizer over the induced reward class R^Pi; ties break to the
/// lowest member id.
RewardTable mle_reward(const PolicyClass& cls, const PreferenceDataset& data,
                       const BanditInstance& inst);

enum class RpoMode { Enumerate, Mixture };

struct RpoSolution {
  PolicyTable pi_dstl;
  Vector mixture_weights;  // over class members (one-hot in enumerate mode)
  RewardTable r_dstl;
  int member_index = -1;   // enumerate mode: position of the chosen member
  int reward_index = -1;   // position of the inner minimizer in R^Pi
  double objective = 0.0;  // G(pi) at the optimum (see below)
  double inner_min_value = 0.0;  // inner min term alone at the optimum
  RpoMode mode = RpoMode::Enumerate;
  bool converged = true;
};

/// Pessimistic offline learner. Maximizes
///   G(pi) = min_{r in R^Pi} [ (1/eta) L_D(r)
///           + E_{rho,pi}[r] - E_{rho,pi_ref}[r] ] - beta*KL(pi||pi_ref)
/// over the class (enumerate) or its convex hull via Frank-Wolfe on the
/// mixture weights (mixture). The inner min is a full scan each step.
RpoSolution rpo_solve(const PolicyClass& cls, const PreferenceDataset& data,
                      const BanditInstance& inst, double eta, RpoMode mode);

/// Same solver on precomputed aggregates (used on the hot path).
RpoSolution rpo_solve_stats(const PolicyClass& cls, const ClassTables& tables,
                            const Vector& nll_means, const BanditInstance& inst,
                            double eta, RpoMode mode);

}  // namespace tpolab
