#pragma once

#include <vector>

#include "tpolab/rng.hpp"
#include "tpolab/types.hpp"

namespace tpolab {

double sigmoid(double x);
/// log(sigma(x)) evaluated as -log(1+e^{-x}) without cancellation.
double log_sigmoid(double x);

/// Optimal policy of the KL-regularized objective: pi(a|s) proportional to
/// pi_ref(a|s) * exp(r(s,a)/beta), normalized per row with a max shift so
/// small beta cannot overflow.
PolicyTable closed_form_policy(const RewardTable& r, const BanditInstance& inst);

/// J_beta(pi; r) = E_{rho,pi}[r] - beta * KL(pi || pi_ref), exact sums.
double policy_value(const PolicyTable& pi, const RewardTable& r,
                    const BanditInstance& inst);

/// E_{s~rho}[ KL(pi(.|s) || pi2(.|s)) ].
double kl_divergence(const PolicyTable& pi, const PolicyTable& pi2,
                     const Vector& rho);

/// Cov^{target|base} = E_{s~rho, a~target}[ target(a|s) / base(a|s) ] >= 1.
double coverage_coefficient(const PolicyTable& target, const PolicyTable& base,
                            const Vector& rho);

/// L-infinity coverability of a finite class, in closed form:
/// max_s sum_a max_{pi in cls} pi(a|s). The inner inf over mu is attained by
/// mu proportional to the entrywise max, so no optimization loop is needed.
double linf_coverability(const PolicyClass& cls);

/// Reward induced by a policy: clip_{[0,r_max]}(beta*log(pi/pi_ref) shifted
/// per state so its minimum is zero). Round-trips with closed_form_policy
/// for any policy that is optimal for some reward in [0, r_max].
RewardTable reward_from_policy(const PolicyTable& pi, const BanditInstance& inst);

double max_abs_log_ratio(const PolicyTable& pi, const PolicyTable& ref);

/// Keeps members with max_{s,a} |log(pi/pi_ref)| <= r_max/beta. A small
/// epsilon absorbs roundoff so exactly-optimal policies of in-range rewards
/// are always retained.
PolicyClass bounded_ratio_filter(const PolicyClass& cls,
                                 const BanditInstance& inst);

/// Entrywise convex combination of policies.
PolicyTable mixture_policy(const std::vector<PolicyTable>& policies,
                           const Vector& weights);

/// Bradley-Terry preference probability sigma(r(s,a) - r(s,a_tilde)).
double bt_prob(const RewardTable& r, int s, int a, int a_tilde);
int sample_bt_label(const RewardTable& r, int s, int a, int a_tilde, Rng& rng);

/// Exact win rate P_r(pi > pi2) by the full triple sum.
double win_rate(const PolicyTable& pi, const PolicyTable& pi2,
                const RewardTable& r, const BanditInstance& inst);
/// Unbiased Monte-Carlo estimate with n joint draws.
double win_rate_mc(const PolicyTable& pi, const PolicyTable& pi2,
                   const RewardTable& r, const BanditInstance& inst, int n,
                   Rng& rng);

/// Best-of-N action sampler: draws n_bon iid actions from base(.|s) and
/// returns one maximizing source_r(s, .), ties to the lowest action index.
struct BonSampler {
  const PolicyTable* base = nullptr;
  const RewardTable* source_r = nullptr;
  int n_bon = 32;

  int sample(int s, Rng& rng) const;
};

/// Exact distribution of the best-of-N selection rule above.
PolicyTable bon_policy_table(const PolicyTable& base,
                             const RewardTable& source_r, int n_bon);

}  // namespace tpolab
