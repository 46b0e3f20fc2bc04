#pragma once

#include <cstdint>
#include <vector>

#include "tpolab/tpo.hpp"
#include "tpolab/types.hpp"

namespace tpolab {

/// Block-scoped UCB statistics over W source arms plus the online arm.
struct UcbState {
  Vector win_sum;          // per source arm
  Eigen::VectorXi counts;  // per source arm
  int online_count = 0;
  double bonus_scale = 1.0;  // c * sqrt(log(1/delta)), kept as one knob
  double wr_self = 0.5;      // fixed score of the online arm

  explicit UcbState(int num_sources, double bonus = 1.0, double self = 0.5)
      : win_sum(Vector::Zero(num_sources)),
        counts(Eigen::VectorXi::Zero(num_sources)),
        bonus_scale(bonus),
        wr_self(self) {}

  int num_sources() const { return static_cast<int>(counts.size()); }
  void reset();
  void record(int arm, int y);  // arm == num_sources() means online
};

double ucb_score(const UcbState& st, int arm);
/// Argmax over source scores and wr_self; ties go to the online arm, then
/// the lowest source id. Unsampled sources score +infinity.
int ucb_select(const UcbState& st);

enum class PoKind { Dpo, Ipo, Xpo };

/// Softmax-parameterized policy trained by full-batch gradient descent on a
/// pairwise preference loss.
struct PolicyOptimizer {
  PoKind kind = PoKind::Dpo;
  double learning_rate = 0.1;
  int steps = 100;
  double beta_po = 1.0;    // loss temperature
  double alpha_xpo = 0.0;  // optimism weight, xpo only
  Matrix logits;           // |S| x |A|

  PolicyTable policy() const;
  static PolicyOptimizer from_policy(PoKind kind, const PolicyTable& pi,
                                     double lr, int steps, double beta_po,
                                     double alpha_xpo = 0.0);
};

/// Loss of the optimizer's current policy on a block of winner/loser pairs
/// (winner = a if y = 1 else a_tilde).
double po_loss(const PolicyOptimizer& opt, const PolicyTable& pi_ref,
               const PreferenceDataset& block);
Matrix po_loss_gradient(const PolicyOptimizer& opt, const PolicyTable& pi_ref,
                        const PreferenceDataset& block);
/// Runs `steps` gradient steps; zero steps returns the optimizer unchanged.
PolicyOptimizer po_update(PolicyOptimizer opt, const PolicyTable& pi_ref,
                          const PreferenceDataset& block);

struct EmpiricalConfig {
  int K = 3;
  int N = 400;
  double wr_self = 0.5;
  double ucb_bonus = 1.0;
  bool use_bon = false;
  int bon_n = 32;
};

/// Win-rate-UCB transfer learning around a pluggable policy-optimization
/// update; source arms are exact closed-form policies or best-of-N samplers.
RunResult empirical_tpo_run(const EmpiricalConfig& cfg,
                            const std::vector<RewardTable>& sources,
                            const BanditInstance& inst, PolicyOptimizer opt,
                            std::uint64_t seed,
                            const std::vector<int>* prompts = nullptr);

}  // namespace tpolab
