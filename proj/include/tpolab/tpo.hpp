#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tpolab/estimation.hpp"
#include "tpolab/types.hpp"

namespace tpolab {

enum class OracleKind { XpoLike, OptimisticMle };
enum class EtaMode { Appendix, Alg2 };

struct TpoConfig {
  int T = 1000;
  int N = 50;
  double alpha = -1.0;  // <0: use default exp(-r_max/beta), clamped
  double delta = 0.1;
  double c_bonus = 1.0;  // constant c in the pessimism term
  std::vector<RewardTable> sources;

  OracleKind oracle = OracleKind::XpoLike;
  double oracle_c = 0.3;          // bonus scale (optimistic-mle) or optimism
                                  // scale (xpo-like schedule)
  double xpo_alpha_fixed = -1.0;  // >=0: fixed optimism weight override

  EtaMode eta_mode = EtaMode::Appendix;
  RpoMode rpo_mode = RpoMode::Enumerate;        // inside the selector
  RpoMode final_rpo_mode = RpoMode::Mixture;    // returned distilled policy
  bool cache_tps_per_block = false;

  int num_blocks() const { return N > 0 ? T / N : 0; }
  int num_sources() const { return static_cast<int>(sources.size()); }
  double resolved_alpha(const BanditInstance& inst) const;
  void validate(const BanditInstance& inst) const;
};

struct EstimatedValue {
  PolicyRef candidate;
  double value = 0.0;
};

struct TransferChoice {
  PolicyRef kind;  // Source w or Distilled
  PolicyTable chosen_policy;
  std::vector<EstimatedValue> estimated_values;
};

struct RegretRow {
  int step = 0;   // tau, 1-based
  int block = 0;  // k(tau) = ceil(tau/N)
  int inner = 0;  // n(tau) = ((tau-1) mod N) + 1
  PolicyRef played;
  double inst_regret = 0.0;
  double cum_regret = 0.0;
};

struct ArmPull {  // empirical selection log entry
  int block = 0;
  int inner = 0;
  int arm = 0;  // 0..W-1 sources, W = online arm
  std::string arm_tag;
  double ucb_score = 0.0;
  int y = 0;
};

struct RunResult {
  std::vector<RegretRow> trace;
  std::vector<TransferChoice> selection_log;  // one per selector invocation
  std::vector<ArmPull> arm_log;               // empirical runs only
  PolicyTable final_policy;
  PreferenceDataset data;
};

struct OracleParams {
  OracleKind kind = OracleKind::XpoLike;
  double delta = 0.1;
  double c = 0.3;
  double xpo_alpha_fixed = -1.0;
};

/// No-regret online oracle contract: given the online history, produce the
/// next exploration policy from the class. Empty history returns pi_ref.
/// Returns the chosen member index (-1 for the pi_ref cold start).
PolicyTable online_oracle_step(const PreferenceDataset& online_history,
                               const PolicyClass& cls,
                               const BanditInstance& inst,
                               const OracleParams& params,
                               int* member_index = nullptr);

/// Test-only overrides: collapse the estimates to exact values.
struct TpsOverrides {
  bool zero_bonuses = false;
  bool use_true_reward = false;
};

/// Transfer policy selection: optimistic estimates for source policies,
/// pessimistic estimate for the distilled policy, argmax with ties broken
/// toward the distilled candidate, then the lowest source id.
TransferChoice tps_select(const PreferenceDataset& data, const TpoConfig& cfg,
                          const PolicyClass& cls, const BanditInstance& inst,
                          const TpsOverrides* overrides = nullptr);

/// Block-structured transfer policy optimization run. Deterministic given
/// (cfg, seed). If `prompts` is given it supplies s_tau for every step
/// (shared environment stream across roster algorithms).
RunResult tpo_run(const TpoConfig& cfg, const PolicyClass& cls,
                  const BanditInstance& inst, std::uint64_t seed,
                  const std::vector<int>* prompts = nullptr);

/// Pure online baseline: the oracle alone on every step; the final policy is
/// the uniform mixture of executed policies.
RunResult online_only_run(const TpoConfig& cfg, const PolicyClass& cls,
                          const BanditInstance& inst, std::uint64_t seed,
                          const std::vector<int>* prompts = nullptr);

/// Fixed-transfer baseline: plays the source-w optimal policy every step.
RunResult transfer_fixed_run(const TpoConfig& cfg, int source_id,
                             const PolicyClass& cls, const BanditInstance& inst,
                             std::uint64_t seed,
                             const std::vector<int>* prompts = nullptr);

}  // namespace tpolab
