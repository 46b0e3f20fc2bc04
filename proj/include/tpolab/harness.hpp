#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tpolab/empirical.hpp"
#include "tpolab/tpo.hpp"
#include "tpolab/types.hpp"

namespace tpolab {

struct InstanceSpec {
  int num_states = 8;
  int num_actions = 6;
  double beta = 1.0;
  double r_max = 1.0;
  int class_size = 20;                // random members before filtering
  std::vector<double> source_deltas;  // value-gap targets, fractions of r_max
};

struct GeneratedEnv {
  BanditInstance inst;
  std::vector<RewardTable> sources;
  PolicyClass cls;
};

/// Draws r* uniformly, builds each source by blending r* with independent
/// noise until its realized value gap matches the target within 5%
/// (bisection on the blend weight), and assembles a ratio-filtered policy
/// class containing pi*_{r*} and pi_ref.
GeneratedEnv generate_instance(const InstanceSpec& spec, std::uint64_t seed);

struct TpoSettings {
  double alpha = -1.0;
  double delta = 0.1;
  double c_bonus = 1.0;
  OracleKind oracle = OracleKind::XpoLike;
  double oracle_c = 0.3;
  EtaMode eta_mode = EtaMode::Appendix;
  RpoMode rpo_mode = RpoMode::Enumerate;
  RpoMode final_rpo_mode = RpoMode::Mixture;
  bool cache_tps_per_block = false;
};

struct EmpiricalSettings {
  PoKind optimizer = PoKind::Dpo;
  double learning_rate = 0.2;
  int steps = 80;
  double beta_po = 1.0;
  double alpha_xpo = 0.01;
  double wr_self = 0.5;
  double ucb_bonus = 1.0;
  bool use_bon = false;
  int bon_n = 32;
};

struct ExperimentConfig {
  InstanceSpec instance;
  std::uint64_t instance_seed = 1;
  std::vector<std::string> roster;  // tpo | empirical-tpo | online-only |
                                    // transfer-fixed:w
  int T = 1000;
  int N = 50;
  int trials = 5;
  std::uint64_t master_seed = 0;
  TpoSettings tpo;
  EmpiricalSettings empirical;
  std::string out_dir = "results";

  void validate() const;
};

struct RegretCurve {
  std::string algorithm;
  std::vector<double> mean;  // cumulative regret per step, mean over trials
  std::vector<double> ci_lo;
  std::vector<double> ci_hi;
};

struct SelectionFreq {
  std::string algorithm;
  std::vector<std::string> arm_labels;
  Matrix freq;  // blocks x arms, rows sum to 1
};

struct Report {
  std::vector<std::string> roster;
  std::vector<RegretCurve> curves;
  Matrix win_matrix;  // win_rate(final_i over final_j)
  std::vector<SelectionFreq> selections;
  int trials = 0;
};

/// Runs every roster algorithm on identical (instance, seed) pairs with a
/// shared prompt stream, aggregates regret/win-rate/selection statistics and
/// writes CSV + SVG under cfg.out_dir.
Report run_roster(const ExperimentConfig& cfg, const GeneratedEnv& env);

/// Convenience: generate the environment from cfg and run.
Report run_roster(const ExperimentConfig& cfg);

/// Standalone SVG rendering of an assembled report.
void render_svg(const Report& rep, const std::string& dir);

}  // namespace tpolab
