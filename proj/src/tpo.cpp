#include "tpolab/tpo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tpolab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int find_member_by_id(const PolicyClass& cls, int id) {
  for (std::size_t i = 0; i < cls.ids.size(); ++i) {
    if (cls.ids[i] == id) return static_cast<int>(i);
  }
  return -1;
}

// Incremental view of a growing run dataset: per-reward NLL sums for the
// full data and the online subset, per-source counts, optimism sums and the
// executed online mixture. Appending a sample is O(|Pi|).
struct RunStats {
  const PolicyClass* cls = nullptr;
  const BanditInstance* inst = nullptr;
  ClassTables tables;
  NllAccumulator nll_all;
  NllAccumulator nll_online;
  std::vector<int> source_counts;
  Vector optimism_sum;  // per member: sum of log pi_i(a_tilde|s), online data
  Matrix online_mix_sum;
  std::size_t online_count = 0;

  RunStats(const PolicyClass& c, const BanditInstance& b, int num_sources)
      : cls(&c),
        inst(&b),
        tables(c, b),
        nll_all(&tables.induced_rewards),
        nll_online(&tables.induced_rewards),
        source_counts(static_cast<std::size_t>(num_sources), 0),
        optimism_sum(Vector::Zero(static_cast<Eigen::Index>(c.size()))),
        online_mix_sum(Matrix::Zero(b.num_states(), b.num_actions())) {}

  void add(const PreferenceSample& s, bool online_step,
           const Matrix& executed_probs) {
    nll_all.add(s);
    if (s.producer.origin == PolicyOrigin::Source && s.producer.id >= 0 &&
        s.producer.id < static_cast<int>(source_counts.size())) {
      ++source_counts[static_cast<std::size_t>(s.producer.id)];
    }
    if (online_step) {
      nll_online.add(s);
      for (std::size_t i = 0; i < cls->size(); ++i) {
        optimism_sum(static_cast<Eigen::Index>(i)) +=
            std::log(cls->members[i](s.s, s.a_tilde));
      }
      online_mix_sum += executed_probs;
      ++online_count;
    }
  }
};

struct OracleOut {
  PolicyTable policy;
  int member = -1;  // position in the class, -1 for the pi_ref cold start
};

OracleOut oracle_from_stats(const RunStats& ws, const OracleParams& params) {
  const PolicyClass& cls = *ws.cls;
  const BanditInstance& inst = *ws.inst;
  OracleOut out;
  if (ws.online_count == 0) {
    out.policy = inst.pi_ref();
    out.member = -1;
    return out;
  }
  const double n = static_cast<double>(ws.online_count);
  const Eigen::Index m = static_cast<Eigen::Index>(cls.size());
  if (params.kind == OracleKind::XpoLike) {
    // Optimism-augmented likelihood: argmin of the averaged NLL of each
    // member's induced reward minus a decaying weight times the summed
    // log-probability of the comparator actions.
    const double alpha = params.xpo_alpha_fixed >= 0.0
                             ? params.xpo_alpha_fixed
                             : params.c / (n * std::sqrt(n));
    const Vector nll = ws.nll_online.means();
    int best = 0;
    double best_v = kInf;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double v = nll(i) - alpha * ws.optimism_sum(i);
      if (v < best_v) {
        best_v = v;
        best = static_cast<int>(i);
      }
    }
    out.member = best;
  } else {
    const Vector nll = ws.nll_online.means();
    int j_mle = 0;
    for (Eigen::Index j = 1; j < m; ++j) {
      if (nll(j) < nll(j_mle)) j_mle = static_cast<int>(j);
    }
    const Matrix mix = ws.online_mix_sum / n;
    const double log_term =
        std::log(static_cast<double>(cls.size()) / params.delta);
    const double scale =
        params.c * std::exp(2.0 * inst.r_max()) * std::sqrt(log_term / n);
    int best = 0;
    double best_v = -kInf;
    for (Eigen::Index i = 0; i < m; ++i) {
      double cov = 0.0;
      for (Eigen::Index s = 0; s < inst.num_states(); ++s) {
        const auto t = cls.members[i].probs().row(s).array();
        cov += inst.rho()(s) * (t.square() / mix.row(s).array()).sum();
      }
      const double v = ws.tables.ediff(i, j_mle) -
                       inst.beta() * ws.tables.kl_to_ref(i) +
                       scale * std::sqrt(cov);
      if (v > best_v) {
        best_v = v;
        best = static_cast<int>(i);
      }
    }
    out.member = best;
  }
  out.policy = cls.members[static_cast<std::size_t>(out.member)];
  return out;
}

// Per-source static tables: optimal policies, their values, and expected
// reward gaps against every induced reward.
struct SourceTables {
  std::vector<PolicyTable> policies;
  Vector j_value;        // J_beta(pi*_{r^w}; r_star)
  Vector kl_to_ref;      // KL(pi*_{r^w} || pi_ref)
  Matrix ediff;          // (w, j): E_{rho,pi_w}[r_j] - E_{rho,pi_ref}[r_j]

  SourceTables(const std::vector<RewardTable>& sources,
               const ClassTables& tables, const BanditInstance& inst) {
    const int W = static_cast<int>(sources.size());
    const std::size_t m = tables.induced_rewards.size();
    policies.reserve(sources.size());
    j_value.resize(W);
    kl_to_ref.resize(W);
    ediff.resize(W, static_cast<Eigen::Index>(m));
    for (int w = 0; w < W; ++w) {
      policies.push_back(closed_form_policy(sources[w], inst));
      j_value(w) = policy_value(policies.back(), inst.r_star(), inst);
      kl_to_ref(w) = kl_divergence(policies.back(), inst.pi_ref(), inst.rho());
      for (std::size_t j = 0; j < m; ++j) {
        const Matrix& rv = tables.induced_rewards[j].values();
        double e = 0.0;
        for (Eigen::Index s = 0; s < inst.num_states(); ++s) {
          e += inst.rho()(s) * ((policies[w].probs().row(s) -
                                 inst.pi_ref().probs().row(s))
                                    .dot(rv.row(s)));
        }
        ediff(w, static_cast<Eigen::Index>(j)) = e;
      }
    }
  }
};

double tps_eta(const TpoConfig& cfg, const BanditInstance& inst,
               std::size_t class_size, std::size_t data_size) {
  if (cfg.eta_mode == EtaMode::Appendix) {
    return rpo_eta_appendix(inst, class_size, data_size, cfg.delta);
  }
  return rpo_eta_alg2(inst, class_size, data_size, cfg.delta,
                      static_cast<double>(cfg.T), cfg.c_bonus);
}

TransferChoice tps_from_stats(const RunStats& ws, const SourceTables& srcs,
                              const TpoConfig& cfg,
                              const TpsOverrides* overrides) {
  const PolicyClass& cls = *ws.cls;
  const BanditInstance& inst = *ws.inst;
  if (ws.nll_all.count() == 0) {
    throw ValidationError("tps_select: empty dataset");
  }
  const std::size_t n = ws.nll_all.count();
  const Vector nll = ws.nll_all.means();
  const int j_mle = mle_reward_index(cls, nll);
  const int W = cfg.num_sources();
  const double e2r = std::exp(2.0 * inst.r_max());
  const bool zero_bonus = overrides && overrides->zero_bonuses;
  const bool true_reward = overrides && overrides->use_true_reward;
  const double j_ref = policy_value(inst.pi_ref(), inst.r_star(), inst);

  TransferChoice choice;
  choice.estimated_values.reserve(static_cast<std::size_t>(W) + 1);

  // Pessimistic estimate for the distilled candidate.
  const double eta = tps_eta(cfg, inst, cls.size(), n);
  RpoSolution rpo =
      rpo_solve_stats(cls, ws.tables, nll, inst, eta, cfg.rpo_mode);
  double v_dstl;
  if (true_reward) {
    v_dstl = policy_value(rpo.pi_dstl, inst.r_star(), inst) - j_ref;
  } else {
    double value;
    if (rpo.member_index >= 0) {
      value = ws.tables.ediff(rpo.member_index, rpo.reward_index) -
              inst.beta() * ws.tables.kl_to_ref(rpo.member_index);
    } else {
      value = value_vs_ref(rpo.pi_dstl, rpo.r_dstl, inst);
    }
    v_dstl = value + (nll(rpo.reward_index) - nll(j_mle)) / eta;
    if (!zero_bonus) {
      v_dstl -= 2.0 * cfg.c_bonus * e2r *
                std::sqrt(std::log(static_cast<double>(cls.size()) * cfg.T /
                                   cfg.delta) /
                          static_cast<double>(n));
    }
  }
  choice.estimated_values.push_back(
      {PolicyRef{PolicyOrigin::Distilled, -1}, v_dstl});

  // Optimistic estimates for the source candidates; an unsampled source has
  // an infinite bonus and is always preferred to any sampled one.
  int best_source = -1;
  double best_value = v_dstl;
  for (int w = 0; w < W; ++w) {
    double v;
    if (true_reward) {
      v = srcs.j_value(w) - j_ref;
    } else {
      v = srcs.ediff(w, j_mle) - inst.beta() * srcs.kl_to_ref(w);
    }
    if (!zero_bonus) {
      const int count = ws.source_counts[static_cast<std::size_t>(w)];
      if (count == 0) {
        v = kInf;
      } else {
        v += 16.0 * e2r *
             std::sqrt(std::log(static_cast<double>(cls.size()) * W * cfg.T /
                                cfg.delta) /
                       count);
      }
    }
    choice.estimated_values.push_back({PolicyRef{PolicyOrigin::Source, w}, v});
    if (v > best_value) {
      best_value = v;
      best_source = w;
    }
  }

  if (best_source < 0) {
    choice.kind = PolicyRef{PolicyOrigin::Distilled, -1};
    choice.chosen_policy = rpo.pi_dstl;
  } else {
    choice.kind = PolicyRef{PolicyOrigin::Source, best_source};
    choice.chosen_policy = srcs.policies[static_cast<std::size_t>(best_source)];
  }
  return choice;
}

void fill_block_indices(RegretRow* row, int tau, int N) {
  row->step = tau;
  row->block = (tau + N - 1) / N;       // ceil(tau / N)
  row->inner = ((tau - 1) % N) + 1;     // 1-based residue so n ranges 1..N
}

}  // namespace

double TpoConfig::resolved_alpha(const BanditInstance& inst) const {
  if (alpha >= 0.0) return alpha;
  // Default choice, clamped so both phases are non-empty.
  const double a = std::exp(-inst.r_max() / inst.beta());
  return std::min(std::max(a, 1.0 / N), 1.0 - 1.0 / N);
}

void TpoConfig::validate(const BanditInstance& inst) const {
  if (T <= 0 || N <= 0 || T % N != 0) {
    throw ValidationError("tpo config: T must be a positive multiple of N");
  }
  if (alpha >= 0.0 && (alpha <= 0.0 || alpha >= 1.0)) {
    throw ValidationError("tpo config: alpha must lie in (0,1)");
  }
  if (delta <= 0.0 || delta >= 1.0) {
    throw ValidationError("tpo config: delta must lie in (0,1)");
  }
  const double a = resolved_alpha(inst);
  if (a * N < 1.0 - 1e-9) {
    throw ValidationError("tpo config: alpha*N must be at least 1");
  }
  for (const RewardTable& r : sources) {
    if (r.states() != inst.num_states() || r.actions() != inst.num_actions()) {
      throw ValidationError("tpo config: source dimensions mismatch");
    }
    if ((r.values().array() < -1e-12).any() ||
        (r.values().array() > inst.r_max() + 1e-12).any()) {
      throw ValidationError("tpo config: source rewards must be in [0,r_max]");
    }
  }
}

PolicyTable online_oracle_step(const PreferenceDataset& online_history,
                               const PolicyClass& cls,
                               const BanditInstance& inst,
                               const OracleParams& params, int* member_index) {
  if (cls.empty()) throw ValidationError("online_oracle_step: empty class");
  RunStats ws(cls, inst, 0);
  for (const PreferenceSample& s : online_history.samples) {
    // Resolve the executed policy for the mixture term.
    const PolicyTable* executed = &inst.pi_ref();
    if (s.producer.origin == PolicyOrigin::Online && s.producer.id >= 0) {
      const int idx = find_member_by_id(cls, s.producer.id);
      if (idx >= 0) executed = &cls.members[static_cast<std::size_t>(idx)];
    }
    ws.add(s, true, executed->probs());
  }
  OracleOut out = oracle_from_stats(ws, params);
  if (member_index) *member_index = out.member;
  return out.policy;
}

TransferChoice tps_select(const PreferenceDataset& data, const TpoConfig& cfg,
                          const PolicyClass& cls, const BanditInstance& inst,
                          const TpsOverrides* overrides) {
  if (data.empty()) throw ValidationError("tps_select: empty dataset");
  RunStats ws(cls, inst, cfg.num_sources());
  for (const PreferenceSample& s : data.samples) {
    const bool online = s.producer.origin == PolicyOrigin::Online ||
                        s.producer.origin == PolicyOrigin::Reference;
    const PolicyTable* executed = &inst.pi_ref();
    if (s.producer.origin == PolicyOrigin::Online && s.producer.id >= 0) {
      const int idx = find_member_by_id(cls, s.producer.id);
      if (idx >= 0) executed = &cls.members[static_cast<std::size_t>(idx)];
    }
    ws.add(s, online, executed->probs());
  }
  SourceTables srcs(cfg.sources, ws.tables, inst);
  return tps_from_stats(ws, srcs, cfg, overrides);
}

RunResult tpo_run(const TpoConfig& cfg, const PolicyClass& cls,
                  const BanditInstance& inst, std::uint64_t seed,
                  const std::vector<int>* prompts) {
  cfg.validate(inst);
  if (cls.empty()) throw ValidationError("tpo_run: empty class");
  if (prompts && static_cast<int>(prompts->size()) < cfg.T) {
    throw ValidationError("tpo_run: prompt stream shorter than T");
  }
  Rng rng(seed);
  RunStats ws(cls, inst, cfg.num_sources());
  SourceTables srcs(cfg.sources, ws.tables, inst);
  OracleParams oracle{cfg.oracle, cfg.delta, cfg.oracle_c,
                      cfg.xpo_alpha_fixed};

  const double alpha = cfg.resolved_alpha(inst);
  const double alpha_n = alpha * cfg.N + 1e-9;
  const double j_star = inst.optimal_value();
  const double j_ref = policy_value(inst.pi_ref(), inst.r_star(), inst);

  RunResult run;
  run.trace.reserve(static_cast<std::size_t>(cfg.T));
  double cum = 0.0;
  int cached_block = -1;
  int cached_choice_index = -1;

  for (int tau = 1; tau <= cfg.T; ++tau) {
    RegretRow row;
    fill_block_indices(&row, tau, cfg.N);
    const bool online_step = row.inner <= alpha_n;

    const PolicyTable* played = nullptr;
    double j_played = 0.0;
    if (online_step) {
      OracleOut out = oracle_from_stats(ws, oracle);
      if (out.member >= 0) {
        played = &cls.members[static_cast<std::size_t>(out.member)];
        j_played = ws.tables.j_value(out.member);
        row.played = PolicyRef{PolicyOrigin::Online,
                               cls.ids[static_cast<std::size_t>(out.member)]};
      } else {
        played = &inst.pi_ref();
        j_played = j_ref;
        row.played = PolicyRef{PolicyOrigin::Online, -1};
      }
    } else {
      int choice_index;
      if (cfg.cache_tps_per_block && cached_block == row.block) {
        choice_index = cached_choice_index;
      } else {
        run.selection_log.push_back(tps_from_stats(ws, srcs, cfg, nullptr));
        choice_index = static_cast<int>(run.selection_log.size()) - 1;
        cached_block = row.block;
        cached_choice_index = choice_index;
      }
      const TransferChoice& choice =
          run.selection_log[static_cast<std::size_t>(choice_index)];
      played = &choice.chosen_policy;
      if (choice.kind.origin == PolicyOrigin::Source) {
        j_played = srcs.j_value(choice.kind.id);
        row.played = choice.kind;
      } else {
        j_played = policy_value(choice.chosen_policy, inst.r_star(), inst);
        row.played = PolicyRef{PolicyOrigin::Distilled, choice_index};
      }
    }

    const int s = prompts ? (*prompts)[static_cast<std::size_t>(tau - 1)]
                          : rng.categorical(inst.rho());
    const int a = rng.categorical(played->probs().row(s).transpose());
    const int a_tilde =
        rng.categorical(inst.pi_ref().probs().row(s).transpose());
    const int y = sample_bt_label(inst.r_star(), s, a, a_tilde, rng);
    PreferenceSample sample;
    sample.s = s;
    sample.a = a;
    sample.a_tilde = a_tilde;
    sample.y = y;
    sample.producer = row.played;
    sample.comparator = PolicyRef{PolicyOrigin::Reference, -1};
    run.data.add(sample);
    ws.add(sample, online_step, played->probs());

    row.inst_regret = j_star - j_played;
    cum += row.inst_regret;
    row.cum_regret = cum;
    run.trace.push_back(row);
  }

  RpoSolution final_sol = rpo_solve_stats(cls, ws.tables, ws.nll_all.means(),
                                          inst, tps_eta(cfg, inst, cls.size(),
                                                        ws.nll_all.count()),
                                          cfg.final_rpo_mode);
  run.final_policy = final_sol.pi_dstl;
  return run;
}

RunResult online_only_run(const TpoConfig& cfg, const PolicyClass& cls,
                          const BanditInstance& inst, std::uint64_t seed,
                          const std::vector<int>* prompts) {
  if (cls.empty()) throw ValidationError("online_only_run: empty class");
  if (prompts && static_cast<int>(prompts->size()) < cfg.T) {
    throw ValidationError("online_only_run: prompt stream shorter than T");
  }
  Rng rng(seed);
  RunStats ws(cls, inst, 0);
  OracleParams oracle{cfg.oracle, cfg.delta, cfg.oracle_c,
                      cfg.xpo_alpha_fixed};
  const double j_star = inst.optimal_value();
  const double j_ref = policy_value(inst.pi_ref(), inst.r_star(), inst);

  RunResult run;
  run.trace.reserve(static_cast<std::size_t>(cfg.T));
  Matrix executed_sum = Matrix::Zero(inst.num_states(), inst.num_actions());
  double cum = 0.0;
  for (int tau = 1; tau <= cfg.T; ++tau) {
    RegretRow row;
    fill_block_indices(&row, tau, cfg.N);
    OracleOut out = oracle_from_stats(ws, oracle);
    const PolicyTable* played =
        out.member >= 0 ? &cls.members[static_cast<std::size_t>(out.member)]
                        : &inst.pi_ref();
    const double j_played =
        out.member >= 0 ? ws.tables.j_value(out.member) : j_ref;
    row.played =
        PolicyRef{PolicyOrigin::Online,
                  out.member >= 0
                      ? cls.ids[static_cast<std::size_t>(out.member)]
                      : -1};

    const int s = prompts ? (*prompts)[static_cast<std::size_t>(tau - 1)]
                          : rng.categorical(inst.rho());
    const int a = rng.categorical(played->probs().row(s).transpose());
    const int a_tilde =
        rng.categorical(inst.pi_ref().probs().row(s).transpose());
    const int y = sample_bt_label(inst.r_star(), s, a, a_tilde, rng);
    PreferenceSample sample{s, a, a_tilde, y, row.played,
                            PolicyRef{PolicyOrigin::Reference, -1}};
    run.data.add(sample);
    ws.add(sample, true, played->probs());
    executed_sum += played->probs();

    row.inst_regret = j_star - j_played;
    cum += row.inst_regret;
    row.cum_regret = cum;
    run.trace.push_back(row);
  }
  run.final_policy = PolicyTable(executed_sum / static_cast<double>(cfg.T));
  return run;
}

RunResult transfer_fixed_run(const TpoConfig& cfg, int source_id,
                             const PolicyClass& cls, const BanditInstance& inst,
                             std::uint64_t seed,
                             const std::vector<int>* prompts) {
  (void)cls;
  if (source_id < 0 || source_id >= cfg.num_sources()) {
    throw ValidationError("transfer_fixed_run: source id out of range");
  }
  if (prompts && static_cast<int>(prompts->size()) < cfg.T) {
    throw ValidationError("transfer_fixed_run: prompt stream shorter than T");
  }
  Rng rng(seed);
  const PolicyTable pi =
      closed_form_policy(cfg.sources[static_cast<std::size_t>(source_id)],
                         inst);
  const double gap =
      inst.optimal_value() - policy_value(pi, inst.r_star(), inst);

  RunResult run;
  run.trace.reserve(static_cast<std::size_t>(cfg.T));
  double cum = 0.0;
  for (int tau = 1; tau <= cfg.T; ++tau) {
    RegretRow row;
    fill_block_indices(&row, tau, cfg.N);
    row.played = PolicyRef{PolicyOrigin::Source, source_id};
    const int s = prompts ? (*prompts)[static_cast<std::size_t>(tau - 1)]
                          : rng.categorical(inst.rho());
    const int a = rng.categorical(pi.probs().row(s).transpose());
    const int a_tilde =
        rng.categorical(inst.pi_ref().probs().row(s).transpose());
    const int y = sample_bt_label(inst.r_star(), s, a, a_tilde, rng);
    run.data.add({s, a, a_tilde, y, row.played,
                  PolicyRef{PolicyOrigin::Reference, -1}});
    row.inst_regret = gap;
    cum += gap;
    row.cum_regret = cum;
    run.trace.push_back(row);
  }
  run.final_policy = pi;
  return run;
}

}  // namespace tpolab
