#include "tpolab/empirical.hpp"

#include <cmath>
#include <limits>

#include "tpolab/core.hpp"

namespace tpolab {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

Matrix row_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index s = 0; s < logits.rows(); ++s) {
    const double m = logits.row(s).maxCoeff();
    out.row(s) = (logits.row(s).array() - m).exp();
    out.row(s) /= out.row(s).sum();
  }
  return out;
}

struct Pair {
  int s, winner, loser, a_tilde;
};

Pair extract_pair(const PreferenceSample& smp) {
  // y = 1 means a is preferred over a_tilde.
  if (smp.y == 1) return {smp.s, smp.a, smp.a_tilde, smp.a_tilde};
  return {smp.s, smp.a_tilde, smp.a, smp.a_tilde};
}

}  // namespace

void UcbState::reset() {
  win_sum.setZero();
  counts.setZero();
  online_count = 0;
}

void UcbState::record(int arm, int y) {
  if (arm == num_sources()) {
    ++online_count;
    return;
  }
  if (arm < 0 || arm > num_sources()) {
    throw ValidationError("ucb record: arm out of range");
  }
  counts(arm) += 1;
  win_sum(arm) += y;
}

double ucb_score(const UcbState& st, int arm) {
  if (arm == st.num_sources()) return st.wr_self;
  if (arm < 0 || arm > st.num_sources()) {
    throw ValidationError("ucb score: arm out of range");
  }
  if (st.counts(arm) == 0) return kInf;
  const double n = static_cast<double>(st.counts(arm));
  return st.win_sum(arm) / n + st.bonus_scale / std::sqrt(n);
}

int ucb_select(const UcbState& st) {
  int best = st.num_sources();  // ties go to the online arm
  double best_score = st.wr_self;
  for (int w = 0; w < st.num_sources(); ++w) {
    const double score = ucb_score(st, w);
    if (score > best_score) {
      best_score = score;
      best = w;
    }
  }
  return best;
}

PolicyTable PolicyOptimizer::policy() const {
  return PolicyTable(row_softmax(logits));
}

PolicyOptimizer PolicyOptimizer::from_policy(PoKind kind,
                                             const PolicyTable& pi, double lr,
                                             int steps, double beta_po,
                                             double alpha_xpo) {
  PolicyOptimizer opt;
  opt.kind = kind;
  opt.learning_rate = lr;
  opt.steps = steps;
  opt.beta_po = beta_po;
  opt.alpha_xpo = alpha_xpo;
  opt.logits = pi.probs().array().log().matrix();
  return opt;
}

double po_loss(const PolicyOptimizer& opt, const PolicyTable& pi_ref,
               const PreferenceDataset& block) {
  if (block.empty()) throw ValidationError("po_loss: empty block");
  if (opt.beta_po <= 0.0) throw ValidationError("po_loss: beta_po must be > 0");
  const Matrix probs = row_softmax(opt.logits);
  const Matrix log_probs = probs.array().log().matrix();
  const Matrix log_ref = pi_ref.probs().array().log().matrix();
  const double n = static_cast<double>(block.size());
  double loss = 0.0;
  for (const PreferenceSample& smp : block.samples) {
    const Pair p = extract_pair(smp);
    const double delta =
        (log_probs(p.s, p.winner) - log_ref(p.s, p.winner)) -
        (log_probs(p.s, p.loser) - log_ref(p.s, p.loser));
    switch (opt.kind) {
      case PoKind::Dpo:
        loss += softplus(-opt.beta_po * delta);
        break;
      case PoKind::Ipo: {
        const double v = delta - 0.5 / opt.beta_po;
        loss += v * v;
        break;
      }
      case PoKind::Xpo:
        loss += softplus(-opt.beta_po * delta);
        loss -= opt.alpha_xpo * log_probs(p.s, p.a_tilde);
        break;
    }
  }
  return loss / n;
}

Matrix po_loss_gradient(const PolicyOptimizer& opt, const PolicyTable& pi_ref,
                        const PreferenceDataset& block) {
  if (block.empty()) throw ValidationError("po_loss_gradient: empty block");
  const Matrix probs = row_softmax(opt.logits);
  const Matrix log_probs = probs.array().log().matrix();
  const Matrix log_ref = pi_ref.probs().array().log().matrix();
  const double n = static_cast<double>(block.size());
  Matrix grad = Matrix::Zero(opt.logits.rows(), opt.logits.cols());
  for (const PreferenceSample& smp : block.samples) {
    const Pair p = extract_pair(smp);
    const double delta =
        (log_probs(p.s, p.winner) - log_ref(p.s, p.winner)) -
        (log_probs(p.s, p.loser) - log_ref(p.s, p.loser));
    // delta depends on the logits only through z_winner - z_loser: the
    // normalizers cancel between winner and loser.
    double coef = 0.0;
    switch (opt.kind) {
      case PoKind::Dpo:
      case PoKind::Xpo:
        coef = opt.beta_po * (sigmoid(opt.beta_po * delta) - 1.0);
        break;
      case PoKind::Ipo:
        coef = 2.0 * (delta - 0.5 / opt.beta_po);
        break;
    }
    grad(p.s, p.winner) += coef;
    grad(p.s, p.loser) -= coef;
    if (opt.kind == PoKind::Xpo) {
      // -alpha * d/dz log pi(a_tilde|s) = -alpha * (e_{a_tilde} - pi(.|s))
      grad.row(p.s) += opt.alpha_xpo * probs.row(p.s);
      grad(p.s, p.a_tilde) -= opt.alpha_xpo;
    }
  }
  return grad / n;
}

PolicyOptimizer po_update(PolicyOptimizer opt, const PolicyTable& pi_ref,
                          const PreferenceDataset& block) {
  if (block.empty()) throw ValidationError("po_update: empty block");
  for (int step = 0; step < opt.steps; ++step) {
    opt.logits -= opt.learning_rate * po_loss_gradient(opt, pi_ref, block);
  }
  return opt;
}

RunResult empirical_tpo_run(const EmpiricalConfig& cfg,
                            const std::vector<RewardTable>& sources,
                            const BanditInstance& inst, PolicyOptimizer opt,
                            std::uint64_t seed,
                            const std::vector<int>* prompts) {
  if (cfg.K < 1 || cfg.N < 1) {
    throw ValidationError("empirical config: K and N must be >= 1");
  }
  if (cfg.use_bon && cfg.bon_n < 1) {
    throw ValidationError("empirical config: bon_n must be >= 1");
  }
  const int T = cfg.K * cfg.N;
  if (prompts && static_cast<int>(prompts->size()) < T) {
    throw ValidationError("empirical run: prompt stream shorter than K*N");
  }
  Rng rng(seed);
  const int W = static_cast<int>(sources.size());
  const double j_star = inst.optimal_value();

  opt.logits = inst.pi_ref().probs().array().log().matrix();
  PolicyTable pi_ol = inst.pi_ref();

  std::vector<PolicyTable> exact_sources;
  exact_sources.reserve(sources.size());
  for (const RewardTable& r : sources) {
    exact_sources.push_back(closed_form_policy(r, inst));
  }

  UcbState ucb(W, cfg.ucb_bonus, cfg.wr_self);
  RunResult run;
  run.trace.reserve(static_cast<std::size_t>(T));
  double cum = 0.0;

  for (int k = 1; k <= cfg.K; ++k) {
    ucb.reset();
    PreferenceDataset block;

    // Arm policies for this block; best-of-N arms resample from the current
    // online policy each block.
    std::vector<PolicyTable> arm_tables;
    arm_tables.reserve(sources.size());
    for (int w = 0; w < W; ++w) {
      arm_tables.push_back(cfg.use_bon
                               ? bon_policy_table(pi_ol, sources[w], cfg.bon_n)
                               : exact_sources[static_cast<std::size_t>(w)]);
    }
    Vector arm_values(W + 1);
    for (int w = 0; w < W; ++w) {
      arm_values(w) =
          policy_value(arm_tables[static_cast<std::size_t>(w)], inst.r_star(),
                       inst);
    }
    arm_values(W) = policy_value(pi_ol, inst.r_star(), inst);

    for (int n = 1; n <= cfg.N; ++n) {
      const int arm = ucb_select(ucb);
      const double score = ucb_score(ucb, arm);
      const int tau = (k - 1) * cfg.N + n;
      const int s = prompts ? (*prompts)[static_cast<std::size_t>(tau - 1)]
                            : rng.categorical(inst.rho());
      int a;
      if (arm < W) {
        if (cfg.use_bon) {
          BonSampler sampler{&pi_ol, &sources[static_cast<std::size_t>(arm)],
                             cfg.bon_n};
          a = sampler.sample(s, rng);
        } else {
          a = rng.categorical(
              exact_sources[static_cast<std::size_t>(arm)].probs().row(s)
                  .transpose());
        }
      } else {
        a = rng.categorical(pi_ol.probs().row(s).transpose());
      }
      const int a_tilde = rng.categorical(pi_ol.probs().row(s).transpose());
      const int y = sample_bt_label(inst.r_star(), s, a, a_tilde, rng);
      ucb.record(arm, y);

      PreferenceSample sample;
      sample.s = s;
      sample.a = a;
      sample.a_tilde = a_tilde;
      sample.y = y;
      sample.producer = arm < W ? PolicyRef{PolicyOrigin::Source, arm}
                                : PolicyRef{PolicyOrigin::Online, -1};
      sample.comparator = PolicyRef{PolicyOrigin::Online, -1};
      block.add(sample);
      run.data.add(sample);

      RegretRow row;
      row.step = tau;
      row.block = k;
      row.inner = n;
      row.played = sample.producer;
      row.inst_regret = j_star - arm_values(arm);
      cum += row.inst_regret;
      row.cum_regret = cum;
      run.trace.push_back(row);

      ArmPull pull;
      pull.block = k;
      pull.inner = n;
      pull.arm = arm;
      pull.arm_tag = arm < W ? "source:" + std::to_string(arm) : "online";
      pull.ucb_score = score;
      pull.y = y;
      run.arm_log.push_back(pull);
    }

    opt = po_update(opt, inst.pi_ref(), block);
    pi_ol = opt.policy();
  }

  run.final_policy = pi_ol;
  return run;
}

}  // namespace tpolab
