#include "tpolab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <thread>

#include "tpolab/core.hpp"
#include "tpolab/serialize.hpp"
#include "tpolab/svg.hpp"

namespace tpolab {

namespace {

Matrix random_stochastic(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  // Gamma(2) draws keep entries away from zero.
  Matrix m(rows, cols);
  for (Eigen::Index s = 0; s < rows; ++s) {
    for (Eigen::Index a = 0; a < cols; ++a) {
      m(s, a) = rng.exponential() + rng.exponential();
    }
    m.row(s) /= m.row(s).sum();
  }
  return m;
}

Matrix random_reward(Eigen::Index rows, Eigen::Index cols, double r_max,
                     Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index s = 0; s < rows; ++s) {
    for (Eigen::Index a = 0; a < cols; ++a) {
      m(s, a) = rng.uniform(0.0, r_max);
    }
  }
  return m;
}

// Blend path from r* through an independent random reward to its
// reflection; the realized value gap is continuous in lambda with gap 0 at
// lambda = 0.
Matrix blend_reward(const Matrix& r_star, const Matrix& r_rand, double r_max,
                    double lambda) {
  Matrix out;
  if (lambda <= 1.0) {
    out = (1.0 - lambda) * r_star + lambda * r_rand;
  } else {
    const Matrix anti = Matrix::Constant(r_star.rows(), r_star.cols(), r_max) -
                        r_star;
    out = (2.0 - lambda) * r_rand + (lambda - 1.0) * anti;
  }
  return out.cwiseMax(0.0).cwiseMin(r_max);
}

}  // namespace

GeneratedEnv generate_instance(const InstanceSpec& spec, std::uint64_t seed) {
  if (spec.num_states < 1 || spec.num_actions < 2) {
    throw ValidationError("instance spec: need >=1 state and >=2 actions");
  }
  if (spec.beta <= 0.0 || spec.r_max <= 0.0) {
    throw ValidationError("instance spec: beta and r_max must be positive");
  }
  if (spec.class_size < 2) {
    throw ValidationError("instance spec: class_size must be >= 2");
  }
  for (double d : spec.source_deltas) {
    if (d < 0.0 || d > 1.0) {
      throw ValidationError("instance spec: delta targets must be in [0,1]");
    }
  }

  Rng rng(derive_seed(seed, "instance", 0));
  Vector rho(spec.num_states);
  for (Eigen::Index s = 0; s < rho.size(); ++s) rho(s) = rng.exponential();
  rho /= rho.sum();
  PolicyTable pi_ref(random_stochastic(spec.num_states, spec.num_actions, rng));
  RewardTable r_star(
      random_reward(spec.num_states, spec.num_actions, spec.r_max, rng));
  BanditInstance inst(std::move(rho), std::move(pi_ref), spec.beta, spec.r_max,
                      std::move(r_star));

  const double j_star = inst.optimal_value();
  auto realized_gap = [&](const Matrix& reward) {
    const PolicyTable pi =
        closed_form_policy(RewardTable(reward), inst);
    return j_star - policy_value(pi, inst.r_star(), inst);
  };

  std::vector<RewardTable> sources;
  sources.reserve(spec.source_deltas.size());
  for (double frac : spec.source_deltas) {
    const double target = frac * spec.r_max;
    if (target == 0.0) {
      sources.emplace_back(inst.r_star().values());
      continue;
    }
    const double tol = 0.05 * target;
    bool found = false;
    for (int attempt = 0; attempt < 8 && !found; ++attempt) {
      const Matrix r_rand =
          random_reward(spec.num_states, spec.num_actions, spec.r_max, rng);
      // Bracket the target on a coarse grid of the blend path, then bisect.
      const int grid = 65;
      double prev_lambda = 0.0;
      double prev_gap = 0.0;
      double lo = -1.0, hi = -1.0;
      for (int i = 1; i < grid; ++i) {
        const double lambda = 2.0 * i / (grid - 1);
        const double gap = realized_gap(
            blend_reward(inst.r_star().values(), r_rand, spec.r_max, lambda));
        if ((prev_gap - target) * (gap - target) <= 0.0 && gap >= prev_gap) {
          lo = prev_lambda;
          hi = lambda;
          break;
        }
        prev_lambda = lambda;
        prev_gap = gap;
      }
      if (lo < 0.0) continue;  // path never reaches the target; redraw noise
      double best_lambda = hi;
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gap = realized_gap(
            blend_reward(inst.r_star().values(), r_rand, spec.r_max, mid));
        if (std::abs(gap - target) <= tol) {
          best_lambda = mid;
          found = true;
          break;
        }
        if (gap < target) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      if (found) {
        sources.emplace_back(blend_reward(inst.r_star().values(), r_rand,
                                          spec.r_max, best_lambda));
      }
    }
    if (!found) {
      std::ostringstream oss;
      oss << "could not realize source gap target " << target
          << " (max attempts exceeded)";
      throw GenerationError(oss.str());
    }
  }

  PolicyClass raw;
  int id = 0;
  raw.add(inst.optimal_policy(), id++);
  for (int i = 0; i < spec.class_size - 2; ++i) {
    raw.add(closed_form_policy(
                RewardTable(random_reward(spec.num_states, spec.num_actions,
                                          spec.r_max, rng)),
                inst),
            id++);
  }
  raw.add(inst.pi_ref(), id++);
  PolicyClass cls = bounded_ratio_filter(raw, inst);
  bool has_opt = false;
  for (const PolicyTable& pi : cls.members) {
    if ((pi.probs() - inst.optimal_policy().probs()).cwiseAbs().maxCoeff() <
        1e-12) {
      has_opt = true;
      break;
    }
  }
  if (!has_opt) {
    throw GenerationError("generated class lost the optimal policy");
  }
  return GeneratedEnv{std::move(inst), std::move(sources), std::move(cls)};
}

void ExperimentConfig::validate() const {
  if (roster.empty()) throw ValidationError("config: roster is empty");
  if (trials < 1) throw ValidationError("config: trials must be >= 1");
  if (T < 1 || N < 1 || T % N != 0) {
    throw ValidationError("config: T must be a positive multiple of N");
  }
  for (const std::string& alg : roster) {
    if (alg == "tpo" || alg == "empirical-tpo" || alg == "online-only") {
      continue;
    }
    if (alg.rfind("transfer-fixed:", 0) == 0) continue;
    throw ValidationError("config: unknown roster entry " + alg);
  }
}

namespace {

TpoConfig make_tpo_config(const ExperimentConfig& cfg,
                          const GeneratedEnv& env, bool with_sources) {
  TpoConfig t;
  t.T = cfg.T;
  t.N = cfg.N;
  t.alpha = cfg.tpo.alpha;
  t.delta = cfg.tpo.delta;
  t.c_bonus = cfg.tpo.c_bonus;
  if (with_sources) t.sources = env.sources;
  t.oracle = cfg.tpo.oracle;
  t.oracle_c = cfg.tpo.oracle_c;
  t.eta_mode = cfg.tpo.eta_mode;
  t.rpo_mode = cfg.tpo.rpo_mode;
  t.final_rpo_mode = cfg.tpo.final_rpo_mode;
  t.cache_tps_per_block = cfg.tpo.cache_tps_per_block;
  return t;
}

RunResult run_algorithm(const std::string& alg, const ExperimentConfig& cfg,
                        const GeneratedEnv& env, std::uint64_t seed,
                        const std::vector<int>& prompts) {
  if (alg == "tpo") {
    return tpo_run(make_tpo_config(cfg, env, true), env.cls, env.inst, seed,
                   &prompts);
  }
  if (alg == "online-only") {
    return online_only_run(make_tpo_config(cfg, env, false), env.cls, env.inst,
                           seed, &prompts);
  }
  if (alg == "empirical-tpo") {
    EmpiricalConfig e;
    e.K = cfg.T / cfg.N;
    e.N = cfg.N;
    e.wr_self = cfg.empirical.wr_self;
    e.ucb_bonus = cfg.empirical.ucb_bonus;
    e.use_bon = cfg.empirical.use_bon;
    e.bon_n = cfg.empirical.bon_n;
    PolicyOptimizer opt = PolicyOptimizer::from_policy(
        cfg.empirical.optimizer, env.inst.pi_ref(), cfg.empirical.learning_rate,
        cfg.empirical.steps, cfg.empirical.beta_po, cfg.empirical.alpha_xpo);
    return empirical_tpo_run(e, env.sources, env.inst, opt, seed, &prompts);
  }
  if (alg.rfind("transfer-fixed:", 0) == 0) {
    const int w = std::stoi(alg.substr(std::string("transfer-fixed:").size()));
    return transfer_fixed_run(make_tpo_config(cfg, env, true), w, env.cls,
                              env.inst, seed, &prompts);
  }
  throw ValidationError("unknown algorithm: " + alg);
}

std::string sanitize(const std::string& name) {
  std::string out = name;
  for (char& c : out) {
    if (c == ':' || c == '/' || c == ' ') c = '_';
  }
  return out;
}

SelectionFreq selection_freq_for(const std::string& alg,
                                 const std::vector<RunResult>& runs,
                                 int blocks, int num_sources) {
  SelectionFreq sel;
  sel.algorithm = alg;
  if (alg == "empirical-tpo") {
    for (int w = 0; w < num_sources; ++w) {
      sel.arm_labels.push_back("source:" + std::to_string(w));
    }
    sel.arm_labels.push_back("online");
    Matrix counts = Matrix::Zero(blocks, num_sources + 1);
    for (const RunResult& run : runs) {
      for (const ArmPull& pull : run.arm_log) {
        counts(pull.block - 1, pull.arm) += 1.0;
      }
    }
    for (Eigen::Index b = 0; b < counts.rows(); ++b) {
      const double sum = counts.row(b).sum();
      if (sum > 0) counts.row(b) /= sum;
    }
    sel.freq = std::move(counts);
    return sel;
  }
  // tpo: distribution of transfer-step choices per block.
  for (int w = 0; w < num_sources; ++w) {
    sel.arm_labels.push_back("source:" + std::to_string(w));
  }
  sel.arm_labels.push_back("distilled");
  Matrix counts = Matrix::Zero(blocks, num_sources + 1);
  for (const RunResult& run : runs) {
    for (const RegretRow& row : run.trace) {
      if (row.played.origin == PolicyOrigin::Source) {
        counts(row.block - 1, row.played.id) += 1.0;
      } else if (row.played.origin == PolicyOrigin::Distilled) {
        counts(row.block - 1, num_sources) += 1.0;
      }
    }
  }
  for (Eigen::Index b = 0; b < counts.rows(); ++b) {
    const double sum = counts.row(b).sum();
    if (sum > 0) counts.row(b) /= sum;
  }
  sel.freq = std::move(counts);
  return sel;
}

}  // namespace

Report run_roster(const ExperimentConfig& cfg, const GeneratedEnv& env) {
  cfg.validate();
  const int T = cfg.T;
  const int blocks = cfg.T / cfg.N;

  // Shared environment stream: the same prompt sequence for every roster
  // entry within a trial.
  std::vector<std::vector<int>> prompts(static_cast<std::size_t>(cfg.trials));
  for (int trial = 0; trial < cfg.trials; ++trial) {
    Rng env_rng(derive_seed(cfg.master_seed, "env", trial));
    std::vector<int>& seq = prompts[static_cast<std::size_t>(trial)];
    seq.resize(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) seq[t] = env_rng.categorical(env.inst.rho());
  }

  std::map<std::string, std::vector<RunResult>> results;
  for (const std::string& alg : cfg.roster) {
    std::vector<RunResult>& runs = results[alg];
    runs.resize(static_cast<std::size_t>(cfg.trials));
    // Trials are independent; run them on a small thread pool and join
    // before any aggregation so output order is fixed.
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const int stride = static_cast<int>(
        std::min<unsigned>(hw, static_cast<unsigned>(cfg.trials)));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(stride));
    for (int offset = 0; offset < stride; ++offset) {
      pool.emplace_back([&, offset]() {
        for (int trial = offset; trial < cfg.trials; trial += stride) {
          runs[static_cast<std::size_t>(trial)] = run_algorithm(
              alg, cfg, env, derive_seed(cfg.master_seed, alg, trial),
              prompts[static_cast<std::size_t>(trial)]);
        }
      });
    }
    for (std::thread& th : pool) th.join();
  }

  Report rep;
  rep.roster = cfg.roster;
  rep.trials = cfg.trials;

  for (const std::string& alg : cfg.roster) {
    const std::vector<RunResult>& runs = results[alg];
    RegretCurve curve;
    curve.algorithm = alg;
    curve.mean.resize(static_cast<std::size_t>(T));
    curve.ci_lo.resize(static_cast<std::size_t>(T));
    curve.ci_hi.resize(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      double mean = 0.0;
      for (const RunResult& run : runs) {
        mean += run.trace[static_cast<std::size_t>(t)].cum_regret;
      }
      mean /= cfg.trials;
      double sd = 0.0;
      if (cfg.trials >= 3) {
        for (const RunResult& run : runs) {
          const double d =
              run.trace[static_cast<std::size_t>(t)].cum_regret - mean;
          sd += d * d;
        }
        sd = std::sqrt(sd / (cfg.trials - 1));
      }
      const double half =
          cfg.trials >= 3 ? 1.96 * sd / std::sqrt(cfg.trials) : 0.0;
      curve.mean[static_cast<std::size_t>(t)] = mean;
      curve.ci_lo[static_cast<std::size_t>(t)] = mean - half;
      curve.ci_hi[static_cast<std::size_t>(t)] = mean + half;
    }
    rep.curves.push_back(std::move(curve));
  }

  const std::size_t R = cfg.roster.size();
  rep.win_matrix = Matrix::Zero(static_cast<Eigen::Index>(R),
                                static_cast<Eigen::Index>(R));
  for (std::size_t i = 0; i < R; ++i) {
    for (std::size_t j = 0; j < R; ++j) {
      double mean = 0.0;
      for (int trial = 0; trial < cfg.trials; ++trial) {
        mean += win_rate(
            results[cfg.roster[i]][static_cast<std::size_t>(trial)]
                .final_policy,
            results[cfg.roster[j]][static_cast<std::size_t>(trial)]
                .final_policy,
            env.inst.r_star(), env.inst);
      }
      rep.win_matrix(static_cast<Eigen::Index>(i),
                     static_cast<Eigen::Index>(j)) = mean / cfg.trials;
    }
  }

  const int W = static_cast<int>(env.sources.size());
  for (const std::string& alg : cfg.roster) {
    if (alg == "tpo" || alg == "empirical-tpo") {
      rep.selections.push_back(
          selection_freq_for(alg, results[alg], blocks, W));
    }
  }

  // Artifacts.
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  {
    std::ostringstream out;
    out << "algorithm,step,mean_cum,ci_lo,ci_hi\n";
    for (const RegretCurve& curve : rep.curves) {
      for (int t = 0; t < T; ++t) {
        out << curve.algorithm << ',' << (t + 1) << ','
            << dtos(curve.mean[static_cast<std::size_t>(t)]) << ','
            << dtos(curve.ci_lo[static_cast<std::size_t>(t)]) << ','
            << dtos(curve.ci_hi[static_cast<std::size_t>(t)]) << '\n';
      }
    }
    write_file(cfg.out_dir + "/regret_curves.csv", out.str());
  }
  {
    std::ostringstream out;
    out << "algorithm";
    for (const std::string& alg : cfg.roster) out << ",vs_" << sanitize(alg);
    out << '\n';
    for (std::size_t i = 0; i < R; ++i) {
      out << cfg.roster[i];
      for (std::size_t j = 0; j < R; ++j) {
        out << ','
            << dtos(rep.win_matrix(static_cast<Eigen::Index>(i),
                                   static_cast<Eigen::Index>(j)));
      }
      out << '\n';
    }
    write_file(cfg.out_dir + "/win_rate_matrix.csv", out.str());
  }
  {
    std::ostringstream out;
    out << "algorithm,block,arm,frequency\n";
    for (const SelectionFreq& sel : rep.selections) {
      for (Eigen::Index b = 0; b < sel.freq.rows(); ++b) {
        for (Eigen::Index a = 0; a < sel.freq.cols(); ++a) {
          out << sel.algorithm << ',' << (b + 1) << ','
              << sel.arm_labels[static_cast<std::size_t>(a)] << ','
              << dtos(sel.freq(b, a)) << '\n';
        }
      }
    }
    write_file(cfg.out_dir + "/selection_freq.csv", out.str());
  }
  for (const std::string& alg : cfg.roster) {
    const std::vector<RunResult>& runs = results[alg];
    for (int trial = 0; trial < cfg.trials; ++trial) {
      const std::string stem =
          cfg.out_dir + "/" + sanitize(alg) + "_trial" + std::to_string(trial);
      write_file(stem + "_trace.csv",
                 trace_to_csv(runs[static_cast<std::size_t>(trial)]));
      write_file(stem + "_final_policy.json",
                 policy_to_json(
                     runs[static_cast<std::size_t>(trial)].final_policy));
      if (!runs[static_cast<std::size_t>(trial)].arm_log.empty()) {
        write_file(stem + "_selection.csv",
                   arm_log_to_csv(runs[static_cast<std::size_t>(trial)]));
      }
    }
  }
  render_svg(rep, cfg.out_dir);
  return rep;
}

Report run_roster(const ExperimentConfig& cfg) {
  return run_roster(cfg, generate_instance(cfg.instance, cfg.instance_seed));
}

void render_svg(const Report& rep, const std::string& dir) {
  std::vector<LineSeries> series;
  for (const RegretCurve& curve : rep.curves) {
    LineSeries s;
    s.label = curve.algorithm;
    s.x.resize(curve.mean.size());
    for (std::size_t i = 0; i < curve.mean.size(); ++i) {
      s.x[i] = static_cast<double>(i + 1);
    }
    s.y = curve.mean;
    if (rep.trials >= 3) {
      s.band_lo = curve.ci_lo;
      s.band_hi = curve.ci_hi;
    }
    series.push_back(std::move(s));
  }
  write_file(dir + "/regret_curves.svg",
             svg_line_chart(series, "Cumulative regret (mean over trials)",
                            "step", "cumulative regret"));
  for (const SelectionFreq& sel : rep.selections) {
    std::vector<std::string> blocks;
    for (Eigen::Index b = 0; b < sel.freq.rows(); ++b) {
      blocks.push_back("block " + std::to_string(b + 1));
    }
    write_file(dir + "/selection_" + sanitize(sel.algorithm) + ".svg",
               svg_stacked_bars(blocks, sel.arm_labels, sel.freq,
                                "Selection frequencies: " + sel.algorithm));
  }
}

}  // namespace tpolab
