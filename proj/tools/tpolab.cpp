#include <cstdio>
#include <exception>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tpolab/bounds.hpp"
#include "tpolab/core.hpp"
#include "tpolab/harness.hpp"
#include "tpolab/serialize.hpp"
#include "tpolab/svg.hpp"

namespace {

using namespace tpolab;

int cmd_gen_env(const std::string& spec_path, std::uint64_t seed,
                const std::string& out_path) {
  const InstanceSpec spec = instance_spec_from_json(read_file(spec_path));
  const GeneratedEnv env = generate_instance(spec, seed);
  write_file(out_path, instance_to_json(env));
  std::printf("wrote %s (|S|=%d |A|=%d W=%d |Pi|=%d)\n", out_path.c_str(),
              static_cast<int>(env.inst.num_states()),
              static_cast<int>(env.inst.num_actions()),
              static_cast<int>(env.sources.size()),
              static_cast<int>(env.cls.size()));
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  ExperimentConfig cfg = experiment_config_from_json(read_file(config_path));
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  const Report rep = run_roster(cfg);
  std::printf("ran %zu algorithms x %d trials; artifacts in %s\n",
              rep.roster.size(), rep.trials, cfg.out_dir.c_str());
  return 0;
}

int cmd_bounds(const std::string& instance_path, const std::string& out_path) {
  const GeneratedEnv env = instance_from_json(read_file(instance_path));
  const BanditInstance& inst = env.inst;
  std::vector<BoundReport> reports;

  std::vector<PolicyTable> comparators;
  comparators.push_back(inst.optimal_policy());
  for (const RewardTable& r : env.sources) {
    comparators.push_back(closed_form_policy(r, inst));
  }

  for (std::size_t i = 0; i < env.cls.size(); ++i) {
    BoundReport rep = cov_gap_upper_bound(env.cls.members[i], inst);
    rep.bound_name += ":member=" + std::to_string(env.cls.ids[i]);
    reports.push_back(std::move(rep));
  }
  for (std::size_t w = 0; w < env.sources.size(); ++w) {
    const PolicyTable pi_w = closed_form_policy(env.sources[w], inst);
    BoundReport gap = cov_gap_upper_bound(pi_w, inst);
    gap.bound_name += ":source=" + std::to_string(w);
    reports.push_back(std::move(gap));
    BoundReport exp_bound = cov_exp_upper_bound(env.sources[w], inst);
    exp_bound.bound_name += ":source=" + std::to_string(w);
    reports.push_back(std::move(exp_bound));
    BoundReport lower = win_rate_cov_lower_bound(pi_w, inst, comparators);
    lower.bound_name += ":source=" + std::to_string(w);
    reports.push_back(std::move(lower));
  }
  for (std::size_t i = 0; i < env.cls.size(); ++i) {
    const double residual = kl_value_identity_residual(env.cls.members[i],
                                                       inst);
    BoundReport rep = make_upper_report(
        "kl_value_identity:member=" + std::to_string(env.cls.ids[i]),
        residual, 1e-10);
    reports.push_back(std::move(rep));
  }
  reports.push_back(sigmoid_gap_check(1.0, 0.0, 1.0));
  reports.push_back(sigmoid_gap_check(0.5, -0.5, 2.0));

  write_file(out_path, bounds_to_csv(reports));
  int violations = 0;
  for (const BoundReport& rep : reports) {
    if (!rep.satisfied) ++violations;
  }
  std::printf("wrote %s (%zu reports, %d violations)\n", out_path.c_str(),
              reports.size(), violations);
  return 0;
}

int cmd_report(const std::string& in_dir, const std::string& out_dir) {
  // Rebuild plots from the CSV artifacts of a previous run.
  const auto curves_csv = read_csv(read_file(in_dir + "/regret_curves.csv"));
  std::vector<std::string> order;
  std::map<std::string, LineSeries> by_alg;
  for (std::size_t i = 1; i < curves_csv.size(); ++i) {
    const auto& row = curves_csv[i];
    if (row.size() < 5) continue;
    LineSeries& s = by_alg[row[0]];
    if (s.label.empty()) {
      s.label = row[0];
      order.push_back(row[0]);
    }
    s.x.push_back(std::stod(row[1]));
    s.y.push_back(std::stod(row[2]));
    s.band_lo.push_back(std::stod(row[3]));
    s.band_hi.push_back(std::stod(row[4]));
  }
  std::vector<LineSeries> series;
  for (const std::string& alg : order) series.push_back(by_alg[alg]);
  write_file(out_dir + "/regret_curves.svg",
             svg_line_chart(series, "Cumulative regret (mean over trials)",
                            "step", "cumulative regret"));

  std::string sel_text;
  try {
    sel_text = read_file(in_dir + "/selection_freq.csv");
  } catch (const ValidationError&) {
    std::printf("wrote %s/regret_curves.svg\n", out_dir.c_str());
    return 0;
  }
  const auto sel_csv = read_csv(sel_text);
  struct SelAccum {
    std::vector<std::string> arms;
    std::map<int, std::map<std::string, double>> rows;
  };
  std::map<std::string, SelAccum> sels;
  std::vector<std::string> sel_order;
  for (std::size_t i = 1; i < sel_csv.size(); ++i) {
    const auto& row = sel_csv[i];
    if (row.size() < 4) continue;
    SelAccum& acc = sels[row[0]];
    if (acc.rows.empty() && acc.arms.empty()) sel_order.push_back(row[0]);
    const int block = std::stoi(row[1]);
    if (std::find(acc.arms.begin(), acc.arms.end(), row[2]) ==
        acc.arms.end()) {
      acc.arms.push_back(row[2]);
    }
    acc.rows[block][row[2]] = std::stod(row[3]);
  }
  for (const std::string& alg : sel_order) {
    const SelAccum& acc = sels[alg];
    Matrix freq = Matrix::Zero(static_cast<Eigen::Index>(acc.rows.size()),
                               static_cast<Eigen::Index>(acc.arms.size()));
    std::vector<std::string> blocks;
    Eigen::Index b = 0;
    for (const auto& [block, cells] : acc.rows) {
      blocks.push_back("block " + std::to_string(block));
      for (std::size_t a = 0; a < acc.arms.size(); ++a) {
        auto it = cells.find(acc.arms[a]);
        if (it != cells.end()) freq(b, static_cast<Eigen::Index>(a)) =
            it->second;
      }
      ++b;
    }
    std::string name = alg;
    for (char& c : name) {
      if (c == ':' || c == '/' || c == ' ') c = '_';
    }
    write_file(out_dir + "/selection_" + name + ".svg",
               svg_stacked_bars(blocks, acc.arms, freq,
                                "Selection frequencies: " + alg));
  }
  std::printf("wrote SVG reports to %s\n", out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KL-regularized preference-bandit transfer learning lab"};
  app.require_subcommand(1);

  std::string spec_path, out_path, config_path, instance_path, in_dir;
  std::uint64_t seed = 0;

  CLI::App* gen = app.add_subcommand("gen-env",
                                     "generate an instance with sources");
  gen->add_option("--spec", spec_path, "instance spec JSON")->required();
  gen->add_option("--seed", seed, "generator seed")->required();
  gen->add_option("--out", out_path, "output instance JSON")->required();

  CLI::App* run = app.add_subcommand("run", "run the experiment roster");
  run->add_option("--config", config_path, "experiment config JSON")
      ->required();
  run->add_option("--out", out_path, "output directory (overrides config)");

  CLI::App* bounds = app.add_subcommand("bounds",
                                        "evaluate bound reports on an instance");
  bounds->add_option("--instance", instance_path, "instance JSON")->required();
  bounds->add_option("--out", out_path, "output CSV")->required();

  CLI::App* report = app.add_subcommand("report", "render SVG from run CSVs");
  report->add_option("--in", in_dir, "run output directory")->required();
  report->add_option("--out", out_path, "report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_env(spec_path, seed, out_path);
    if (run->parsed()) return cmd_run(config_path, out_path);
    if (bounds->parsed()) return cmd_bounds(instance_path, out_path);
    if (report->parsed()) return cmd_report(in_dir, out_path);
  } catch (const GenerationError& e) {
    std::fprintf(stderr, "generation failure: %s\n", e.what());
    return 3;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "validation failure: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
