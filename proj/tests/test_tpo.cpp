#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "tpolab/harness.hpp"
#include "tpolab/bounds.hpp"
#include "tpolab/tpo.hpp"

using namespace tpolab;
using namespace tpolab::testutil;

namespace {

GeneratedEnv make_env(int states, int actions, int class_size, double beta,
                      std::vector<double> deltas, std::uint64_t seed) {
  InstanceSpec spec;
  spec.num_states = states;
  spec.num_actions = actions;
  spec.class_size = class_size;
  spec.beta = beta;
  spec.r_max = 1.0;
  spec.source_deltas = std::move(deltas);
  return generate_instance(spec, seed);
}

}  // namespace

TEST_CASE("config validation") {
  GeneratedEnv env = make_env(3, 3, 6, 0.5, {}, 1);
  TpoConfig cfg;
  cfg.T = 100;
  cfg.N = 10;

  SUBCASE("alpha boundaries are rejected") {
    cfg.alpha = 1.0;
    CHECK_THROWS_AS(cfg.validate(env.inst), ValidationError);
    cfg.alpha = 0.0;
    CHECK_THROWS_AS(cfg.validate(env.inst), ValidationError);
    cfg.alpha = 0.5;
    CHECK_NOTHROW(cfg.validate(env.inst));
  }

  SUBCASE("T must be a multiple of N") {
    cfg.T = 105;
    CHECK_THROWS_AS(cfg.validate(env.inst), ValidationError);
  }

  SUBCASE("alpha*N >= 1") {
    cfg.alpha = 0.01;  // alpha*N = 0.1
    CHECK_THROWS_AS(cfg.validate(env.inst), ValidationError);
  }

  SUBCASE("default alpha is clamped into the feasible band") {
    cfg.alpha = -1.0;
    const double a = cfg.resolved_alpha(env.inst);
    CHECK(a >= 1.0 / cfg.N);
    CHECK(a <= 1.0 - 1.0 / cfg.N);
    CHECK_NOTHROW(cfg.validate(env.inst));
  }

  SUBCASE("out-of-range source rewards are rejected") {
    Matrix bad = Matrix::Constant(3, 3, 2.0);  // above r_max
    cfg.sources.emplace_back(bad);
    CHECK_THROWS_AS(cfg.validate(env.inst), ValidationError);
  }
}

TEST_CASE("online oracle cold start and exploitation limit") {
  GeneratedEnv env = make_env(4, 4, 8, 0.3, {}, 3);
  PreferenceDataset empty;
  OracleParams params;

  SUBCASE("empty history returns the reference policy") {
    for (OracleKind kind : {OracleKind::XpoLike, OracleKind::OptimisticMle}) {
      params.kind = kind;
      int member = -2;
      const PolicyTable pi =
          online_oracle_step(empty, env.cls, env.inst, params, &member);
      CHECK(member == -1);
      CHECK((pi.probs() - env.inst.pi_ref().probs()).cwiseAbs().maxCoeff() ==
            0.0);
    }
  }

  SUBCASE("zero bonus and clean labels reduce to pure exploitation") {
    // Labels follow the exact reward ranking over a long horizon.
    Rng rng(5);
    PreferenceDataset data;
    for (int i = 0; i < 4000; ++i) {
      PreferenceSample smp;
      smp.s = rng.categorical(env.inst.rho());
      smp.a = rng.categorical(env.inst.pi_ref().probs().row(smp.s).transpose());
      smp.a_tilde =
          rng.categorical(env.inst.pi_ref().probs().row(smp.s).transpose());
      smp.y = env.inst.r_star()(smp.s, smp.a) >=
                      env.inst.r_star()(smp.s, smp.a_tilde)
                  ? 1
                  : 0;
      smp.producer = PolicyRef{PolicyOrigin::Online, -1};
      data.add(smp);
    }
    params.kind = OracleKind::OptimisticMle;
    params.c = 0.0;  // pure exploitation
    int member = -2;
    online_oracle_step(data, env.cls, env.inst, params, &member);
    REQUIRE(member >= 0);

    // Independently rank members by value under the MLE reward.
    ClassTables tables(env.cls, env.inst);
    NllAccumulator acc(&tables.induced_rewards);
    for (const PreferenceSample& s : data.samples) acc.add(s);
    const int j = mle_reward_index(env.cls, acc.means());
    int best = 0;
    for (int i = 1; i < static_cast<int>(env.cls.size()); ++i) {
      if (tables.ediff(i, j) - env.inst.beta() * tables.kl_to_ref(i) >
          tables.ediff(best, j) - env.inst.beta() * tables.kl_to_ref(best)) {
        best = i;
      }
    }
    CHECK(member == best);
  }
}

TEST_CASE("online oracle regret is sublinear") {
  GeneratedEnv env = make_env(5, 4, 20, 0.2, {}, 99);
  const int seeds = 20;
  for (OracleKind kind : {OracleKind::XpoLike, OracleKind::OptimisticMle}) {
    double cum200 = 0.0, cum2000 = 0.0, early = 0.0, late = 0.0;
    for (int seed = 0; seed < seeds; ++seed) {
      TpoConfig cfg;
      cfg.T = 2000;
      cfg.N = 50;
      cfg.alpha = 0.5;
      cfg.oracle = kind;
      RunResult run = online_only_run(cfg, env.cls, env.inst,
                                      derive_seed(41, "oracle", seed));
      cum200 += run.trace[199].cum_regret / seeds;
      cum2000 += run.trace[1999].cum_regret / seeds;
      for (int t = 0; t < 200; ++t) {
        early += run.trace[static_cast<std::size_t>(t)].inst_regret;
        late += run.trace[static_cast<std::size_t>(1800 + t)].inst_regret;
      }
    }
    // Average per-step regret decreases with t and is sublinear in total.
    CHECK(late < early);
    CHECK(cum2000 / 2000.0 < 0.5 * (cum200 / 200.0));
  }
}

TEST_CASE("tps selection") {
  GeneratedEnv env = make_env(5, 4, 10, 0.2, {0.05, 0.25}, 7);
  TpoConfig cfg;
  cfg.T = 1000;
  cfg.N = 50;
  cfg.sources = env.sources;

  Rng rng(9);
  PreferenceDataset data;
  std::vector<PolicyTable> src_pols;
  for (const RewardTable& r : env.sources) {
    src_pols.push_back(closed_form_policy(r, env.inst));
  }
  auto add_samples = [&](const PolicyTable& pi, PolicyRef tag, int count) {
    for (int i = 0; i < count; ++i) {
      PreferenceSample smp;
      smp.s = rng.categorical(env.inst.rho());
      smp.a = rng.categorical(pi.probs().row(smp.s).transpose());
      smp.a_tilde =
          rng.categorical(env.inst.pi_ref().probs().row(smp.s).transpose());
      smp.y = sample_bt_label(env.inst.r_star(), smp.s, smp.a, smp.a_tilde,
                              rng);
      smp.producer = tag;
      smp.comparator = PolicyRef{PolicyOrigin::Reference, -1};
      data.add(smp);
    }
  };

  SUBCASE("empty dataset is rejected") {
    PreferenceDataset empty;
    CHECK_THROWS_AS(tps_select(empty, cfg, env.cls, env.inst),
                    ValidationError);
  }

  SUBCASE("an unsampled source is always chosen first") {
    add_samples(src_pols[0], PolicyRef{PolicyOrigin::Source, 0}, 200);
    const TransferChoice choice = tps_select(data, cfg, env.cls, env.inst);
    CHECK(choice.kind.origin == PolicyOrigin::Source);
    CHECK(choice.kind.id == 1);  // zero-count source has an infinite bonus
    for (const EstimatedValue& ev : choice.estimated_values) {
      if (ev.candidate.origin == PolicyOrigin::Source && ev.candidate.id == 1) {
        CHECK(std::isinf(ev.value));
      }
    }
  }

  SUBCASE("noise-free overrides collapse onto exact values") {
    add_samples(src_pols[0], PolicyRef{PolicyOrigin::Source, 0}, 150);
    add_samples(src_pols[1], PolicyRef{PolicyOrigin::Source, 1}, 150);
    add_samples(env.inst.pi_ref(), PolicyRef{PolicyOrigin::Online, -1}, 150);
    TpsOverrides overrides;
    overrides.zero_bonuses = true;
    overrides.use_true_reward = true;
    const TransferChoice choice =
        tps_select(data, cfg, env.cls, env.inst, &overrides);
    const double j_ref =
        policy_value(env.inst.pi_ref(), env.inst.r_star(), env.inst);
    // Estimates equal the true value gains exactly.
    for (const EstimatedValue& ev : choice.estimated_values) {
      if (ev.candidate.origin == PolicyOrigin::Source) {
        const double truth =
            policy_value(src_pols[static_cast<std::size_t>(ev.candidate.id)],
                         env.inst.r_star(), env.inst) -
            j_ref;
        CHECK(ev.value == doctest::Approx(truth).epsilon(1e-12));
      }
    }
    // And the selection is the exact argmax over candidates.
    double best = -1e300;
    for (const EstimatedValue& ev : choice.estimated_values) {
      best = std::max(best, ev.value);
    }
    for (const EstimatedValue& ev : choice.estimated_values) {
      if (ev.candidate.origin == choice.kind.origin &&
          ev.candidate.id == choice.kind.id) {
        CHECK(ev.value == doctest::Approx(best));
      }
    }
  }

  SUBCASE("ties prefer the distilled candidate") {
    add_samples(env.inst.pi_ref(), PolicyRef{PolicyOrigin::Online, -1}, 50);
    TpoConfig no_sources = cfg;
    no_sources.sources.clear();
    const TransferChoice choice =
        tps_select(data, no_sources, env.cls, env.inst);
    CHECK(choice.kind.origin == PolicyOrigin::Distilled);
  }
}

TEST_CASE("tpo run mechanics") {
  GeneratedEnv env = make_env(5, 4, 10, 0.2, {0.1}, 15);
  TpoConfig cfg;
  cfg.T = 200;
  cfg.N = 20;
  cfg.alpha = 0.5;
  cfg.sources = env.sources;

  const RunResult run = tpo_run(cfg, env.cls, env.inst, 12345);

  SUBCASE("block index arithmetic matches the definition") {
    REQUIRE(static_cast<int>(run.trace.size()) == cfg.T);
    for (const RegretRow& row : run.trace) {
      CHECK(row.block == (row.step + cfg.N - 1) / cfg.N);
      CHECK(row.inner == ((row.step - 1) % cfg.N) + 1);
      CHECK(row.block == static_cast<int>(std::ceil(
                             static_cast<double>(row.step) / cfg.N)));
    }
  }

  SUBCASE("regret trace invariants") {
    double prev = 0.0;
    for (const RegretRow& row : run.trace) {
      CHECK(row.inst_regret >= -1e-10);
      CHECK(row.cum_regret >= prev - 1e-12);
      prev = row.cum_regret;
    }
  }

  SUBCASE("online and transfer phases follow alpha*N") {
    for (const RegretRow& row : run.trace) {
      const bool online = row.played.origin == PolicyOrigin::Online ||
                          (row.played.origin == PolicyOrigin::Reference);
      CHECK(online == (row.inner <= cfg.alpha * cfg.N + 1e-9));
    }
  }

  SUBCASE("producer tags match played policies and counts") {
    int source_samples = 0;
    for (std::size_t i = 0; i < run.data.samples.size(); ++i) {
      CHECK(run.data.samples[i].producer == run.trace[i].played);
      if (run.data.samples[i].producer.origin == PolicyOrigin::Source) {
        ++source_samples;
      }
    }
    int source_steps = 0;
    for (const RegretRow& row : run.trace) {
      if (row.played.origin == PolicyOrigin::Source) ++source_steps;
    }
    CHECK(source_samples == source_steps);
  }

  SUBCASE("deterministic given the seed") {
    const RunResult again = tpo_run(cfg, env.cls, env.inst, 12345);
    REQUIRE(again.trace.size() == run.trace.size());
    for (std::size_t i = 0; i < run.trace.size(); ++i) {
      CHECK(again.trace[i].cum_regret == run.trace[i].cum_regret);
      CHECK(again.trace[i].played == run.trace[i].played);
    }
    const RunResult other = tpo_run(cfg, env.cls, env.inst, 54321);
    bool any_diff = false;
    for (std::size_t i = 0; i < run.trace.size(); ++i) {
      if (other.data.samples[i].a != run.data.samples[i].a) any_diff = true;
    }
    CHECK(any_diff);
  }

  SUBCASE("cached selector reuses one choice per block") {
    TpoConfig cached = cfg;
    cached.cache_tps_per_block = true;
    const RunResult slim = tpo_run(cached, env.cls, env.inst, 12345);
    CHECK(slim.selection_log.size() ==
          static_cast<std::size_t>(cfg.T / cfg.N));
    CHECK(run.selection_log.size() > slim.selection_log.size());
  }
}

TEST_CASE("tpo degrades to online learning plus self-transfer when W=0") {
  GeneratedEnv env = make_env(5, 4, 8, 0.3, {}, 23);
  TpoConfig cfg;
  cfg.T = 200;
  cfg.N = 20;
  cfg.alpha = 0.5;
  const RunResult run = tpo_run(cfg, env.cls, env.inst, 7);
  int distilled_steps = 0;
  for (const RegretRow& row : run.trace) {
    CHECK(row.played.origin != PolicyOrigin::Source);
    if (row.played.origin == PolicyOrigin::Distilled) ++distilled_steps;
  }
  CHECK(distilled_steps == cfg.T / 2);
  CHECK_FALSE(run.final_policy.empty());
}

TEST_CASE("a perfect source dominates transfer selections") {
  // One source whose reward equals r_star: after the first block, transfer
  // steps pick it (or the distilled policy) essentially always.
  GeneratedEnv env = make_env(10, 5, 12, 0.2, {0.0}, 29);
  const int seeds = 20;
  double share = 0.0;
  for (int seed = 0; seed < seeds; ++seed) {
    TpoConfig cfg;
    cfg.T = 600;
    cfg.N = 50;
    cfg.alpha = 0.8;
    cfg.sources = env.sources;
    const RunResult run = tpo_run(cfg, env.cls, env.inst,
                                  derive_seed(61, "perfect", seed));
    int transfer = 0, good = 0;
    for (const RegretRow& row : run.trace) {
      if (row.block == 1) continue;  // skip the first block
      if (row.played.origin == PolicyOrigin::Source ||
          row.played.origin == PolicyOrigin::Distilled) {
        ++transfer;
        if ((row.played.origin == PolicyOrigin::Source && row.played.id == 0) ||
            row.played.origin == PolicyOrigin::Distilled) {
          ++good;
        }
      }
    }
    REQUIRE(transfer > 0);
    share += static_cast<double>(good) / transfer / seeds;
  }
  CHECK(share > 0.8);
}

TEST_CASE("iota diagnostic trends down on a converging run") {
  GeneratedEnv env = make_env(5, 4, 10, 0.2, {0.05}, 31);
  std::vector<double> early, late;
  for (int seed = 0; seed < 5; ++seed) {
    TpoConfig cfg;
    cfg.T = 4000;
    cfg.N = 50;
    cfg.alpha = 0.9;
    cfg.sources = env.sources;
    cfg.cache_tps_per_block = true;
    const RunResult run = tpo_run(cfg, env.cls, env.inst,
                                  derive_seed(71, "iota", seed));
    const std::vector<double> iota = iota_diagnostic(
        run, env.cls, env.inst, env.sources, cfg.resolved_alpha(env.inst));
    REQUIRE(!iota.empty());
    // Locate transfer steps nearest tau=400 and tau=4000.
    std::vector<int> taus;
    for (const RegretRow& row : run.trace) {
      if (row.played.origin == PolicyOrigin::Source ||
          row.played.origin == PolicyOrigin::Distilled) {
        taus.push_back(row.step);
      }
    }
    REQUIRE(taus.size() == iota.size());
    double at400 = 0, at4000 = 0;
    for (std::size_t i = 0; i < taus.size(); ++i) {
      if (taus[i] <= 400) at400 = iota[i];
      at4000 = iota[i];
    }
    early.push_back(at400);
    late.push_back(at4000);
  }
  std::sort(early.begin(), early.end());
  std::sort(late.begin(), late.end());
  CHECK(late[late.size() / 2] < early[early.size() / 2]);
}
