#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "tpolab/core.hpp"

using namespace tpolab;
using namespace tpolab::testutil;

namespace {
const double kSigma1 = 1.0 / (1.0 + std::exp(-1.0));
}

TEST_CASE("policy table validation") {
  Matrix bad(1, 2);
  bad << 0.6, 0.5;
  CHECK_THROWS_AS(PolicyTable{bad}, ValidationError);
  bad << 1.0, 0.0;
  CHECK_THROWS_AS(PolicyTable{bad}, ValidationError);
  bad << 1.2, -0.2;
  CHECK_THROWS_AS(PolicyTable{bad}, ValidationError);
  Matrix ok(1, 2);
  ok << 0.5 + 4e-13, 0.5 - 4e-13;  // within tolerance, renormalized
  const PolicyTable pi(ok);
  CHECK(pi.probs().row(0).sum() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("instance validation") {
  Vector rho(1);
  rho << 1.0;
  Matrix ref(1, 2);
  ref << 0.5, 0.5;
  Matrix r(1, 2);
  r << 1.5, 0.0;  // above r_max
  CHECK_THROWS_AS(
      BanditInstance(rho, PolicyTable(ref), 1.0, 1.0, RewardTable(r)),
      ValidationError);
  r << 0.5, 0.0;
  CHECK_THROWS_AS(
      BanditInstance(rho, PolicyTable(ref), -1.0, 1.0, RewardTable(r)),
      ValidationError);
}

TEST_CASE("closed form policy") {
  const BanditInstance inst = worked_instance();

  SUBCASE("constant reward per state returns the reference") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
      const BanditInstance ri = random_instance(rng);
      Matrix r(ri.num_states(), ri.num_actions());
      for (Eigen::Index s = 0; s < r.rows(); ++s) {
        r.row(s).setConstant(rng.uniform(0.0, ri.r_max()));
      }
      const PolicyTable pi = closed_form_policy(RewardTable(r), ri);
      CHECK((pi.probs() - ri.pi_ref().probs()).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  SUBCASE("worked instance recovers sigma(1)") {
    const PolicyTable pi = inst.optimal_policy();
    CHECK(pi(0, 0) == doctest::Approx(kSigma1).epsilon(1e-12));
    CHECK(pi(0, 1) == doctest::Approx(1.0 - kSigma1).epsilon(1e-12));
    CHECK(pi(0, 0) == doctest::Approx(0.7311).epsilon(1e-4));
  }

  SUBCASE("huge beta forces the reference") {
    Vector rho(1);
    rho << 1.0;
    Matrix ref(1, 2);
    ref << 0.5, 0.5;
    Matrix r(1, 2);
    r << 1.0, 0.0;
    const BanditInstance big(rho, PolicyTable(ref), 1e6, 1.0, RewardTable(r));
    const PolicyTable pi = closed_form_policy(big.r_star(), big);
    CHECK((pi.probs() - big.pi_ref().probs()).cwiseAbs().maxCoeff() < 1e-5);
  }

  SUBCASE("tiny beta does not overflow") {
    // r/beta = 720 would overflow exp() without the per-row max shift.
    Vector rho(1);
    rho << 1.0;
    Matrix ref(1, 2);
    ref << 0.5, 0.5;
    Matrix r(1, 2);
    r << 1.0, 0.0;
    const BanditInstance sharp(rho, PolicyTable(ref), 1.0 / 720.0, 1.0,
                               RewardTable(r));
    const PolicyTable pi = closed_form_policy(sharp.r_star(), sharp);
    CHECK(pi.probs().allFinite());
    CHECK(pi(0, 0) > 1.0 - 1e-12);
    CHECK(pi(0, 1) > 0.0);
  }
}

TEST_CASE("policy value") {
  const BanditInstance inst = worked_instance();

  SUBCASE("reference policy value is the plain expectation") {
    CHECK(policy_value(inst.pi_ref(), inst.r_star(), inst) ==
          doctest::Approx(0.5).epsilon(1e-14));
  }

  SUBCASE("worked optimal value, hand-expanded") {
    const double p = kSigma1;
    const double expected =
        p * 1.0 - (p * std::log(2.0 * p) + (1 - p) * std::log(2.0 * (1 - p)));
    CHECK(policy_value(inst.optimal_policy(), inst.r_star(), inst) ==
          doctest::Approx(expected).epsilon(1e-13));
    CHECK(expected == doctest::Approx(0.6201).epsilon(1e-4));
  }

  SUBCASE("closed form maximizes the objective") {
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
      const BanditInstance ri = random_instance(rng);
      const RewardTable r(random_reward_matrix(ri.num_states(),
                                               ri.num_actions(), ri.r_max(),
                                               rng));
      const double best = policy_value(closed_form_policy(r, ri), r, ri);
      for (int i = 0; i < 1000; ++i) {
        const PolicyTable pi =
            random_dirichlet_policy(ri.num_states(), ri.num_actions(), rng);
        CHECK(best >= policy_value(pi, r, ri) - 1e-12);
      }
    }
  }
}

TEST_CASE("kl divergence") {
  const BanditInstance inst = worked_instance();
  const PolicyTable& star = inst.optimal_policy();
  CHECK(kl_divergence(star, star, inst.rho()) == doctest::Approx(0.0));

  const double p = kSigma1;
  const double kl_star_ref =
      p * std::log(2.0 * p) + (1 - p) * std::log(2.0 * (1 - p));
  CHECK(kl_divergence(star, inst.pi_ref(), inst.rho()) ==
        doctest::Approx(kl_star_ref).epsilon(1e-13));
  CHECK(kl_star_ref == doctest::Approx(0.1110).epsilon(1e-3));

  const double kl_ref_star =
      0.5 * std::log(0.5 / p) + 0.5 * std::log(0.5 / (1 - p));
  CHECK(kl_divergence(inst.pi_ref(), star, inst.rho()) ==
        doctest::Approx(kl_ref_star).epsilon(1e-13));
  CHECK(kl_ref_star == doctest::Approx(0.1201).epsilon(1e-3));
}

TEST_CASE("coverage coefficient") {
  const BanditInstance inst = worked_instance();
  SUBCASE("identical policies cover perfectly") {
    CHECK(coverage_coefficient(inst.pi_ref(), inst.pi_ref(), inst.rho()) ==
          doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("hand-computed two-action case") {
    Matrix t(1, 2), b(1, 2);
    t << 0.8, 0.2;
    b << 0.5, 0.5;
    CHECK(coverage_coefficient(PolicyTable(t), PolicyTable(b), inst.rho()) ==
          doctest::Approx(1.36).epsilon(1e-12));
  }
  SUBCASE("optimal policy vs uniform") {
    const double p = kSigma1;
    const double expected = (p * p + (1 - p) * (1 - p)) / 0.5;
    CHECK(coverage_coefficient(inst.optimal_policy(), inst.pi_ref(),
                               inst.rho()) ==
          doctest::Approx(expected).epsilon(1e-13));
    CHECK(expected == doctest::Approx(1.2136).epsilon(1e-4));
  }
  SUBCASE("at least one, equality only at identity") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
      const BanditInstance ri = random_instance(rng);
      const PolicyTable a =
          random_dirichlet_policy(ri.num_states(), ri.num_actions(), rng);
      const PolicyTable b =
          random_dirichlet_policy(ri.num_states(), ri.num_actions(), rng);
      CHECK(coverage_coefficient(a, b, ri.rho()) >= 1.0 - 1e-12);
      CHECK(coverage_coefficient(a, a, ri.rho()) ==
            doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("linf coverability") {
  PolicyClass cls;
  Matrix a(1, 2);
  a << 0.8, 0.2;
  cls.add(PolicyTable(a), 0);
  CHECK(linf_coverability(cls) == doctest::Approx(1.0).epsilon(1e-12));
  Matrix b(1, 2);
  b << 0.2, 0.8;
  cls.add(PolicyTable(b), 1);
  CHECK(linf_coverability(cls) == doctest::Approx(1.6).epsilon(1e-12));

  // Near-point-mass policies on disjoint modes approach the class size.
  PolicyClass spikes;
  const int k = 4;
  for (int i = 0; i < k; ++i) {
    Matrix m(1, k);
    m.setConstant(1e-9 / (k - 1));
    m(0, i) = 1.0 - 1e-9;
    spikes.add(PolicyTable(m), i);
  }
  CHECK(linf_coverability(spikes) == doctest::Approx(k).epsilon(1e-6));

  CHECK_THROWS_AS(linf_coverability(PolicyClass{}), ValidationError);
}

TEST_CASE("reward from policy") {
  const BanditInstance inst = worked_instance();
  SUBCASE("reference maps to zero reward") {
    const RewardTable r = reward_from_policy(inst.pi_ref(), inst);
    CHECK(r.values().cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("worked optimal policy maps back to (1,0)") {
    const RewardTable r = reward_from_policy(inst.optimal_policy(), inst);
    CHECK(r(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r(0, 1) == doctest::Approx(0.0));
  }
  SUBCASE("round trip over random rewards") {
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
      const BanditInstance ri = random_instance(rng);
      const RewardTable r(random_reward_matrix(ri.num_states(),
                                               ri.num_actions(), ri.r_max(),
                                               rng));
      const PolicyTable pi = closed_form_policy(r, ri);
      const RewardTable back = reward_from_policy(pi, ri);
      const PolicyTable pi2 = closed_form_policy(back, ri);
      CHECK((pi.probs() - pi2.probs()).cwiseAbs().maxCoeff() < 1e-10);
      // Recovered up to a per-state constant, argmax preserved.
      for (Eigen::Index s = 0; s < ri.num_states(); ++s) {
        Eigen::Index argmax_orig, argmax_back;
        r.values().row(s).maxCoeff(&argmax_orig);
        back.values().row(s).maxCoeff(&argmax_back);
        CHECK(argmax_orig == argmax_back);
        const double shift = r(s, 0) - back(s, 0);
        for (Eigen::Index a = 0; a < ri.num_actions(); ++a) {
          CHECK(r(s, a) - back(s, a) == doctest::Approx(shift).epsilon(1e-9));
        }
      }
    }
  }
}

TEST_CASE("bounded ratio filter") {
  const BanditInstance inst = worked_instance();
  PolicyClass cls;
  cls.add(inst.pi_ref(), 0);
  cls.add(inst.optimal_policy(), 1);
  Matrix spiky(1, 2);
  spiky << 0.999, 0.001;  // |log(0.001/0.5)| = 6.21 > 1
  cls.add(PolicyTable(spiky), 2);
  const PolicyClass kept = bounded_ratio_filter(cls, inst);
  REQUIRE(kept.size() == 2);
  CHECK(kept.ids[0] == 0);
  CHECK(kept.ids[1] == 1);

  SUBCASE("closed-form policies of in-range rewards always pass") {
    Rng rng(13);
    for (int i = 0; i < 200; ++i) {
      const BanditInstance ri = random_instance(rng);
      const PolicyTable pi = random_filtered_policy(ri, rng);
      CHECK(max_abs_log_ratio(pi, ri.pi_ref()) <=
            ri.r_max() / ri.beta() + 1e-12);
    }
  }

  SUBCASE("convex hull stays inside the filter") {
    Rng rng(17);
    for (int i = 0; i < 50; ++i) {
      const BanditInstance ri = random_instance(rng);
      const PolicyTable mix = random_filtered_policy(ri, rng, 4);
      PolicyClass one;
      one.add(mix, 0);
      CHECK(bounded_ratio_filter(one, ri).size() == 1);
    }
  }
}

TEST_CASE("mixture policy") {
  Rng rng(23);
  Matrix a(1, 2), b(1, 2);
  a << 0.8, 0.2;
  b << 0.2, 0.8;
  const std::vector<PolicyTable> parts{PolicyTable(a), PolicyTable(b)};

  Vector one_hot(2);
  one_hot << 1.0, 0.0;
  CHECK((mixture_policy(parts, one_hot).probs() - a).cwiseAbs().maxCoeff() <
        1e-15);

  Vector half(2);
  half << 0.5, 0.5;
  const PolicyTable mix = mixture_policy(parts, half);
  CHECK(mix(0, 0) == doctest::Approx(0.5));

  Vector bad(2);
  bad << 0.7, 0.7;
  CHECK_THROWS_AS(mixture_policy(parts, bad), ValidationError);

  SUBCASE("objective is concave over mixtures") {
    for (int i = 0; i < 50; ++i) {
      const BanditInstance ri = random_instance(rng);
      std::vector<PolicyTable> ps;
      Vector w(3);
      for (int j = 0; j < 3; ++j) {
        ps.push_back(
            random_dirichlet_policy(ri.num_states(), ri.num_actions(), rng));
        w(j) = rng.exponential();
      }
      w /= w.sum();
      const PolicyTable m = mixture_policy(ps, w);
      double convex_comb = 0.0;
      for (int j = 0; j < 3; ++j) {
        convex_comb += w(j) * policy_value(ps[j], ri.r_star(), ri);
      }
      CHECK(policy_value(m, ri.r_star(), ri) >= convex_comb - 1e-12);
    }
  }
}

TEST_CASE("bradley-terry preference") {
  const BanditInstance inst = worked_instance();
  CHECK(bt_prob(inst.r_star(), 0, 0, 0) == doctest::Approx(0.5));
  CHECK(bt_prob(inst.r_star(), 0, 0, 1) ==
        doctest::Approx(kSigma1).epsilon(1e-14));
  // Antisymmetry is exact.
  CHECK(bt_prob(inst.r_star(), 0, 0, 1) + bt_prob(inst.r_star(), 0, 1, 0) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(bt_prob(inst.r_star(), 0, 0, 5), ValidationError);

  Rng rng(29);
  int ones = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    ones += sample_bt_label(inst.r_star(), 0, 0, 1, rng);
  }
  CHECK(static_cast<double>(ones) / n ==
        doctest::Approx(kSigma1).epsilon(0.02));
}

TEST_CASE("win rate") {
  const BanditInstance inst = worked_instance();
  SUBCASE("self comparison is one half") {
    Rng rng(31);
    for (int i = 0; i < 30; ++i) {
      const BanditInstance ri = random_instance(rng);
      const PolicyTable pi =
          random_dirichlet_policy(ri.num_states(), ri.num_actions(), rng);
      CHECK(win_rate(pi, pi, ri.r_star(), ri) ==
            doctest::Approx(0.5).epsilon(1e-12));
    }
  }
  SUBCASE("degenerate supports reach sigma(1)") {
    Matrix a(1, 2), b(1, 2);
    a << 1.0 - 1e-12, 1e-12;
    b << 1e-12, 1.0 - 1e-12;
    CHECK(win_rate(PolicyTable(a), PolicyTable(b), inst.r_star(), inst) ==
          doctest::Approx(kSigma1).epsilon(1e-9));
  }
  SUBCASE("monte carlo agrees with the exact sum") {
    Rng rng(37);
    for (int i = 0; i < 5; ++i) {
      const BanditInstance ri = random_instance(rng);
      const PolicyTable p1 =
          random_dirichlet_policy(ri.num_states(), ri.num_actions(), rng);
      const PolicyTable p2 =
          random_dirichlet_policy(ri.num_states(), ri.num_actions(), rng);
      const double exact = win_rate(p1, p2, ri.r_star(), ri);
      const int n = 100000;
      const double mc = win_rate_mc(p1, p2, ri.r_star(), ri, n, rng);
      const double se = std::sqrt(exact * (1.0 - exact) / n);
      CHECK(std::abs(mc - exact) <= 3.0 * se + 1e-12);
    }
  }
}

TEST_CASE("best of n") {
  const BanditInstance inst = worked_instance();
  BonSampler defaults{};
  CHECK(defaults.n_bon == 32);

  SUBCASE("n=1 reproduces the base policy") {
    Rng rng(41);
    const BanditInstance ri = random_instance(rng);
    const PolicyTable base =
        random_dirichlet_policy(ri.num_states(), ri.num_actions(), rng);
    const RewardTable src(random_reward_matrix(ri.num_states(),
                                               ri.num_actions(), ri.r_max(),
                                               rng));
    const PolicyTable exact = bon_policy_table(base, src, 1);
    CHECK((exact.probs() - base.probs()).cwiseAbs().maxCoeff() < 1e-12);

    BonSampler sampler{&base, &src, 1};
    Vector counts = Vector::Zero(ri.num_actions());
    const int n = 50000;
    for (int i = 0; i < n; ++i) counts(sampler.sample(0, rng)) += 1.0;
    counts /= n;
    for (Eigen::Index a = 0; a < ri.num_actions(); ++a) {
      const double se = std::sqrt(base(0, a) * (1 - base(0, a)) / n);
      CHECK(std::abs(counts(a) - base(0, a)) <= 4.0 * se + 1e-3);
    }
  }

  SUBCASE("large n concentrates on the source argmax") {
    const PolicyTable table =
        bon_policy_table(inst.pi_ref(), inst.r_star(), 512);
    CHECK(table(0, 0) > 1.0 - 1e-6);
  }

  SUBCASE("sampler matches the exact table") {
    Rng rng(43);
    const PolicyTable base = PolicyTable::uniform(1, 4);
    Matrix r(1, 4);
    r << 0.3, 0.9, 0.9, 0.1;  // tie between actions 1 and 2
    const RewardTable src(r);
    const PolicyTable exact = bon_policy_table(base, src, 8);
    // Ties break to the lowest index: action 1 absorbs action 2's wins.
    CHECK(exact(0, 1) > exact(0, 2));
    Vector counts = Vector::Zero(4);
    BonSampler sampler{&base, &src, 8};
    const int n = 200000;
    for (int i = 0; i < n; ++i) counts(sampler.sample(0, rng)) += 1.0;
    counts /= n;
    for (Eigen::Index a = 0; a < 4; ++a) {
      CHECK(counts(a) == doctest::Approx(exact(0, a)).epsilon(0.05));
    }
  }
}
