#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "tpolab/bounds.hpp"

using namespace tpolab;
using namespace tpolab::testutil;

TEST_CASE("kappa") {
  SUBCASE("values at 2 and e") {
    CHECK(kappa(2.0) ==
          doctest::Approx(1.0 / (1.0 - std::log(2.0))).epsilon(1e-13));
    CHECK(kappa(2.0) == doctest::Approx(3.2589).epsilon(1e-4));
    const double e = std::exp(1.0);
    CHECK(kappa(e) ==
          doctest::Approx((e - 1.0) * (e - 1.0) / (e - 2.0)).epsilon(1e-13));
    CHECK(kappa(e) == doctest::Approx(4.1104).epsilon(1e-4));
  }

  SUBCASE("limit at one from above") {
    // Numeric limit oracle: the formula approaches 2 monotonically.
    double prev = kappa(1.0 + 1e-2);
    for (double u : {1e-3, 1e-4, 1e-5}) {
      const double v = kappa(1.0 + u);
      CHECK(v < prev);
      prev = v;
    }
    CHECK(kappa(1.0 + 1e-7) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(kappa(1.0 + 1e-9) == doctest::Approx(2.0).epsilon(1e-8));
  }

  SUBCASE("domain") {
    CHECK_THROWS_AS(kappa(1.0), ValidationError);
    CHECK_THROWS_AS(kappa(0.5), ValidationError);
  }

  SUBCASE("monotone increasing on a thousand-point grid") {
    double prev = kappa(1.0 + 1e-6);
    for (int i = 1; i <= 1000; ++i) {
      const double x = 1.0 + 1e-6 + 30.0 * i / 1000.0;
      const double v = kappa(x);
      CHECK(v >= prev - 1e-12);
      prev = v;
    }
  }
}

TEST_CASE("coverage/value-gap upper bound") {
  const BanditInstance inst = worked_instance();

  SUBCASE("zero gap gives equality at one") {
    const BoundReport rep = cov_gap_upper_bound(inst.optimal_policy(), inst);
    CHECK(rep.lhs == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.rhs == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.satisfied);
  }

  SUBCASE("worked instance numbers") {
    const BoundReport rep = cov_gap_upper_bound(inst.pi_ref(), inst);
    CHECK(rep.lhs == doctest::Approx(1.2136).epsilon(1e-4));
    // rhs = 1 + kappa(e^2) * gap with kappa(e^2) = (e^2-1)^2/(e^2-3).
    const double e2 = std::exp(2.0);
    const double gap =
        inst.optimal_value() - policy_value(inst.pi_ref(), inst.r_star(),
                                            inst);
    const double expected = 1.0 + (e2 - 1.0) * (e2 - 1.0) / (e2 - 3.0) * gap;
    CHECK(rep.rhs == doctest::Approx(expected).epsilon(1e-12));
    CHECK(rep.rhs == doctest::Approx(2.117).epsilon(1e-3));
    CHECK(rep.satisfied);
  }

  SUBCASE("random filtered policies never violate") {
    Rng rng(3);
    for (int i = 0; i < 40; ++i) {
      const BanditInstance ri = random_instance(rng);
      for (int k = 0; k < 50; ++k) {
        const PolicyTable pi = random_filtered_policy(ri, rng, 1 + (k % 3));
        CHECK(cov_gap_upper_bound(pi, ri).satisfied);
      }
    }
  }

  SUBCASE("ratio violations are rejected") {
    Matrix spiky(1, 2);
    spiky << 0.999, 0.001;
    CHECK_THROWS_AS(cov_gap_upper_bound(PolicyTable(spiky), inst),
                    ValidationError);
  }
}

TEST_CASE("exponential-moment coverage bound") {
  const BanditInstance inst = worked_instance();

  SUBCASE("exact reward reaches the trivial bound") {
    const BoundReport rep = cov_exp_upper_bound(inst.r_star(), inst);
    CHECK(rep.lhs == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(rep.rhs == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(rep.satisfied);
  }

  SUBCASE("per-state constant shifts are absorbed by b") {
    const double c = 0.35;
    const RewardTable shifted(inst.r_star().values().array() + c);
    const BoundReport rep = cov_exp_upper_bound(shifted, inst);
    CHECK(rep.lhs == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(rep.rhs == doctest::Approx(1.0).epsilon(1e-7));
  }

  SUBCASE("random perturbed rewards never violate") {
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
      const BanditInstance ri = random_instance(rng);
      Matrix noise(ri.num_states(), ri.num_actions());
      for (Eigen::Index s = 0; s < noise.rows(); ++s) {
        for (Eigen::Index a = 0; a < noise.cols(); ++a) {
          noise(s, a) = rng.uniform(-0.4, 0.4);
        }
      }
      const RewardTable r(
          (ri.r_star().values() + noise).cwiseMax(0.0).cwiseMin(ri.r_max()));
      CHECK(cov_exp_upper_bound(r, ri).satisfied);
    }
  }
}

TEST_CASE("win-rate coverage lower bound") {
  const BanditInstance inst = worked_instance();

  SUBCASE("tight at the optimal policy") {
    const BoundReport rep = win_rate_cov_lower_bound(
        inst.optimal_policy(), inst, {inst.optimal_policy()});
    CHECK(rep.lhs == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.rhs >= 0.99);
    CHECK(rep.rhs <= rep.lhs + 1e-9);
    CHECK(rep.satisfied);
  }

  SUBCASE("a single tiny gamma weakens but never breaks the bound") {
    // Evaluate the bound expression by hand at gamma = 1e-3.
    const double gamma = 1e-3;
    const double p = 0.5;  // P(pi* > pi*) under any preference model
    const double weak =
        1.0 / std::sqrt((gamma + 2.0 * p) * std::log((1.0 + gamma) / gamma));
    const BoundReport rep = win_rate_cov_lower_bound(
        inst.optimal_policy(), inst, {inst.optimal_policy()});
    CHECK(weak < rep.rhs);
    CHECK(weak <= rep.lhs + 1e-9);
  }

  SUBCASE("random draws never violate") {
    Rng rng(11);
    for (int i = 0; i < 100; ++i) {
      const BanditInstance ri = random_instance(rng);
      const PolicyTable pi =
          random_dirichlet_policy(ri.num_states(), ri.num_actions(), rng);
      std::vector<PolicyTable> comparators{
          ri.optimal_policy(),
          random_filtered_policy(ri, rng),
          random_dirichlet_policy(ri.num_states(), ri.num_actions(), rng)};
      CHECK(win_rate_cov_lower_bound(pi, ri, comparators).satisfied);
    }
  }

  SUBCASE("no comparators is an error") {
    CHECK_THROWS_AS(win_rate_cov_lower_bound(inst.optimal_policy(), inst, {}),
                    ValidationError);
  }
}

TEST_CASE("value-gap/KL identity") {
  const BanditInstance inst = worked_instance();
  CHECK(kl_value_identity_residual(inst.optimal_policy(), inst) < 1e-12);

  // Worked numbers: gap J* - J_ref equals beta * KL(ref || pi*).
  const double gap =
      inst.optimal_value() - policy_value(inst.pi_ref(), inst.r_star(), inst);
  const double kl =
      kl_divergence(inst.pi_ref(), inst.optimal_policy(), inst.rho());
  CHECK(gap == doctest::Approx(kl).epsilon(1e-12));
  CHECK(kl_value_identity_residual(inst.pi_ref(), inst) < 1e-12);

  Rng rng(13);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const BanditInstance ri = random_instance(rng);
    const PolicyTable pi =
        random_dirichlet_policy(ri.num_states(), ri.num_actions(), rng);
    worst = std::max(worst, kl_value_identity_residual(pi, ri));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("sigmoid gap bound") {
  const BoundReport zero = sigmoid_gap_check(0.3, 0.3, 1.0);
  CHECK(zero.lhs == 0.0);
  CHECK(zero.rhs == 0.0);
  CHECK(zero.satisfied);

  const BoundReport worked = sigmoid_gap_check(1.0, 0.0, 1.0);
  CHECK(worked.lhs == 1.0);
  const double expected =
      4.0 * std::exp(1.0) * (1.0 / (1.0 + std::exp(-1.0)) - 0.5);
  CHECK(worked.rhs == doctest::Approx(expected).epsilon(1e-13));
  CHECK(worked.rhs == doctest::Approx(2.513).epsilon(1e-3));
  CHECK(worked.satisfied);

  CHECK_THROWS_AS(sigmoid_gap_check(2.0, 0.0, 1.0), ValidationError);

  Rng rng(17);
  for (double C : {0.5, 1.0, 2.0, 5.0}) {
    for (int i = 0; i < 10000; ++i) {
      const double x = rng.uniform(-C, C);
      const double y = rng.uniform(-C, C);
      CHECK(sigmoid_gap_check(x, y, C).satisfied);
    }
  }
}

TEST_CASE("total-variation chain step of the win-rate bound") {
  // 1 - TV(pi||tilde) <= sqrt((gamma + 2 P(pi > tilde)) log((1+gamma)/gamma))
  // on single-state instances, at every gamma on the grid.
  Rng rng(19);
  for (int i = 0; i < 300; ++i) {
    const int A = 2 + static_cast<int>(rng.uniform() * 6);
    Vector u(A), v(A), r(A);
    for (int a = 0; a < A; ++a) {
      u(a) = rng.exponential();
      v(a) = rng.exponential();
      r(a) = rng.uniform(0.0, 1.0);
    }
    u /= u.sum();
    v /= v.sum();
    const double tv = 0.5 * (u - v).cwiseAbs().sum();
    double p = 0.0;  // P(pi > tilde) with pi = v, tilde = u
    for (int a = 0; a < A; ++a) {
      for (int b = 0; b < A; ++b) {
        p += v(a) * u(b) * sigmoid(r(a) - r(b));
      }
    }
    for (int g = 0; g < 71; g += 7) {
      const double gamma = std::pow(10.0, -3.0 + 7.0 * g / 70.0);
      const double rhs =
          std::sqrt((gamma + 2.0 * p) * std::log((1.0 + gamma) / gamma));
      CHECK(1.0 - tv <= rhs + 1e-9);
    }
  }
}

TEST_CASE("bound report bookkeeping") {
  const BoundReport upper = make_upper_report("u", 1.0, 1.0 + 5e-10);
  CHECK(upper.satisfied);
  CHECK(upper.slack == doctest::Approx(5e-10));
  const BoundReport broken = make_upper_report("u", 2.0, 1.0);
  CHECK_FALSE(broken.satisfied);
  const BoundReport lower = make_lower_report("l", 1.0, 1.0 - 5e-10);
  CHECK(lower.satisfied);
  const BoundReport lbroken = make_lower_report("l", 0.5, 1.0);
  CHECK_FALSE(lbroken.satisfied);
}
