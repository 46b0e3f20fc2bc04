#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tpolab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thrown when inputs violate a documented contract (CLI exit code 2).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when instance generation cannot realize its targets (exit code 3).
struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Row-stochastic table pi(a|s). Rows must sum to 1 within 1e-12 and every
/// entry must be strictly positive; rows are renormalized once on
/// construction so downstream identities hold to tight tolerances.
class PolicyTable {
 public:
  PolicyTable() = default;
  explicit PolicyTable(Matrix probs);

  static PolicyTable uniform(Eigen::Index states, Eigen::Index actions);

  const Matrix& probs() const { return probs_; }
  Eigen::Index states() const { return probs_.rows(); }
  Eigen::Index actions() const { return probs_.cols(); }
  double operator()(Eigen::Index s, Eigen::Index a) const {
    return probs_(s, a);
  }
  bool empty() const { return probs_.size() == 0; }

 private:
  Matrix probs_;
};

/// Dense reward table r(s,a). Entries must be finite.
class RewardTable {
 public:
  RewardTable() = default;
  explicit RewardTable(Matrix values);

  const Matrix& values() const { return values_; }
  Eigen::Index states() const { return values_.rows(); }
  Eigen::Index actions() const { return values_.cols(); }
  double operator()(Eigen::Index s, Eigen::Index a) const {
    return values_(s, a);
  }
  bool empty() const { return values_.size() == 0; }

 private:
  Matrix values_;
};

/// Finite KL-regularized preference bandit: prompt distribution rho,
/// reference policy, KL weight beta, reward cap and the true reward.
class BanditInstance {
 public:
  BanditInstance(Vector rho, PolicyTable pi_ref, double beta, double r_max,
                 RewardTable r_star);

  Eigen::Index num_states() const { return rho_.size(); }
  Eigen::Index num_actions() const { return pi_ref_.actions(); }
  const Vector& rho() const { return rho_; }
  const PolicyTable& pi_ref() const { return pi_ref_; }
  double beta() const { return beta_; }
  double r_max() const { return r_max_; }
  const RewardTable& r_star() const { return r_star_; }

  /// Cached log pi_ref, the workhorse of closed-form tilts and KL sums.
  const Matrix& log_pi_ref() const { return log_pi_ref_; }
  /// Cached optimal policy for r_star and its value.
  const PolicyTable& optimal_policy() const { return pi_star_; }
  double optimal_value() const { return j_star_; }

 private:
  Vector rho_;
  PolicyTable pi_ref_;
  double beta_ = 1.0;
  double r_max_ = 1.0;
  RewardTable r_star_;
  Matrix log_pi_ref_;
  PolicyTable pi_star_;
  double j_star_ = 0.0;
};

/// Finite policy class; each member carries a stable integer id that
/// survives filtering.
struct PolicyClass {
  std::vector<PolicyTable> members;
  std::vector<int> ids;

  std::size_t size() const { return members.size(); }
  bool empty() const { return members.empty(); }
  void add(PolicyTable pi, int id) {
    members.push_back(std::move(pi));
    ids.push_back(id);
  }
};

enum class PolicyOrigin { Reference, Online, Source, Distilled };

/// Tag naming the policy that produced an action: the source index, a class
/// member played by the online oracle, the distilled policy, or pi_ref.
struct PolicyRef {
  PolicyOrigin origin = PolicyOrigin::Reference;
  int id = -1;

  bool operator==(const PolicyRef& o) const {
    return origin == o.origin && id == o.id;
  }
};

std::string to_string(const PolicyRef& ref);

struct PreferenceSample {
  int s = 0;
  int a = 0;
  int a_tilde = 0;
  int y = 0;
  PolicyRef producer;    // generated a
  PolicyRef comparator;  // generated a_tilde
};

/// Ordered preference data; order reflects generation time.
struct PreferenceDataset {
  std::vector<PreferenceSample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  void add(const PreferenceSample& s) { samples.push_back(s); }
};

}  // namespace tpolab
