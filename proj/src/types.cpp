#include "tpolab/types.hpp"

#include <cmath>
#include <sstream>

#include "tpolab/core.hpp"

namespace tpolab {

namespace {
constexpr double kRowSumTol = 1e-12;
}

PolicyTable::PolicyTable(Matrix probs) : probs_(std::move(probs)) {
  if (probs_.rows() < 1 || probs_.cols() < 1) {
    throw ValidationError("policy table must be non-empty");
  }
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    double sum = 0.0;
    for (Eigen::Index a = 0; a < probs_.cols(); ++a) {
      const double p = probs_(s, a);
      if (!std::isfinite(p) || p <= 0.0) {
        throw ValidationError("policy entries must be strictly positive");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTol) {
      std::ostringstream oss;
      oss << "policy row " << s << " sums to " << sum << ", expected 1";
      throw ValidationError(oss.str());
    }
    probs_.row(s) /= sum;
  }
}

PolicyTable PolicyTable::uniform(Eigen::Index states, Eigen::Index actions) {
  return PolicyTable(
      Matrix::Constant(states, actions, 1.0 / static_cast<double>(actions)));
}

RewardTable::RewardTable(Matrix values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw ValidationError("reward table must be non-empty");
  }
  if (!values_.allFinite()) {
    throw ValidationError("reward entries must be finite");
  }
}

BanditInstance::BanditInstance(Vector rho, PolicyTable pi_ref, double beta,
                               double r_max, RewardTable r_star)
    : rho_(std::move(rho)),
      pi_ref_(std::move(pi_ref)),
      beta_(beta),
      r_max_(r_max),
      r_star_(std::move(r_star)) {
  if (beta_ <= 0.0) throw ValidationError("beta must be positive");
  if (r_max_ <= 0.0) throw ValidationError("r_max must be positive");
  if (rho_.size() != pi_ref_.states()) {
    throw ValidationError("rho length must match pi_ref rows");
  }
  double sum = 0.0;
  for (Eigen::Index s = 0; s < rho_.size(); ++s) {
    if (!(rho_(s) >= 0.0)) throw ValidationError("rho entries must be >= 0");
    sum += rho_(s);
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw ValidationError("rho must sum to 1 within 1e-12");
  }
  rho_ /= sum;
  if (r_star_.states() != pi_ref_.states() ||
      r_star_.actions() != pi_ref_.actions()) {
    throw ValidationError("r_star dimensions must match pi_ref");
  }
  if ((r_star_.values().array() < -1e-15).any() ||
      (r_star_.values().array() > r_max_ + 1e-15).any()) {
    throw ValidationError("r_star entries must lie in [0, r_max]");
  }
  log_pi_ref_ = pi_ref_.probs().array().log().matrix();
  pi_star_ = closed_form_policy(r_star_, *this);
  j_star_ = policy_value(pi_star_, r_star_, *this);
}

std::string to_string(const PolicyRef& ref) {
  switch (ref.origin) {
    case PolicyOrigin::Reference:
      return "ref";
    case PolicyOrigin::Online:
      return ref.id >= 0 ? "online:" + std::to_string(ref.id) : "online";
    case PolicyOrigin::Source:
      return "source:" + std::to_string(ref.id);
    case PolicyOrigin::Distilled:
      return "distilled";
  }
  return "unknown";
}

}  // namespace tpolab
