#pragma once

#include <string>
#include <vector>

#include "tpolab/bounds.hpp"
#include "tpolab/estimation.hpp"
#include "tpolab/harness.hpp"
#include "tpolab/tpo.hpp"
#include "tpolab/types.hpp"

namespace tpolab {

/// Shortest-round-trip decimal text for a double (CSV cells).
std::string dtos(double v);

std::string instance_to_json(const GeneratedEnv& env);
GeneratedEnv instance_from_json(const std::string& text);

std::string rpo_solution_to_json(const RpoSolution& sol);
std::string policy_to_json(const PolicyTable& pi);

/// Regret trace CSV: step,block,inner,policy_kind,policy_id,inst_regret,cum_regret
std::string trace_to_csv(const RunResult& run);
/// Empirical selection CSV: block,inner,arm_tag,ucb_score,y
std::string arm_log_to_csv(const RunResult& run);
/// Bound table CSV: bound_name,lhs,rhs,slack,satisfied
std::string bounds_to_csv(const std::vector<BoundReport>& reports);

std::string experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const std::string& text);
InstanceSpec instance_spec_from_json(const std::string& text);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// Minimal CSV reader for our own artifacts (no quoting/escapes needed).
std::vector<std::vector<std::string>> read_csv(const std::string& text);

}  // namespace tpolab
