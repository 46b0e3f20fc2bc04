#include "tpolab/serialize.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace tpolab {

using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index s = 0; s < m.rows(); ++s) {
    json row = json::array();
    for (Eigen::Index a = 0; a < m.cols(); ++a) row.push_back(m(s, a));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) {
    throw ValidationError("expected a non-empty matrix");
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Eigen::Index s = 0; s < rows; ++s) {
    const json& row = j.at(static_cast<std::size_t>(s));
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw ValidationError("ragged matrix rows");
    }
    for (Eigen::Index a = 0; a < cols; ++a) {
      m(s, a) = row.at(static_cast<std::size_t>(a)).get<double>();
    }
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  }
  return v;
}

}  // namespace

std::string dtos(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return json(v).dump();  // shortest round-trip decimal
}

std::string instance_to_json(const GeneratedEnv& env) {
  json j;
  j["num_states"] = env.inst.num_states();
  j["num_actions"] = env.inst.num_actions();
  j["rho"] = vector_to_json(env.inst.rho());
  j["beta"] = env.inst.beta();
  j["r_max"] = env.inst.r_max();
  j["pi_ref"] = matrix_to_json(env.inst.pi_ref().probs());
  j["r_star"] = matrix_to_json(env.inst.r_star().values());
  json sources = json::array();
  for (const RewardTable& r : env.sources) {
    sources.push_back(matrix_to_json(r.values()));
  }
  j["sources"] = std::move(sources);
  json cls = json::array();
  for (const PolicyTable& pi : env.cls.members) {
    cls.push_back(matrix_to_json(pi.probs()));
  }
  j["policy_class"] = std::move(cls);
  return j.dump(2) + "\n";
}

GeneratedEnv instance_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad instance JSON: ") + e.what());
  }
  try {
    Vector rho = vector_from_json(j.at("rho"));
    PolicyTable pi_ref{matrix_from_json(j.at("pi_ref"))};
    RewardTable r_star{matrix_from_json(j.at("r_star"))};
    BanditInstance inst(std::move(rho), std::move(pi_ref),
                        j.at("beta").get<double>(),
                        j.at("r_max").get<double>(), std::move(r_star));
    std::vector<RewardTable> sources;
    for (const json& src : j.value("sources", json::array())) {
      sources.emplace_back(matrix_from_json(src));
    }
    PolicyClass cls;
    int id = 0;
    for (const json& member : j.value("policy_class", json::array())) {
      cls.add(PolicyTable(matrix_from_json(member)), id++);
    }
    return GeneratedEnv{std::move(inst), std::move(sources), std::move(cls)};
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad instance JSON: ") + e.what());
  }
}

std::string rpo_solution_to_json(const RpoSolution& sol) {
  json j;
  j["pi_dstl"] = matrix_to_json(sol.pi_dstl.probs());
  j["mixture_weights"] = vector_to_json(sol.mixture_weights);
  j["r_dstl"] = matrix_to_json(sol.r_dstl.values());
  j["mode"] = sol.mode == RpoMode::Enumerate ? "enumerate" : "mixture";
  j["converged"] = sol.converged;
  return j.dump(2) + "\n";
}

std::string policy_to_json(const PolicyTable& pi) {
  json j;
  j["policy"] = matrix_to_json(pi.probs());
  return j.dump(2) + "\n";
}

std::string trace_to_csv(const RunResult& run) {
  std::ostringstream out;
  out << "step,block,inner,policy_kind,policy_id,inst_regret,cum_regret\n";
  for (const RegretRow& row : run.trace) {
    const char* kind = "ref";
    switch (row.played.origin) {
      case PolicyOrigin::Reference: kind = "ref"; break;
      case PolicyOrigin::Online: kind = "online"; break;
      case PolicyOrigin::Source: kind = "source"; break;
      case PolicyOrigin::Distilled: kind = "distilled"; break;
    }
    out << row.step << ',' << row.block << ',' << row.inner << ',' << kind
        << ',' << row.played.id << ',' << dtos(row.inst_regret) << ','
        << dtos(row.cum_regret) << '\n';
  }
  return out.str();
}

std::string arm_log_to_csv(const RunResult& run) {
  std::ostringstream out;
  out << "block,inner,arm_tag,ucb_score,y\n";
  for (const ArmPull& pull : run.arm_log) {
    out << pull.block << ',' << pull.inner << ',' << pull.arm_tag << ','
        << dtos(pull.ucb_score) << ',' << pull.y << '\n';
  }
  return out.str();
}

std::string bounds_to_csv(const std::vector<BoundReport>& reports) {
  std::ostringstream out;
  out << "bound_name,lhs,rhs,slack,satisfied\n";
  for (const BoundReport& rep : reports) {
    out << rep.bound_name << ',' << dtos(rep.lhs) << ',' << dtos(rep.rhs)
        << ',' << dtos(rep.slack) << ',' << (rep.satisfied ? 1 : 0) << '\n';
  }
  return out.str();
}

namespace {

OracleKind oracle_from_string(const std::string& s) {
  if (s == "xpo-like") return OracleKind::XpoLike;
  if (s == "optimistic-mle") return OracleKind::OptimisticMle;
  throw ValidationError("unknown oracle kind: " + s);
}

RpoMode rpo_mode_from_string(const std::string& s) {
  if (s == "enumerate") return RpoMode::Enumerate;
  if (s == "mixture") return RpoMode::Mixture;
  throw ValidationError("unknown rpo mode: " + s);
}

PoKind po_kind_from_string(const std::string& s) {
  if (s == "dpo") return PoKind::Dpo;
  if (s == "ipo") return PoKind::Ipo;
  if (s == "xpo") return PoKind::Xpo;
  throw ValidationError("unknown optimizer kind: " + s);
}

const char* oracle_to_string(OracleKind k) {
  return k == OracleKind::XpoLike ? "xpo-like" : "optimistic-mle";
}
const char* rpo_mode_to_string(RpoMode m) {
  return m == RpoMode::Enumerate ? "enumerate" : "mixture";
}
const char* po_kind_to_string(PoKind k) {
  switch (k) {
    case PoKind::Dpo: return "dpo";
    case PoKind::Ipo: return "ipo";
    case PoKind::Xpo: return "xpo";
  }
  return "dpo";
}

InstanceSpec instance_spec_from(const json& j) {
  InstanceSpec spec;
  spec.num_states = j.value("num_states", spec.num_states);
  spec.num_actions = j.value("num_actions", spec.num_actions);
  spec.beta = j.value("beta", spec.beta);
  spec.r_max = j.value("r_max", spec.r_max);
  spec.class_size = j.value("class_size", spec.class_size);
  if (j.contains("deltas")) {
    spec.source_deltas = j.at("deltas").get<std::vector<double>>();
  }
  return spec;
}

}  // namespace

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["instance"] = {{"num_states", cfg.instance.num_states},
                   {"num_actions", cfg.instance.num_actions},
                   {"beta", cfg.instance.beta},
                   {"r_max", cfg.instance.r_max},
                   {"class_size", cfg.instance.class_size},
                   {"deltas", cfg.instance.source_deltas}};
  j["instance_seed"] = cfg.instance_seed;
  j["roster"] = cfg.roster;
  j["T"] = cfg.T;
  j["N"] = cfg.N;
  j["trials"] = cfg.trials;
  j["master_seed"] = cfg.master_seed;
  j["out"] = cfg.out_dir;
  j["tpo"] = {{"alpha", cfg.tpo.alpha},
              {"delta", cfg.tpo.delta},
              {"c_bonus", cfg.tpo.c_bonus},
              {"oracle", oracle_to_string(cfg.tpo.oracle)},
              {"oracle_c", cfg.tpo.oracle_c},
              {"eta_mode", cfg.tpo.eta_mode == EtaMode::Appendix
                               ? "appendix"
                               : "alg2"},
              {"rpo_mode", rpo_mode_to_string(cfg.tpo.rpo_mode)},
              {"final_rpo_mode", rpo_mode_to_string(cfg.tpo.final_rpo_mode)},
              {"cache_tps_per_block", cfg.tpo.cache_tps_per_block}};
  j["empirical"] = {{"optimizer", po_kind_to_string(cfg.empirical.optimizer)},
                    {"learning_rate", cfg.empirical.learning_rate},
                    {"steps", cfg.empirical.steps},
                    {"beta_po", cfg.empirical.beta_po},
                    {"alpha_xpo", cfg.empirical.alpha_xpo},
                    {"wr_self", cfg.empirical.wr_self},
                    {"ucb_bonus", cfg.empirical.ucb_bonus},
                    {"use_bon", cfg.empirical.use_bon},
                    {"bon_n", cfg.empirical.bon_n}};
  return j.dump(2) + "\n";
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad config JSON: ") + e.what());
  }
  try {
    ExperimentConfig cfg;
    if (j.contains("instance")) {
      cfg.instance = instance_spec_from(j.at("instance"));
    }
    cfg.instance_seed = j.value("instance_seed", cfg.instance_seed);
    if (j.contains("roster")) {
      cfg.roster = j.at("roster").get<std::vector<std::string>>();
    }
    cfg.T = j.value("T", cfg.T);
    cfg.N = j.value("N", cfg.N);
    cfg.trials = j.value("trials", cfg.trials);
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    cfg.out_dir = j.value("out", cfg.out_dir);
    if (j.contains("tpo")) {
      const json& t = j.at("tpo");
      cfg.tpo.alpha = t.value("alpha", cfg.tpo.alpha);
      cfg.tpo.delta = t.value("delta", cfg.tpo.delta);
      cfg.tpo.c_bonus = t.value("c_bonus", cfg.tpo.c_bonus);
      if (t.contains("oracle")) {
        cfg.tpo.oracle = oracle_from_string(t.at("oracle").get<std::string>());
      }
      cfg.tpo.oracle_c = t.value("oracle_c", cfg.tpo.oracle_c);
      if (t.contains("eta_mode")) {
        const std::string m = t.at("eta_mode").get<std::string>();
        if (m == "appendix") {
          cfg.tpo.eta_mode = EtaMode::Appendix;
        } else if (m == "alg2") {
          cfg.tpo.eta_mode = EtaMode::Alg2;
        } else {
          throw ValidationError("unknown eta_mode: " + m);
        }
      }
      if (t.contains("rpo_mode")) {
        cfg.tpo.rpo_mode =
            rpo_mode_from_string(t.at("rpo_mode").get<std::string>());
      }
      if (t.contains("final_rpo_mode")) {
        cfg.tpo.final_rpo_mode =
            rpo_mode_from_string(t.at("final_rpo_mode").get<std::string>());
      }
      cfg.tpo.cache_tps_per_block =
          t.value("cache_tps_per_block", cfg.tpo.cache_tps_per_block);
    }
    if (j.contains("empirical")) {
      const json& e = j.at("empirical");
      if (e.contains("optimizer")) {
        cfg.empirical.optimizer =
            po_kind_from_string(e.at("optimizer").get<std::string>());
      }
      cfg.empirical.learning_rate =
          e.value("learning_rate", cfg.empirical.learning_rate);
      cfg.empirical.steps = e.value("steps", cfg.empirical.steps);
      cfg.empirical.beta_po = e.value("beta_po", cfg.empirical.beta_po);
      cfg.empirical.alpha_xpo = e.value("alpha_xpo", cfg.empirical.alpha_xpo);
      cfg.empirical.wr_self = e.value("wr_self", cfg.empirical.wr_self);
      cfg.empirical.ucb_bonus = e.value("ucb_bonus", cfg.empirical.ucb_bonus);
      cfg.empirical.use_bon = e.value("use_bon", cfg.empirical.use_bon);
      cfg.empirical.bon_n = e.value("bon_n", cfg.empirical.bon_n);
    }
    return cfg;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad config JSON: ") + e.what());
  }
}

InstanceSpec instance_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad spec JSON: ") + e.what());
  }
  try {
    if (j.contains("instance")) return instance_spec_from(j.at("instance"));
    return instance_spec_from(j);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad spec JSON: ") + e.what());
  }
}

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::filesystem::create_directories(p.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        cells.push_back(line.substr(start));
        break;
      }
      cells.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace tpolab
