#pragma once

// Scenario files (JSON) and the artifacts written from them: trajectory CSVs,
// point-cloud CSVs, run summaries and property reports.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "hybrid_avoid/controller.hpp"
#include "hybrid_avoid/errors.hpp"
#include "hybrid_avoid/hybrid_sim.hpp"
#include "hybrid_avoid/params.hpp"
#include "hybrid_avoid/verify.hpp"

namespace hybrid_avoid {

using json = nlohmann::json;

struct PointCloudRequest {
  std::vector<std::string> sets;
  std::size_t samples_per_set = 1000;
};

struct OutputPaths {
  std::string trajectory_dir = "out/trajectories";
  std::string summary_path = "out/summary.json";
  std::optional<PointCloudRequest> pointcloud;
};

struct ScenarioConfig {
  RawParams raw;
  SimConfig sim;
  std::vector<InitialCondition> runs;
  OutputPaths outputs;
};

namespace detail {

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorCode::BadConfig, where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw Error(ErrorCode::BadConfig, "unknown key '" + key + "' in " + where);
  }
}

inline const json& require_key(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw Error(ErrorCode::BadConfig, "missing key '" + key + "' in " + where);
  return obj.at(key);
}

inline double read_number(const json& v, const std::string& what) {
  if (!v.is_number()) throw Error(ErrorCode::BadConfig, what + " must be a number");
  return v.get<double>();
}

inline VecN read_vec(const json& v, const std::string& what) {
  if (!v.is_array() || v.empty()) throw Error(ErrorCode::BadConfig, what + " must be a nonempty array");
  VecN out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = read_number(v[i], what);
  return out;
}

inline std::string read_string(const json& v, const std::string& what) {
  if (!v.is_string()) throw Error(ErrorCode::BadConfig, what + " must be a string");
  return v.get<std::string>();
}

}  // namespace detail

inline const std::vector<std::string>& known_set_names() {
  static const std::vector<std::string> names{"F0", "J0", "F1", "Fm1", "J1", "Jm1", "obstacle"};
  return names;
}

inline ScenarioConfig parse_scenario(const json& doc) {
  using namespace detail;
  reject_unknown_keys(doc, {"obstacle", "params", "sim", "runs", "outputs"}, "config");
  ScenarioConfig cfg;

  const json& obs = require_key(doc, "obstacle", "config");
  reject_unknown_keys(obs, {"c", "epsilon"}, "obstacle");
  cfg.raw.obstacle.c = read_vec(require_key(obs, "c", "obstacle"), "obstacle.c");
  cfg.raw.obstacle.epsilon = read_number(require_key(obs, "epsilon", "obstacle"), "obstacle.epsilon");
  const auto n = cfg.raw.obstacle.c.size();

  const json& prm = require_key(doc, "params", "config");
  reject_unknown_keys(prm, {"eps_s", "eps_h", "mu", "theta", "psi", "psi_bar", "gains", "w_hint"}, "params");
  cfg.raw.eps_s = read_number(require_key(prm, "eps_s", "params"), "params.eps_s");
  cfg.raw.eps_h = read_number(require_key(prm, "eps_h", "params"), "params.eps_h");
  cfg.raw.mu = read_number(require_key(prm, "mu", "params"), "params.mu");
  cfg.raw.theta = read_number(require_key(prm, "theta", "params"), "params.theta");
  cfg.raw.psi = read_number(require_key(prm, "psi", "params"), "params.psi");
  cfg.raw.psi_bar = read_number(require_key(prm, "psi_bar", "params"), "params.psi_bar");
  if (prm.contains("gains")) {
    const VecN g = read_vec(prm.at("gains"), "params.gains");
    if (g.size() != 3) throw Error(ErrorCode::BadConfig, "params.gains needs [k_-1, k_0, k_1]");
    cfg.raw.gains = {g[0], g[1], g[2]};
  }
  if (prm.contains("w_hint")) {
    cfg.raw.w_hint = read_vec(prm.at("w_hint"), "params.w_hint");
    if (cfg.raw.w_hint->size() != n) throw Error(ErrorCode::BadConfig, "params.w_hint dimension differs from c");
  }

  if (doc.contains("sim")) {
    const json& sim = doc.at("sim");
    reject_unknown_keys(sim, {"h", "t_max", "goal_tol", "event_tol", "max_jumps_hard"}, "sim");
    if (sim.contains("h")) cfg.sim.h = read_number(sim.at("h"), "sim.h");
    if (sim.contains("t_max")) cfg.sim.t_max = read_number(sim.at("t_max"), "sim.t_max");
    if (sim.contains("goal_tol")) cfg.sim.goal_tol = read_number(sim.at("goal_tol"), "sim.goal_tol");
    if (sim.contains("event_tol")) cfg.sim.event_tol = read_number(sim.at("event_tol"), "sim.event_tol");
    if (sim.contains("max_jumps_hard")) {
      if (!sim.at("max_jumps_hard").is_number_integer()) throw Error(ErrorCode::BadConfig, "sim.max_jumps_hard");
      cfg.sim.max_jumps_hard = sim.at("max_jumps_hard").get<int>();
    }
    cfg.sim.check();
  }

  if (doc.contains("runs")) {
    const json& runs = doc.at("runs");
    if (!runs.is_array()) throw Error(ErrorCode::BadConfig, "runs must be an array");
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const std::string where = "runs[" + std::to_string(i) + "]";
      reject_unknown_keys(runs[i], {"x0", "m0"}, where);
      InitialCondition ic;
      ic.x0 = read_vec(require_key(runs[i], "x0", where), where + ".x0");
      if (ic.x0.size() != n) throw Error(ErrorCode::BadConfig, where + ".x0 dimension differs from c");
      if (runs[i].contains("m0")) {
        const json& m0 = runs[i].at("m0");
        if (!m0.is_number_integer()) throw Error(ErrorCode::BadConfig, where + ".m0 must be -1, 0 or 1");
        try {
          ic.m0 = mode_from_int(m0.get<int>());
        } catch (const Error&) {
          throw Error(ErrorCode::BadConfig, where + ".m0 must be -1, 0 or 1");
        }
      }
      cfg.runs.push_back(std::move(ic));
    }
  }

  if (doc.contains("outputs")) {
    const json& out = doc.at("outputs");
    reject_unknown_keys(out, {"trajectory_dir", "summary_path", "pointcloud"}, "outputs");
    if (out.contains("trajectory_dir")) {
      cfg.outputs.trajectory_dir = read_string(out.at("trajectory_dir"), "outputs.trajectory_dir");
    }
    if (out.contains("summary_path")) {
      cfg.outputs.summary_path = read_string(out.at("summary_path"), "outputs.summary_path");
    }
    if (out.contains("pointcloud")) {
      const json& pc = out.at("pointcloud");
      reject_unknown_keys(pc, {"sets", "samples_per_set"}, "outputs.pointcloud");
      PointCloudRequest req;
      if (pc.contains("sets")) {
        if (!pc.at("sets").is_array()) throw Error(ErrorCode::BadConfig, "outputs.pointcloud.sets must be an array");
        for (const auto& s : pc.at("sets")) {
          const std::string name = read_string(s, "outputs.pointcloud.sets[]");
          const auto& known = known_set_names();
          if (std::find(known.begin(), known.end(), name) == known.end()) {
            throw Error(ErrorCode::BadConfig, "unknown set '" + name + "'");
          }
          req.sets.push_back(name);
        }
      }
      if (pc.contains("samples_per_set")) {
        const json& k = pc.at("samples_per_set");
        if (!k.is_number_unsigned()) throw Error(ErrorCode::BadConfig, "outputs.pointcloud.samples_per_set");
        req.samples_per_set = k.get<std::size_t>();
      }
      cfg.outputs.pointcloud = std::move(req);
    }
  }
  return cfg;
}

inline ScenarioConfig parse_scenario_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadConfig, std::string("malformed JSON: ") + e.what());
  }
  return parse_scenario(doc);
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::BadConfig, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str());
}

// ---------------------------------------------------------------------------
// Number formatting: shortest decimal that round-trips to the same double.

inline std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline json to_json(const VecN& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline std::string trajectory_csv_header(Eigen::Index n) {
  std::string h = "t,j,m";
  for (Eigen::Index i = 1; i <= n; ++i) h += ",x_" + std::to_string(i);
  h += ",dist_c,V";
  for (Eigen::Index i = 1; i <= n; ++i) h += ",u_" + std::to_string(i);
  return h;
}

// One row per stored sample; a jump point appears once in each adjacent arc.
inline void write_trajectory_csv(std::ostream& os, const HybridTrajectory& traj, const ValidatedParams& P) {
  os << trajectory_csv_header(P.dim()) << '\n';
  for (const auto& arc : traj.arcs) {
    for (const auto& s : arc.samples) {
      os << fmt(s.t) << ',' << arc.j << ',' << to_int(arc.mode);
      for (Eigen::Index i = 0; i < s.x.size(); ++i) os << ',' << fmt(s.x[i]);
      os << ',' << fmt((s.x - P.c()).norm()) << ',' << fmt(lyapunov(s.x, arc.mode, P));
      const VecN u = kappa(s.x, arc.mode, P);
      for (Eigen::Index i = 0; i < u.size(); ++i) os << ',' << fmt(u[i]);
      os << '\n';
    }
  }
}

inline json params_to_json(const ValidatedParams& P) {
  json j;
  j["certified"] = P.certified();
  j["c"] = to_json(P.c());
  j["epsilon"] = P.eps();
  j["eps_s"] = P.eps_s();
  j["eps_h"] = P.eps_h();
  j["mu"] = P.mu();
  j["theta"] = P.theta();
  j["psi"] = P.psi();
  j["psi_bar"] = P.psi_bar();
  j["gains"] = {P.gain(Mode::Minus), P.gain(Mode::Stabilize), P.gain(Mode::Plus)};
  j["w_hint"] = to_json(P.w_hint());
  j["mu_min"] = P.mu_min();
  j["theta_max"] = P.theta_max();
  j["psi_max"] = P.psi_max();
  j["p1"] = to_json(P.p1());
  j["p_minus1"] = to_json(P.p_minus1());
  return j;
}

inline json sim_config_to_json(const SimConfig& s) {
  return {{"h", s.h},
          {"t_max", s.t_max},
          {"goal_tol", s.goal_tol},
          {"event_tol", s.event_tol},
          {"max_jumps_hard", s.max_jumps_hard}};
}

inline json run_summary(const InitialCondition& ic, const RunOutcome& out, const ValidatedParams& P) {
  json j;
  j["x0"] = to_json(ic.x0);
  j["m0"] = to_int(ic.m0);
  if (!out.ok()) {
    j["status"] = "error";
    j["error"] = std::string(to_string(out.error->code()));
    j["message"] = out.error->what();
    return j;
  }
  const auto& t = *out.trajectory;
  j["status"] = "ok";
  j["jumps"] = t.jumps();
  j["min_dist"] = t.min_dist(P.c());
  j["t_converge"] = t.reached_goal() ? json(t.t_end()) : json(nullptr);
  j["ambiguity_count"] = t.ambiguity_count();
  j["terminal_reason"] = std::string(to_string(t.terminal));
  json modes = json::array();
  for (const auto& a : t.arcs) modes.push_back(to_int(a.mode));
  j["mode_sequence"] = modes;
  return j;
}

inline json report_to_json(const PropertyReport& r) {
  json j;
  j["name"] = r.name;
  j["seed"] = r.seed;
  j["dim"] = r.dim;
  j["samples_tested"] = r.samples_tested;
  j["failure_count"] = r.failure_count;
  j["worst_margin"] = std::isfinite(r.worst_margin) ? json(r.worst_margin) : json(nullptr);
  j["pass"] = r.pass();
  j["notes"] = r.notes;
  json w = json::array();
  for (const auto& f : r.failures) w.push_back({{"label", f.label}, {"x", to_json(f.x)}, {"margin", f.margin}});
  j["witnesses"] = w;
  return j;
}

// ---------------------------------------------------------------------------
// Point clouds of the named sets

inline double set_margin(const std::string& name, const VecN& x, const ValidatedParams& P) {
  if (name == "F0") return flow_margin(x, Mode::Stabilize, P);
  if (name == "J0") return jump_margin(x, Mode::Stabilize, P);
  if (name == "F1") return flow_margin(x, Mode::Plus, P);
  if (name == "Fm1") return flow_margin(x, Mode::Minus, P);
  if (name == "J1") return jump_margin(x, Mode::Plus, P);
  if (name == "Jm1") return jump_margin(x, Mode::Minus, P);
  if (name == "obstacle") return (x - P.c()).norm() - P.eps();
  throw Error(ErrorCode::BadConfig, "unknown set '" + name + "'");
}

struct PointCloud {
  std::string set;
  std::vector<VecN> points;
  std::size_t attempts = 0;

  double acceptance_rate() const { return attempts ? static_cast<double>(points.size()) / attempts : 0.0; }
};

inline constexpr double kMinAcceptanceRate = 1e-5;

// Rejection sampling over the cube of half-width 2 (eps_h + |c|) about c.
// Stops at `samples` points, or once the acceptance rate is evidently below
// kMinAcceptanceRate, or at a hard attempt cap.
inline PointCloud sample_set(const std::string& name, const ValidatedParams& P, std::size_t samples,
                             std::uint64_t seed) {
  set_margin(name, P.c() + VecN::Constant(P.dim(), 1.0), P);  // rejects unknown names up front
  PointCloud pc{name, {}, 0};
  Rng rng(seed);
  const double half = 2.0 * (P.eps_h() + P.c().norm());
  constexpr std::size_t kRateCheck = 1'000'000;
  constexpr std::size_t kCap = 200'000'000;
  std::uniform_real_distribution<double> u(-half, half);
  while (pc.points.size() < samples && pc.attempts < kCap) {
    if (pc.attempts >= kRateCheck && pc.acceptance_rate() < kMinAcceptanceRate) break;
    VecN x(P.dim());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = P.c()[i] + u(rng);
    ++pc.attempts;
    if (set_margin(name, x, P) <= 0.0) pc.points.push_back(std::move(x));
  }
  return pc;
}

inline void write_pointcloud_csv(std::ostream& os, const std::vector<PointCloud>& clouds, Eigen::Index n) {
  for (Eigen::Index i = 1; i <= n; ++i) os << "x_" << i << ',';
  os << "set_label\n";
  for (const auto& pc : clouds) {
    for (const auto& x : pc.points) {
      for (Eigen::Index i = 0; i < x.size(); ++i) os << fmt(x[i]) << ',';
      os << pc.set << '\n';
    }
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::BadConfig, "cannot write " + path.string());
  out << text;
}

}  // namespace hybrid_avoid
