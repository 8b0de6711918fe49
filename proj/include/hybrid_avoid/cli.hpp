#pragma once

// Subcommand implementations behind the hybrid_avoid executable. Each returns
// a process exit code: 0 success, 1 a property or run failed, 2 bad input.

#include <cstdint>
#include <filesystem>
#include <future>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hybrid_avoid/controller.hpp"
#include "hybrid_avoid/errors.hpp"
#include "hybrid_avoid/hybrid_sim.hpp"
#include "hybrid_avoid/params.hpp"
#include "hybrid_avoid/scenario.hpp"
#include "hybrid_avoid/verify.hpp"

namespace hybrid_avoid::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitUsage = 2;

struct Options {
  std::string config;
  std::uint64_t seed = 0;
  bool parallel = false;
  bool unchecked = false;  // skip parameter validation (misconfiguration experiments)
  std::string suite = "all";
  std::vector<int> dims{2, 3, 4, 5, 6};
  std::size_t samples = 10000;
  int seeds = 5;
  std::string report_path;
  std::vector<std::string> sets;
  std::string out_path;
};

// "2..6", "3", or "2,4,5".
inline std::vector<int> parse_dims(const std::string& spec) {
  std::vector<int> out;
  auto to_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty() || v < 2) throw Error(ErrorCode::BadConfig, "bad --dims '" + spec + "'");
    return v;
  };
  if (const auto dots = spec.find(".."); dots != std::string::npos) {
    const int lo = to_int(spec.substr(0, dots));
    const int hi = to_int(spec.substr(dots + 2));
    if (hi < lo) throw Error(ErrorCode::BadConfig, "bad --dims '" + spec + "'");
    for (int n = lo; n <= hi; ++n) out.push_back(n);
    return out;
  }
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int(item));
  if (out.empty()) throw Error(ErrorCode::BadConfig, "bad --dims '" + spec + "'");
  return out;
}

// Independent stream per (base seed, dimension, replicate).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t n, std::uint64_t k) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(k)};
  Rng rng(seq);
  return rng();
}

namespace detail {

inline std::string vec_str(const VecN& v, int precision = 9) {
  std::ostringstream os;
  os << std::setprecision(precision) << '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ']';
  return os.str();
}

inline ValidatedParams resolve_params(const RawParams& raw, bool unchecked) {
  return unchecked ? ValidatedParams::unchecked(raw) : validate(raw);
}

inline void print_report_line(std::ostream& out, const PropertyReport& r) {
  out << (r.pass() ? "PASS " : "FAIL ") << r.name << " n=" << r.dim << " seed=" << r.seed
      << " samples=" << r.samples_tested << " failures=" << r.failure_count << " worst=" << std::setprecision(6)
      << r.worst_margin;
  for (const auto& note : r.notes) out << " [" << note << ']';
  out << '\n';
}

}  // namespace detail

inline int cmd_validate(const Options& opt, std::ostream& out, std::ostream& err) {
  ScenarioConfig cfg;
  try {
    cfg = load_scenario(opt.config);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  const RawParams& raw = cfg.raw;
  out << std::setprecision(12);
  out << "dimension " << raw.obstacle.c.size() << '\n';

  try {
    const ValidatedParams P = validate(raw);
    for (const auto& k : interval_checks(raw)) {
      out << "PASS " << k.name << " = " << k.actual << " in (" << k.lo << ", " << k.hi << ")\n";
    }
    out << "mu_min = " << P.mu_min() << '\n'
        << "theta_max = " << P.theta_max() << '\n'
        << "psi_max = " << P.psi_max() << '\n'
        << "p1 = " << detail::vec_str(P.p1()) << '\n'
        << "p_minus1 = " << detail::vec_str(P.p_minus1()) << '\n'
        << "valid\n";
    return kExitOk;
  } catch (const ValidationFailure& e) {
    for (const auto& v : e.violations()) out << "FAIL " << v.describe() << '\n';
    out << "invalid\n";
    return kExitFail;
  } catch (const Error& e) {
    out << "FAIL " << e.what() << '\n' << "invalid\n";
    return kExitFail;
  }
}

inline int cmd_simulate(const Options& opt, std::ostream& out, std::ostream& err) {
  try {
    const ScenarioConfig cfg = load_scenario(opt.config);
    const ValidatedParams P = detail::resolve_params(cfg.raw, opt.unchecked);
    const auto results = batch_simulate(cfg.runs, P, cfg.sim, opt.parallel);

    const std::filesystem::path dir = cfg.outputs.trajectory_dir;
    json runs = json::array();
    bool all_ok = true;
    for (std::size_t i = 0; i < results.size(); ++i) {
      json s = run_summary(cfg.runs[i], results[i], P);
      if (results[i].ok()) {
        std::ostringstream csv;
        write_trajectory_csv(csv, *results[i].trajectory, P);
        std::ostringstream name;
        name << "run_" << std::setw(3) << std::setfill('0') << i << ".csv";
        write_text_file(dir / name.str(), csv.str());
        s["csv"] = (dir / name.str()).string();
        all_ok = all_ok && results[i].trajectory->reached_goal();
      } else {
        all_ok = false;
      }
      out << "run " << i << ": " << s["status"].get<std::string>();
      if (results[i].ok()) {
        out << " jumps=" << s["jumps"] << " min_dist=" << s["min_dist"] << " terminal=" << s["terminal_reason"];
      } else {
        out << ' ' << s["error"].get<std::string>() << ": " << s["message"].get<std::string>();
      }
      out << '\n';
      runs.push_back(std::move(s));
    }

    json summary;
    summary["seed"] = opt.seed;
    summary["params"] = params_to_json(P);
    summary["sim"] = sim_config_to_json(cfg.sim);
    summary["runs"] = runs;
    summary["all_converged"] = all_ok;

    if (cfg.outputs.pointcloud && !cfg.outputs.pointcloud->sets.empty()) {
      std::vector<PointCloud> clouds;
      bool clouds_ok = true;
      for (std::size_t k = 0; k < cfg.outputs.pointcloud->sets.size(); ++k) {
        clouds.push_back(sample_set(cfg.outputs.pointcloud->sets[k], P, cfg.outputs.pointcloud->samples_per_set,
                                    derive_seed(opt.seed, P.dim(), k)));
        clouds_ok = clouds_ok && clouds.back().acceptance_rate() >= kMinAcceptanceRate;
      }
      std::ostringstream csv;
      write_pointcloud_csv(csv, clouds, P.dim());
      const auto path = dir / "pointcloud.csv";
      write_text_file(path, csv.str());
      summary["pointcloud"] = path.string();
      if (!clouds_ok) {
        err << "warning: a point-cloud set had acceptance rate below " << kMinAcceptanceRate << '\n';
      }
    }
    write_text_file(cfg.outputs.summary_path, summary.dump(2) + "\n");
    return all_ok ? kExitOk : kExitFail;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

// Property checks on a random feasible configuration of dimension n.
inline std::vector<PropertyReport> random_config_reports(int n, std::uint64_t seed, std::size_t samples,
                                                         bool lemmas, bool boundary) {
  Rng rng(seed);
  const ValidatedParams Q = random_feasible_params(n, rng);
  std::vector<PropertyReport> reps;
  if (lemmas) {
    const VecN v1 = random_unit(n, rng);
    const double psi1 = uniform(rng, 0.05, 0.6);
    const double psi2 = uniform(rng, 0.05, 0.6);
    const double sep = uniform(rng, psi1 + psi2 + 0.05, std::numbers::pi - psi1 - psi2 - 0.05);
    const VecN v2 = std::cos(sep) * v1 + std::sin(sep) * random_unit_orthogonal(v1, rng);
    reps.push_back(check_lemma1(Q.c(), v1, v2, psi1, psi2, samples, seed));
    reps.push_back(check_lemma3(Q, samples, seed));
    reps.push_back(check_lemma4(Q, samples, seed));
    reps.push_back(check_jump_cover(Q, samples, seed));
    reps.push_back(check_operator_identities(n, samples, seed));
  }
  if (boundary) reps.push_back(check_boundary_flow(Q, samples, seed));
  return reps;
}

inline int cmd_verify(const Options& opt, std::ostream& out, std::ostream& err) {
  const bool lemmas = opt.suite == "lemmas" || opt.suite == "all";
  const bool boundary = opt.suite == "boundary" || opt.suite == "all";
  const bool trajectory = opt.suite == "trajectory" || opt.suite == "all";
  if (!lemmas && !boundary && !trajectory) {
    err << "error: unknown suite '" << opt.suite << "'\n";
    return kExitUsage;
  }
  try {
    const ScenarioConfig cfg = load_scenario(opt.config);
    const ValidatedParams P = detail::resolve_params(cfg.raw, opt.unchecked);
    std::vector<PropertyReport> reports;

    // The configured parameters first, then the random dimension sweep.
    const std::uint64_t own_seed = derive_seed(opt.seed, P.dim(), 0xC0FFEE);
    if (lemmas) {
      reports.push_back(check_lemma3(P, opt.samples, own_seed));
      reports.push_back(check_lemma4(P, opt.samples, own_seed));
      reports.push_back(check_jump_cover(P, opt.samples, own_seed));
    }
    if (boundary) reports.push_back(check_boundary_flow(P, opt.samples, own_seed));

    if (lemmas || boundary) {
      std::vector<std::pair<int, std::uint64_t>> grid;
      for (int n : opt.dims)
        for (int k = 0; k < opt.seeds; ++k) grid.emplace_back(n, derive_seed(opt.seed, n, k));
      auto job = [&](const std::pair<int, std::uint64_t>& g) {
        return random_config_reports(g.first, g.second, opt.samples, lemmas, boundary);
      };
      std::vector<std::vector<PropertyReport>> parts(grid.size());
      if (opt.parallel) {
        std::vector<std::future<std::vector<PropertyReport>>> pending;
        for (const auto& g : grid) pending.push_back(std::async(std::launch::async, job, g));
        for (std::size_t i = 0; i < grid.size(); ++i) parts[i] = pending[i].get();
      } else {
        for (std::size_t i = 0; i < grid.size(); ++i) parts[i] = job(grid[i]);
      }
      for (auto& p : parts)
        for (auto& r : p) reports.push_back(std::move(r));
    }

    if (trajectory) {
      const auto results = batch_simulate(cfg.runs, P, cfg.sim, opt.parallel);
      AuditOptions audit;
      audit.h = cfg.sim.h;
      for (std::size_t i = 0; i < results.size(); ++i) {
        if (!results[i].ok()) {
          auto r = make_report("trajectory_run_" + std::to_string(i), 0, P.dim());
          r.add(std::string(to_string(results[i].error->code())), cfg.runs[i].x0, -1.0);
          r.notes.push_back(results[i].error->what());
          reports.push_back(std::move(r));
          continue;
        }
        auto a = audit_trajectory(*results[i].trajectory, P, audit);
        a.name += "_run_" + std::to_string(i);
        reports.push_back(std::move(a));
        auto l = check_lyapunov_rate(*results[i].trajectory, P);
        l.name += "_run_" + std::to_string(i);
        reports.push_back(std::move(l));
      }
    }

    bool all_pass = true;
    json arr = json::array();
    for (const auto& r : reports) {
      detail::print_report_line(out, r);
      all_pass = all_pass && r.pass();
      arr.push_back(report_to_json(r));
    }
    out << (all_pass ? "all checks passed" : "some checks FAILED") << '\n';

    json doc;
    doc["suite"] = opt.suite;
    doc["seed"] = opt.seed;
    doc["samples"] = opt.samples;
    doc["dims"] = opt.dims;
    doc["params"] = params_to_json(P);
    doc["reports"] = arr;
    doc["pass"] = all_pass;
    const std::string path = opt.report_path.empty()
                                 ? (std::filesystem::path(cfg.outputs.summary_path).parent_path() / "verify_report.json")
                                       .string()
                                 : opt.report_path;
    write_text_file(path, doc.dump(2) + "\n");
    return all_pass ? kExitOk : kExitFail;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

inline int cmd_sample_sets(const Options& opt, std::ostream& out, std::ostream& err) {
  try {
    const ScenarioConfig cfg = load_scenario(opt.config);
    const ValidatedParams P = detail::resolve_params(cfg.raw, opt.unchecked);
    if (opt.sets.empty()) throw Error(ErrorCode::BadConfig, "no --set given");
    std::vector<PointCloud> clouds;
    bool ok = true;
    for (std::size_t k = 0; k < opt.sets.size(); ++k) {
      clouds.push_back(sample_set(opt.sets[k], P, opt.samples, derive_seed(opt.seed, P.dim(), k)));
      const auto& pc = clouds.back();
      const bool rate_ok = pc.acceptance_rate() >= kMinAcceptanceRate;
      ok = ok && rate_ok;
      out << (rate_ok ? "ok " : "FAIL ") << pc.set << ": " << pc.points.size() << " points from " << pc.attempts
          << " attempts (rate " << std::setprecision(4) << pc.acceptance_rate() << ")\n";
    }
    std::ostringstream csv;
    write_pointcloud_csv(csv, clouds, P.dim());
    const std::string path = opt.out_path.empty()
                                 ? (std::filesystem::path(cfg.outputs.trajectory_dir) / "pointcloud.csv").string()
                                 : opt.out_path;
    write_text_file(path, csv.str());
    return ok ? kExitOk : kExitFail;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace hybrid_avoid::cli
