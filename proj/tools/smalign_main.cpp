// Command-line front end: solve (points + bearings -> pose), synth
// (generate a synthetic scene to files), bench (Monte-Carlo trial sweep),
// qpn-validate (spherical-approximation fidelity table).
//
// Exit codes: 0 success, 1 usage or parse error, 2 infeasible pose domain,
// 3 budget or time limit reached with a usable incumbent.

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "smalign/errors.hpp"
#include "smalign/io.hpp"
#include "smalign/objective.hpp"
#include "smalign/sphere_stats.hpp"

namespace {

using nlohmann::ordered_json;
using namespace smalign;

constexpr double kDegree = M_PI / 180.0;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << body;
  out.flush();
  if (!out) throw std::runtime_error("failed writing output file: " + path);
}

// ---------------------------------------------------------------------------
// solve

struct SolveFlags {
  std::string config_path;
  std::string trace_csv_path;
  RunConfig flags;  // values set on the command line
  std::vector<double> translation_box_flat;
  std::vector<double> rotation_center_flat;
  std::vector<std::string> class_weight_pairs;
};

int run_solve(const CLI::App& cmd, SolveFlags& sf) {
  RunConfig cfg;
  if (!sf.config_path.empty()) cfg = parse_config(sf.config_path);

  // Command-line values win over the config file.
  const auto set = [&](const char* flag) { return cmd.count(flag) > 0; };
  if (set("--points")) cfg.points_path = sf.flags.points_path;
  if (set("--bearings")) cfg.bearings_path = sf.flags.bearings_path;
  if (set("--output")) cfg.output_path = sf.flags.output_path;
  if (set("--focal")) cfg.focal = sf.flags.focal;
  if (set("--principal-x")) cfg.principal.x() = sf.flags.principal.x();
  if (set("--principal-y")) cfg.principal.y() = sf.flags.principal.y();
  if (set("--lambda-p")) cfg.lambda_p = sf.flags.lambda_p;
  if (set("--lambda-f")) cfg.lambda_f = sf.flags.lambda_f * kDegree;
  if (set("--epsilon")) cfg.epsilon = sf.flags.epsilon;
  if (set("--zeta")) cfg.zeta = sf.flags.zeta;
  if (set("--torus-major")) cfg.torus_major = sf.flags.torus_major;
  if (set("--torus-minor")) cfg.torus_minor = sf.flags.torus_minor;
  if (set("--rotation-half-width")) {
    cfg.rotation.half_width = sf.flags.rotation.half_width * kDegree;
  }
  if (set("--max-evaluations")) cfg.max_evaluations = sf.flags.max_evaluations;
  if (set("--time-limit")) cfg.time_limit_seconds = sf.flags.time_limit_seconds;
  if (set("--batch-size")) cfg.batch_size = sf.flags.batch_size;
  if (set("--queue-capacity")) cfg.queue_capacity = sf.flags.queue_capacity;
  if (set("--threads")) cfg.threads = sf.flags.threads;
  if (set("--seed")) cfg.seed = sf.flags.seed;
  if (set("--rotation-center")) {
    for (int i = 0; i < 3; ++i) cfg.rotation.center[i] = sf.rotation_center_flat[i];
  }
  if (set("--translation-box")) {
    if (sf.translation_box_flat.size() % 6 != 0) {
      throw ParseError("--translation-box: expected groups of 6 numbers");
    }
    for (std::size_t i = 0; i < sf.translation_box_flat.size(); i += 6) {
      TranslationCuboid box;
      for (int k = 0; k < 3; ++k) box.center[k] = sf.translation_box_flat[i + k];
      for (int k = 0; k < 3; ++k) {
        box.half_widths[k] = sf.translation_box_flat[i + 3 + k];
        if (box.half_widths[k] < 0.0) {
          throw ParseError("--translation-box: half-widths must be >= 0");
        }
      }
      cfg.translation_boxes.push_back(box);
    }
  }
  if (set("--class-weight")) {
    if (sf.class_weight_pairs.size() % 2 != 0) {
      throw ParseError("--class-weight: expected 'label weight' pairs");
    }
    for (std::size_t i = 0; i < sf.class_weight_pairs.size(); i += 2) {
      const double w = std::stod(sf.class_weight_pairs[i + 1]);
      if (!(w > 0.0)) throw ParseError("--class-weight: weight must be > 0");
      cfg.class_weights[sf.class_weight_pairs[i]] = w;
    }
  }

  for (const auto& [key, value] :
       {std::pair<const char*, double>{"lambda_p", cfg.lambda_p},
        {"lambda_f", cfg.lambda_f},
        {"epsilon", cfg.epsilon},
        {"zeta", cfg.zeta}}) {
    if (!(value > 0.0)) {
      throw ParseError(std::string("'") + key + "' must be > 0");
    }
  }
  if (cfg.points_path.empty() || cfg.bearings_path.empty()) {
    throw ParseError("solve needs both --points and --bearings (or a config "
                     "file setting them)");
  }

  const LabeledPointSet points = load_points(cfg.points_path);
  std::optional<CameraIntrinsics> intrinsics;
  if (cfg.focal) {
    intrinsics = CameraIntrinsics{};
    intrinsics->focal = *cfg.focal;
    intrinsics->principal = cfg.principal;
  }
  const LabeledBearingSet bearings = load_bearings(cfg.bearings_path, intrinsics);

  const SemanticMixturePair pair = build_semantic_mixtures(
      points, bearings, cfg.lambda_p, cfg.lambda_f,
      cfg.class_weights.empty()
          ? std::nullopt
          : std::optional<std::map<std::string, double>>(cfg.class_weights));
  for (const std::string& w : pair.warnings) {
    std::cerr << "warning: " << w << '\n';
  }

  const ObjectiveContext ctx(pair, cfg.zeta);
  const SolverReport report = solve(ctx, cfg.domain(), cfg.solver_config());

  write_report(report, cfg, cfg.output_path, ReportFormat::json);
  if (!sf.trace_csv_path.empty()) {
    write_report(report, cfg, sf.trace_csv_path, ReportFormat::trace_csv);
  }

  std::cout << "status       " << status_string(report.status) << '\n'
            << "best_value   " << fmt17(report.best_value) << '\n'
            << "global_lower " << fmt17(report.global_lower) << '\n'
            << "gap          " << fmt17(report.gap) << '\n'
            << "angle_axis   " << fmt17(report.best_pose.r.x()) << ' '
            << fmt17(report.best_pose.r.y()) << ' '
            << fmt17(report.best_pose.r.z()) << '\n'
            << "translation  " << fmt17(report.best_pose.t.x()) << ' '
            << fmt17(report.best_pose.t.y()) << ' '
            << fmt17(report.best_pose.t.z()) << '\n'
            << "report       " << cfg.output_path << '\n';
  return report.status == SolverStatus::time_limit ? 3 : 0;
}

// ---------------------------------------------------------------------------
// synth

struct SynthFlags {
  int n_inliers = 30;
  double omega_3d = 0.0;
  double omega_2d = 0.0;
  double noise = 2.0;
  double torus_major = 3.5;
  double torus_minor = 0.5;
  std::uint64_t seed = 0;
  std::string prefix = "scene";
};

int run_synth(const SynthFlags& sf) {
  const SyntheticScene scene =
      generate_scene(sf.n_inliers, sf.omega_3d, sf.omega_2d, sf.noise, sf.seed,
                     sf.torus_major, sf.torus_minor);

  std::string points_body;
  for (const auto& p : scene.points_3d) {
    points_body += fmt17(p.x()) + " " + fmt17(p.y()) + " " + fmt17(p.z()) + "\n";
  }
  std::string pixels_body;
  for (const auto& px : scene.pixels_2d) {
    pixels_body += fmt17(px.x()) + " " + fmt17(px.y()) + "\n";
  }

  ordered_json meta;
  meta["seed"] = scene.seed;
  meta["n_inliers"] = sf.n_inliers;
  meta["omega_3d"] = sf.omega_3d;
  meta["omega_2d"] = sf.omega_2d;
  meta["noise_sigma_px"] = sf.noise;
  meta["torus_major"] = sf.torus_major;
  meta["torus_minor"] = sf.torus_minor;
  meta["intrinsics"]["focal"] = scene.intrinsics.focal;
  meta["intrinsics"]["principal_x"] = scene.intrinsics.principal.x();
  meta["intrinsics"]["principal_y"] = scene.intrinsics.principal.y();
  meta["intrinsics"]["width"] = scene.intrinsics.width;
  meta["intrinsics"]["height"] = scene.intrinsics.height;
  meta["true_pose"]["angle_axis"] = {scene.true_pose.r.x(),
                                     scene.true_pose.r.y(),
                                     scene.true_pose.r.z()};
  meta["true_pose"]["translation"] = {scene.true_pose.t.x(),
                                      scene.true_pose.t.y(),
                                      scene.true_pose.t.z()};
  meta["point_is_inlier"] = scene.point_is_inlier;
  meta["pixel_is_inlier"] = scene.pixel_is_inlier;

  const std::string points_path = sf.prefix + "_points.txt";
  const std::string pixels_path = sf.prefix + "_pixels.txt";
  const std::string meta_path = sf.prefix + "_meta.json";
  write_text_file(points_path, points_body);
  write_text_file(pixels_path, pixels_body);
  write_text_file(meta_path, meta.dump(2) + "\n");

  std::cout << "wrote " << points_path << " (" << scene.points_3d.size()
            << " points)\n"
            << "wrote " << pixels_path << " (" << scene.pixels_2d.size()
            << " pixels)\n"
            << "wrote " << meta_path << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchFlags {
  int trials = 25;
  std::uint64_t first_seed = 1;
  TrialParams params;
  double lambda_f_degrees = 2.0;
  std::string output = "smalign_bench.json";
};

ordered_json quartiles_json(const Quartiles& q) {
  return ordered_json{{"q1", q.q1}, {"q2", q.q2}, {"q3", q.q3}};
}

int run_bench(const CLI::App& cmd, BenchFlags& bf) {
  bf.params.lambda_f = bf.lambda_f_degrees * kDegree;
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(bf.trials));
  std::iota(seeds.begin(), seeds.end(), bf.first_seed);

  const TrialAggregate agg = run_trials(bf.params, bf.trials, seeds);

  ordered_json j;
  j["params"]["trials"] = bf.trials;
  j["params"]["first_seed"] = bf.first_seed;
  j["params"]["n_inliers"] = bf.params.n_inliers;
  j["params"]["omega_3d"] = bf.params.omega_3d;
  j["params"]["omega_2d"] = bf.params.omega_2d;
  j["params"]["noise_sigma_px"] = bf.params.noise_sigma_px;
  j["params"]["lambda_p"] = bf.params.lambda_p;
  j["params"]["lambda_f"] = bf.lambda_f_degrees;
  j["params"]["torus_major"] = bf.params.torus_major;
  j["params"]["torus_minor"] = bf.params.torus_minor;
  j["params"]["epsilon"] = bf.params.solver.epsilon;
  j["params"]["zeta"] = bf.params.solver.zeta;
  j["params"]["batch_size"] = bf.params.solver.batch_size;
  if (bf.params.solver.max_evaluations) {
    j["params"]["max_evaluations"] = *bf.params.solver.max_evaluations;
  }
  if (bf.params.solver.time_limit) {
    j["params"]["time_limit"] = *bf.params.solver.time_limit;
  }
  if (bf.params.solver.queue_capacity) {
    j["params"]["queue_capacity"] = *bf.params.solver.queue_capacity;
  }
  j["params"]["threads"] = bf.params.solver.threads;
  j["params"]["trial_threads"] = bf.params.trial_threads;

  j["success_rate"] = agg.success_rate;
  j["rotation_error"] = quartiles_json(agg.rotation_error);
  j["translation_error"] = quartiles_json(agg.translation_error);
  j["relative_translation_error"] = quartiles_json(agg.relative_translation_error);
  j["runtime_seconds"] = quartiles_json(agg.runtime_seconds);
  j["notes"] = agg.notes;

  ordered_json trials = ordered_json::array();
  for (const TrialRecord& t : agg.trials) {
    ordered_json row;
    row["seed"] = t.seed;
    row["rotation_error"] = t.errors.rotation_error;
    row["translation_error"] = t.errors.translation_error;
    row["relative_translation_error"] = t.errors.relative_translation_error;
    row["success"] = t.success;
    row["best_value"] = t.best_value;
    row["global_lower"] = t.global_lower;
    row["gap"] = t.gap;
    row["status"] = status_string(t.status);
    row["branches_expanded"] = t.stats.branches_expanded;
    row["sma_invocations"] = t.stats.sma_invocations;
    row["bound_evaluations"] = t.stats.bound_evaluations;
    row["solver_wall_time_seconds"] = t.stats.wall_time_seconds;
    row["wall_time_seconds"] = t.wall_time_seconds;
    row["pose"]["angle_axis"] = {t.estimate.r.x(), t.estimate.r.y(),
                                 t.estimate.r.z()};
    row["pose"]["translation"] = {t.estimate.t.x(), t.estimate.t.y(),
                                  t.estimate.t.z()};
    trials.push_back(std::move(row));
  }
  j["trials"] = std::move(trials);

  write_text_file(bf.output, j.dump(2) + "\n");

  for (const TrialRecord& t : agg.trials) {
    std::printf("seed %3" PRIu64 "  rot %.4f rad  rel_trans %.4f  %s  %.1fs\n",
                t.seed, t.errors.rotation_error,
                t.errors.relative_translation_error,
                t.success ? "ok  " : "FAIL", t.wall_time_seconds);
  }
  std::printf("success_rate %.3f\n", agg.success_rate);
  std::printf("median rotation error     %.5f rad\n", agg.rotation_error.q2);
  std::printf("median rel. translation   %.5f\n",
              agg.relative_translation_error.q2);
  std::printf("median trial runtime      %.2f s\n", agg.runtime_seconds.q2);
  std::printf("report %s\n", bf.output.c_str());
  (void)cmd;
  return 0;
}

// ---------------------------------------------------------------------------
// qpn-validate

int run_qpn(int nodes, const std::string& output) {
  std::string csv = "rho,mae\n";
  std::printf("%-6s %s\n", "rho", "mae");
  bool all_ok = true;
  for (int i = 0; i <= 18; ++i) {
    const double rho = 1.0 + 0.5 * i;
    const double mae = qpn_pn_mae(rho, nodes);
    std::printf("%-6.2f %.6f\n", rho, mae);
    csv += fmt17(rho) + "," + fmt17(mae) + "\n";
    all_ok = all_ok && mae < 0.01;
  }
  std::printf("max MAE %s 0.01 for rho >= 1\n", all_ok ? "<" : ">=");
  if (!output.empty()) write_text_file(output, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Globally optimal camera pose via spherical mixture alignment"};
  app.require_subcommand(1);

  SolveFlags sf;
  CLI::App* solve_cmd = app.add_subcommand(
      "solve", "Estimate the camera pose from 3D points and bearings/pixels");
  solve_cmd->add_option("--config", sf.config_path,
                        "key = value config file; command-line flags win");
  solve_cmd->add_option("--points", sf.flags.points_path,
                        "3D points: text 'x y z [label]' or PLY");
  solve_cmd->add_option("--bearings", sf.flags.bearings_path,
                        "bearings 'fx fy fz [label]', or pixels 'u v [label]' "
                        "when --focal is given");
  solve_cmd->add_option("--output", sf.flags.output_path,
                        "JSON report path (default smalign_report.json)");
  solve_cmd->add_option("--trace-csv", sf.trace_csv_path,
                        "also write the per-wave trace as CSV");
  solve_cmd->add_option("--focal", sf.flags.focal, "pixel-mode focal length");
  solve_cmd->add_option("--principal-x", sf.flags.principal.x());
  solve_cmd->add_option("--principal-y", sf.flags.principal.y());
  solve_cmd->add_option("--lambda-p", sf.flags.lambda_p,
                        "point clustering scale (model units)");
  solve_cmd->add_option("--lambda-f", sf.flags.lambda_f,
                        "bearing clustering scale (degrees)");
  solve_cmd->add_option("--epsilon", sf.flags.epsilon, "optimality gap target");
  solve_cmd->add_option("--zeta", sf.flags.zeta, "camera standoff radius");
  solve_cmd->add_option("--torus-major", sf.flags.torus_major);
  solve_cmd->add_option("--torus-minor", sf.flags.torus_minor);
  solve_cmd->add_option("--translation-box", sf.translation_box_flat,
                        "cx cy cz hx hy hz (repeatable)")
      ->expected(6)
      ->allow_extra_args(false);
  solve_cmd->add_option("--rotation-center", sf.rotation_center_flat,
                        "angle-axis center (radians)")
      ->expected(3);
  solve_cmd->add_option("--rotation-half-width", sf.flags.rotation.half_width,
                        "rotation cube half-width (degrees)");
  solve_cmd->add_option("--class-weight", sf.class_weight_pairs,
                        "label weight (repeatable)")
      ->expected(2)
      ->allow_extra_args(false);
  solve_cmd->add_option("--max-evaluations", sf.flags.max_evaluations);
  solve_cmd->add_option("--time-limit", sf.flags.time_limit_seconds, "seconds");
  solve_cmd->add_option("--batch-size", sf.flags.batch_size);
  solve_cmd->add_option("--queue-capacity", sf.flags.queue_capacity);
  solve_cmd->add_option("--threads", sf.flags.threads, "0 = all cores");
  solve_cmd->add_option("--seed", sf.flags.seed, "replay seed");

  SynthFlags yf;
  CLI::App* synth_cmd =
      app.add_subcommand("synth", "Generate one synthetic scene to files");
  synth_cmd->add_option("--seed", yf.seed);
  synth_cmd->add_option("--n-inliers", yf.n_inliers)->check(CLI::Range(3, 100000));
  synth_cmd->add_option("--omega-3d", yf.omega_3d, "3D outlier fraction")
      ->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--omega-2d", yf.omega_2d, "2D outlier fraction")
      ->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--noise", yf.noise, "pixel noise sigma")
      ->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--torus-major", yf.torus_major)
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--torus-minor", yf.torus_minor)
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--prefix", yf.prefix,
                        "output prefix: <prefix>_points.txt, _pixels.txt, "
                        "_meta.json");

  BenchFlags bf;
  CLI::App* bench_cmd = app.add_subcommand(
      "bench", "Monte-Carlo synthetic benchmark; aggregate report to JSON");
  bench_cmd->add_option("--trials", bf.trials)->check(CLI::PositiveNumber);
  bench_cmd->add_option("--first-seed", bf.first_seed);
  bench_cmd->add_option("--n-inliers", bf.params.n_inliers)
      ->check(CLI::Range(3, 100000));
  bench_cmd->add_option("--omega-3d", bf.params.omega_3d)
      ->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--omega-2d", bf.params.omega_2d)
      ->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--noise", bf.params.noise_sigma_px)
      ->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--lambda-p", bf.params.lambda_p)
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--lambda-f", bf.lambda_f_degrees, "degrees")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--torus-major", bf.params.torus_major)
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--torus-minor", bf.params.torus_minor)
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--epsilon", bf.params.solver.epsilon)
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--zeta", bf.params.solver.zeta)
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--batch-size", bf.params.solver.batch_size)
      ->check(CLI::PositiveNumber);
  std::uint64_t bench_max_evals = 0;
  bench_cmd->add_option("--max-evaluations", bench_max_evals);
  double bench_time_limit = 0.0;
  bench_cmd->add_option("--time-limit", bench_time_limit, "seconds per trial");
  std::size_t bench_queue_cap = 0;
  bench_cmd->add_option("--queue-capacity", bench_queue_cap);
  bench_cmd->add_option("--threads", bf.params.solver.threads);
  bench_cmd->add_option("--trial-threads", bf.params.trial_threads,
                        "concurrent trials; 0 = all cores");
  bench_cmd->add_option("--output", bf.output);

  int qpn_nodes = 1801;
  std::string qpn_output;
  CLI::App* qpn_cmd = app.add_subcommand(
      "qpn-validate",
      "Spherical-projection approximation error table over distance ratios");
  qpn_cmd->add_option("--nodes", qpn_nodes, "quadrature nodes")
      ->check(CLI::Range(3, 100000));
  qpn_cmd->add_option("--output", qpn_output, "also write rho,mae CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (solve_cmd->parsed()) return run_solve(*solve_cmd, sf);
    if (synth_cmd->parsed()) return run_synth(yf);
    if (bench_cmd->parsed()) {
      if (bench_cmd->count("--max-evaluations")) {
        bf.params.solver.max_evaluations = bench_max_evals;
      }
      if (bench_cmd->count("--time-limit")) {
        bf.params.solver.time_limit = bench_time_limit;
      }
      if (bench_cmd->count("--queue-capacity")) {
        bf.params.solver.queue_capacity = bench_queue_cap;
      }
      return run_bench(*bench_cmd, bf);
    }
    if (qpn_cmd->parsed()) return run_qpn(qpn_nodes, qpn_output);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const InfeasiblePoseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
