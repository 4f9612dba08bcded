#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "smalign/bench.hpp"
#include "smalign/mixtures.hpp"
#include "smalign/se3.hpp"
#include "smalign/solver.hpp"

namespace smalign {

// Effective settings for one run: the config-file keys, after defaulting.
// Angles live in radians here; config files carry them in degrees and the
// parser converts at the boundary.
struct RunConfig {
  std::string points_path;
  std::string bearings_path;
  std::string output_path = "smalign_report.json";

  // Presence of a focal length switches the bearings loader to pixel mode.
  std::optional<double> focal;
  Eigen::Vector2d principal{0.0, 0.0};

  double lambda_p = 0.25;
  double lambda_f = 2.0 * M_PI / 180.0;
  double epsilon = 0.1;
  double zeta = 0.5;

  // Domain: a torus prior, explicit translation cuboids, or both combined.
  std::optional<double> torus_major;
  std::optional<double> torus_minor;
  std::vector<TranslationCuboid> translation_boxes;
  RotationCube rotation{Eigen::Vector3d::Zero(), M_PI};

  std::map<std::string, double> class_weights;

  std::optional<std::uint64_t> max_evaluations;
  std::optional<double> time_limit_seconds;
  std::optional<std::size_t> queue_capacity;
  int batch_size = 1024;
  int threads = 0;
  std::uint64_t seed = 0;

  // Assembled views of the fields above. domain() throws std::invalid_argument
  // when neither torus parameters nor translation boxes are given.
  SolverConfig solver_config() const;
  PoseDomain domain() const;
};

// Key=value UTF-8 text, `#` comments, unknown keys rejected with the key
// named in the error. Unset keys keep the RunConfig defaults. lambda_f and
// rotation_half_width are read in degrees.
RunConfig parse_config(const std::string& path);

// One record per line: `x y z [label]`, whitespace separated, `#` comments.
// Also accepts PLY (ascii or binary_little_endian) vertices with an optional
// integer `label` property. Labels must be present on every record or none.
// Errors carry the 1-based line (or vertex) number.
LabeledPointSet load_points(const std::string& path);

// Unit-vector mode (no intrinsics): `fx fy fz [label]`, normalized on load,
// zero vectors rejected. Pixel mode (with intrinsics): `u v [label]` mapped
// through the inverse camera model.
LabeledBearingSet load_bearings(const std::string& path,
                                const std::optional<CameraIntrinsics>& intrinsics);

enum class ReportFormat {
  json,       // full hierarchical report: pose, values, stats, trace, config
  trace_csv,  // flat per-wave trace table
};

// Writes the report; JSON includes the effective config block so a run is
// reproducible from its own output. Numbers round-trip exactly (CSV uses 17
// significant digits). Throws std::runtime_error on I/O failure.
void write_report(const SolverReport& report, const RunConfig& config,
                  const std::string& path, ReportFormat format);

// Inverse of the JSON writer for everything the solver produced (the config
// echo is ignored). Used for round-trip verification.
SolverReport read_report(const std::string& path);

// Stable lowercase names ("epsilon_optimal", ...) used in reports and logs.
std::string status_string(SolverStatus status);

}  // namespace smalign
