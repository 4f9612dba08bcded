#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "smalign/errors.hpp"
#include "smalign/io.hpp"
#include "smalign/objective.hpp"

using namespace smalign;

namespace {

// Self-deleting fixture file in the test working directory.
struct TempFile {
  std::string path;
  TempFile(std::string name, const std::string& body) : path(std::move(name)) {
    std::ofstream f(path, std::ios::binary);
    f << body;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

template <typename T>
void put_raw(std::string& s, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  s.append(buf, sizeof(T));
}

std::string strip_timing_lines(const std::string& text) {
  std::istringstream in(text);
  std::string out, line;
  while (std::getline(in, line)) {
    if (line.find("seconds") == std::string::npos) out += line + "\n";
  }
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Two-component toy problem small enough for sub-second solver runs.
ObjectiveContext toy_context() {
  Gmm model;
  model.components.push_back(
      IsotropicGaussian(Eigen::Vector3d(0.3, 0.0, 2.2), 0.5, 0.6));
  model.components.push_back(
      IsotropicGaussian(Eigen::Vector3d(-0.4, 0.2, 1.8), 0.7, 0.4));
  Vmfmm image;
  image.components.push_back(
      VonMisesFisher(UnitVector3(Eigen::Vector3d(0.12, 0.0, 1.0).normalized()),
                     6.0, 0.55));
  image.components.push_back(
      VonMisesFisher(UnitVector3(Eigen::Vector3d(-0.2, 0.1, 1.0).normalized()),
                     4.0, 0.45));
  return ObjectiveContext(model, image, 0.4);
}

PoseDomain toy_domain() {
  PoseDomain d;
  d.rotation = RotationCube{Eigen::Vector3d::Zero(), 0.3};
  d.translations.push_back(
      TranslationCuboid{Eigen::Vector3d(0.05, -0.05, 0.1),
                        Eigen::Vector3d(0.2, 0.2, 0.2)});
  return d;
}

}  // namespace

TEST_CASE("load_points parses whitespace records with optional labels") {
  {
    TempFile f("io_pts_a.txt", "0 0 0\n1 2 3\n");
    const LabeledPointSet s = load_points(f.path);
    REQUIRE(s.points.size() == 2);
    CHECK(s.labels.empty());
    CHECK(s.points[1] == Eigen::Vector3d(1.0, 2.0, 3.0));
  }
  {
    TempFile f("io_pts_b.txt", "0 0 0 chair\n");
    const LabeledPointSet s = load_points(f.path);
    REQUIRE(s.points.size() == 1);
    REQUIRE(s.labels.size() == 1);
    CHECK(s.labels[0] == "chair");
  }
  {
    TempFile f("io_pts_c.txt", "# header comment\n\n  1 2 3   # trailing\n");
    const LabeledPointSet s = load_points(f.path);
    CHECK(s.points.size() == 1);
  }
}

TEST_CASE("load_points rejects malformed text with the line number") {
  {
    TempFile f("io_pts_d.txt", "0 0\n");
    CHECK_THROWS_WITH_AS(load_points(f.path),
                         doctest::Contains("line 1"), ParseError);
  }
  {
    TempFile f("io_pts_e.txt", "1 2 3\n4 5 six\n");
    CHECK_THROWS_WITH_AS(load_points(f.path),
                         doctest::Contains("line 2"), ParseError);
  }
  {
    TempFile f("io_pts_f.txt", "1 2 3 chair\n4 5 6\n");
    CHECK_THROWS_WITH_AS(load_points(f.path),
                         doctest::Contains("line 2"), ParseError);
  }
  {
    TempFile f("io_pts_g.txt", "# only a comment\n");
    CHECK_THROWS_AS(load_points(f.path), ParseError);
  }
  CHECK_THROWS_AS(load_points("io_no_such_file.txt"), ParseError);
}

TEST_CASE("load_points reads ascii PLY with labels and extra properties") {
  const std::string ply =
      "ply\n"
      "format ascii 1.0\n"
      "comment made by hand\n"
      "element vertex 2\n"
      "property float x\n"
      "property float y\n"
      "property float z\n"
      "property float confidence\n"
      "property uchar label\n"
      "end_header\n"
      "1 2 3 0.9 3\n"
      "-4 5 -6 0.1 7\n";
  TempFile f("io_ply_a.ply", ply);
  const LabeledPointSet s = load_points(f.path);
  REQUIRE(s.points.size() == 2);
  REQUIRE(s.labels.size() == 2);
  CHECK(s.points[0] == Eigen::Vector3d(1.0, 2.0, 3.0));
  CHECK(s.points[1] == Eigen::Vector3d(-4.0, 5.0, -6.0));
  CHECK(s.labels[0] == "3");
  CHECK(s.labels[1] == "7");
}

TEST_CASE("load_points reads binary little-endian PLY and skips prior elements") {
  std::string body =
      "ply\n"
      "format binary_little_endian 1.0\n"
      "element camera 1\n"
      "property float cx\n"
      "property float cy\n"
      "property float cz\n"
      "element vertex 2\n"
      "property float x\n"
      "property float y\n"
      "property float z\n"
      "property int label\n"
      "end_header\n";
  put_raw(body, 9.0f);  // camera element, skipped
  put_raw(body, 8.0f);
  put_raw(body, 7.0f);
  put_raw(body, 0.5f);
  put_raw(body, -1.25f);
  put_raw(body, 2.0f);
  put_raw(body, std::int32_t{12});
  put_raw(body, 3.5f);
  put_raw(body, 0.0f);
  put_raw(body, -2.0f);
  put_raw(body, std::int32_t{-3});
  TempFile f("io_ply_b.ply", body);
  const LabeledPointSet s = load_points(f.path);
  REQUIRE(s.points.size() == 2);
  CHECK(s.points[0].isApprox(Eigen::Vector3d(0.5, -1.25, 2.0)));
  CHECK(s.points[1].isApprox(Eigen::Vector3d(3.5, 0.0, -2.0)));
  REQUIRE(s.labels.size() == 2);
  CHECK(s.labels[0] == "12");
  CHECK(s.labels[1] == "-3");
}

TEST_CASE("load_points rejects unsupported PLY layouts") {
  const std::string head = "ply\nformat ascii 1.0\n";
  {
    TempFile f("io_ply_c.ply",
               "ply\nformat binary_big_endian 1.0\nelement vertex 1\n"
               "property float x\nproperty float y\nproperty float z\n"
               "end_header\n");
    CHECK_THROWS_AS(load_points(f.path), ParseError);
  }
  {
    TempFile f("io_ply_d.ply",
               head +
                   "element vertex 1\nproperty float x\nproperty float y\n"
                   "property float z\nproperty list uchar int vertex_indices\n"
                   "end_header\n1 2 3 0\n");
    CHECK_THROWS_WITH_AS(load_points(f.path), doctest::Contains("list"),
                         ParseError);
  }
  {
    TempFile f("io_ply_e.ply",
               head + "element face 0\nproperty float nx\nend_header\n");
    CHECK_THROWS_WITH_AS(load_points(f.path), doctest::Contains("vertex"),
                         ParseError);
  }
  {
    TempFile f("io_ply_f.ply",
               head +
                   "element vertex 1\nproperty float x\nproperty float y\n"
                   "property float z\nproperty float label\nend_header\n"
                   "1 2 3 0.5\n");
    CHECK_THROWS_WITH_AS(load_points(f.path), doctest::Contains("integer"),
                         ParseError);
  }
  {
    TempFile f("io_ply_g.ply",
               head + "element vertex 1\nproperty float x\nproperty float z\n"
                      "end_header\n1 2\n");
    CHECK_THROWS_AS(load_points(f.path), ParseError);
  }
}

TEST_CASE("load_bearings vector mode normalizes and rejects zero rows") {
  {
    TempFile f("io_brg_a.txt", "0 0 2\n3 0 4 wall\n");
    CHECK_THROWS_WITH_AS(load_bearings(f.path, std::nullopt),
                         doctest::Contains("line 2"), ParseError);
  }
  {
    TempFile f("io_brg_b.txt", "0 0 2\n3 0 4\n");
    const LabeledBearingSet s = load_bearings(f.path, std::nullopt);
    REQUIRE(s.bearings.size() == 2);
    CHECK(s.bearings[0].vec().isApprox(Eigen::Vector3d(0, 0, 1)));
    CHECK(s.bearings[1].vec().isApprox(Eigen::Vector3d(0.6, 0.0, 0.8)));
  }
  {
    TempFile f("io_brg_c.txt", "0 0 0\n");
    CHECK_THROWS_WITH_AS(load_bearings(f.path, std::nullopt),
                         doctest::Contains("line 1"), ParseError);
  }
  {
    TempFile f("io_brg_d.txt", "0 0\n");
    CHECK_THROWS_WITH_AS(load_bearings(f.path, std::nullopt),
                         doctest::Contains("line 1"), ParseError);
  }
}

TEST_CASE("load_bearings pixel mode applies the inverse camera model") {
  CameraIntrinsics k;
  k.focal = 800.0;
  k.principal = Eigen::Vector2d(320.0, 240.0);
  TempFile f("io_brg_e.txt", "320 240\n400 240\n");
  const LabeledBearingSet s = load_bearings(f.path, k);
  REQUIRE(s.bearings.size() == 2);
  CHECK(s.bearings[0].vec().isApprox(Eigen::Vector3d(0, 0, 1), 1e-12));
  // (400 - 320) / 800 = 0.1 of z per unit x.
  const Eigen::Vector3d expect = Eigen::Vector3d(0.1, 0.0, 1.0).normalized();
  CHECK(s.bearings[1].vec().isApprox(expect, 1e-12));

  TempFile g("io_brg_f.txt", "320 240 door\n400 240 door\n");
  const LabeledBearingSet t = load_bearings(g.path, k);
  REQUIRE(t.labels.size() == 2);
  CHECK(t.labels[0] == "door");
}

TEST_CASE("parse_config applies defaults and rejects bad keys and values") {
  {
    TempFile f("io_cfg_a.cfg", "# nothing set\n");
    const RunConfig c = parse_config(f.path);
    CHECK(c.epsilon == 0.1);
    CHECK(c.zeta == 0.5);
    CHECK(c.lambda_p == 0.25);
    CHECK(c.lambda_f == doctest::Approx(2.0 * M_PI / 180.0).epsilon(1e-15));
    CHECK(c.batch_size == 1024);
    CHECK(c.output_path == "smalign_report.json");
    CHECK_FALSE(c.focal.has_value());
    CHECK_FALSE(c.max_evaluations.has_value());
    CHECK(c.rotation.half_width == doctest::Approx(M_PI));
  }
  {
    TempFile f("io_cfg_b.cfg", "epsilon = 0.05\n");
    const RunConfig c = parse_config(f.path);
    CHECK(c.epsilon == 0.05);
    CHECK(c.zeta == 0.5);
  }
  {
    TempFile f("io_cfg_c.cfg", "epsilon = banana\n");
    CHECK_THROWS_WITH_AS(parse_config(f.path), doctest::Contains("epsilon"),
                         ParseError);
  }
  {
    TempFile f("io_cfg_d.cfg", "frobnicate = 3\n");
    CHECK_THROWS_WITH_AS(parse_config(f.path), doctest::Contains("frobnicate"),
                         ParseError);
  }
  {
    TempFile f("io_cfg_e.cfg", "zeta = -0.5\n");
    CHECK_THROWS_WITH_AS(parse_config(f.path), doctest::Contains("zeta"),
                         ParseError);
  }
  {
    TempFile f("io_cfg_f.cfg", "epsilon = 0.1\nepsilon = 0.2\n");
    CHECK_THROWS_WITH_AS(parse_config(f.path), doctest::Contains("duplicate"),
                         ParseError);
  }
  {
    TempFile f("io_cfg_g.cfg", "just some words\n");
    CHECK_THROWS_WITH_AS(parse_config(f.path), doctest::Contains("line 1"),
                         ParseError);
  }
}

TEST_CASE("parse_config converts angles from degrees and gathers repeats") {
  TempFile f("io_cfg_h.cfg",
             "lambda_f = 2\n"
             "rotation_half_width = 90\n"
             "rotation_center = 0.1 0 -0.2\n"
             "translation_box = 0 0 0 1 1 1\n"
             "translation_box = 2 0 0 0.5 0.5 0.5\n"
             "class_weight = chair 2.0\n"
             "class_weight = wall 0.5\n"
             "max_evaluations = 5000\n"
             "time_limit = 12.5\n"
             "seed = 99\n");
  const RunConfig c = parse_config(f.path);
  CHECK(c.lambda_f == doctest::Approx(2.0 * M_PI / 180.0).epsilon(1e-15));
  CHECK(c.rotation.half_width == doctest::Approx(M_PI / 2.0).epsilon(1e-15));
  CHECK(c.rotation.center == Eigen::Vector3d(0.1, 0.0, -0.2));
  REQUIRE(c.translation_boxes.size() == 2);
  CHECK(c.translation_boxes[1].center == Eigen::Vector3d(2, 0, 0));
  CHECK(c.translation_boxes[1].half_widths == Eigen::Vector3d(0.5, 0.5, 0.5));
  REQUIRE(c.class_weights.size() == 2);
  CHECK(c.class_weights.at("chair") == 2.0);
  REQUIRE(c.max_evaluations.has_value());
  CHECK(*c.max_evaluations == 5000);
  REQUIRE(c.time_limit_seconds.has_value());
  CHECK(*c.time_limit_seconds == 12.5);
  CHECK(c.seed == 99);

  TempFile g("io_cfg_i.cfg", "translation_box = 1 2 3 0.5 0.5\n");
  CHECK_THROWS_WITH_AS(parse_config(g.path), doctest::Contains("6"),
                       ParseError);
  TempFile h("io_cfg_j.cfg",
             "class_weight = chair 1\nclass_weight = chair 2\n");
  CHECK_THROWS_WITH_AS(parse_config(h.path), doctest::Contains("duplicate"),
                       ParseError);
}

TEST_CASE("RunConfig assembles the solver config and pose domain") {
  RunConfig c;
  c.epsilon = 0.07;
  c.zeta = 0.6;
  c.batch_size = 256;
  c.max_evaluations = 1234;
  c.seed = 5;

  const SolverConfig s = c.solver_config();
  CHECK(s.epsilon == 0.07);
  CHECK(s.zeta == 0.6);
  CHECK(s.batch_size == 256);
  REQUIRE(s.max_evaluations.has_value());
  CHECK(*s.max_evaluations == 1234);
  CHECK(s.seed == 5);

  CHECK_THROWS_AS(c.domain(), std::invalid_argument);  // no translations
  c.torus_major = 3.5;
  CHECK_THROWS_AS(c.domain(), std::invalid_argument);  // half a torus spec
  c.torus_minor = 0.5;
  const PoseDomain torus_only = c.domain();
  CHECK(torus_only.translations.size() > 0);
  CHECK(torus_only.rotation.half_width == doctest::Approx(M_PI));

  c.translation_boxes.push_back(
      TranslationCuboid{Eigen::Vector3d(9, 0, 0), Eigen::Vector3d(1, 1, 1)});
  CHECK(c.domain().translations.size() == torus_only.translations.size() + 1);

  RunConfig boxes_only;
  boxes_only.translation_boxes = c.translation_boxes;
  boxes_only.rotation.half_width = 0.5;
  const PoseDomain d = boxes_only.domain();
  REQUIRE(d.translations.size() == 1);
  CHECK(d.translations[0].center == Eigen::Vector3d(9, 0, 0));
  CHECK(d.rotation.half_width == 0.5);
}

TEST_CASE("report JSON and trace CSV round-trip the solver result exactly") {
  const ObjectiveContext ctx = toy_context();
  SolverConfig cfg;
  cfg.epsilon = 0.05;
  cfg.zeta = 0.4;
  cfg.batch_size = 256;
  cfg.max_evaluations = 20000;
  const SolverReport r = solve(ctx, toy_domain(), cfg);

  RunConfig rc;
  rc.points_path = "unused.txt";
  rc.bearings_path = "unused_too.txt";
  rc.translation_boxes = toy_domain().translations;
  TempFile keep_json("io_report_a.json", "");
  TempFile keep_csv("io_report_a.csv", "");
  write_report(r, rc, keep_json.path, ReportFormat::json);
  write_report(r, rc, keep_csv.path, ReportFormat::trace_csv);

  const SolverReport back = read_report(keep_json.path);
  CHECK(back.best_value == r.best_value);  // bit-exact round trip
  CHECK(back.global_lower == r.global_lower);
  CHECK(back.gap == r.gap);
  CHECK(back.status == r.status);
  CHECK(back.epsilon_interpretation == r.epsilon_interpretation);
  CHECK(back.best_pose.r == r.best_pose.r);
  CHECK(back.best_pose.t == r.best_pose.t);
  CHECK(back.stats.branches_expanded == r.stats.branches_expanded);
  CHECK(back.stats.bound_evaluations == r.stats.bound_evaluations);
  CHECK(back.stats.wall_time_seconds == r.stats.wall_time_seconds);
  REQUIRE(back.trace.size() == r.trace.size());
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    CHECK(back.trace[i].bound_evaluations == r.trace[i].bound_evaluations);
    CHECK(back.trace[i].best_upper == r.trace[i].best_upper);
    CHECK(back.trace[i].global_lower == r.trace[i].global_lower);
    CHECK(back.trace[i].pruned_volume_fraction ==
          r.trace[i].pruned_volume_fraction);
  }

  // CSV rows = header + one row per recorded wave.
  std::ifstream csv(keep_csv.path);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == r.trace.size() + 1);

  CHECK_THROWS_AS(read_report("io_no_such_report.json"), ParseError);
  TempFile broken("io_report_broken.json", "{\"best_value\": 1.0}");
  CHECK_THROWS_AS(read_report(broken.path), ParseError);
}

TEST_CASE("repeated seeded runs give byte-identical reports except timing") {
  const ObjectiveContext ctx = toy_context();
  SolverConfig cfg;
  cfg.epsilon = 0.05;
  cfg.zeta = 0.4;
  cfg.batch_size = 256;
  cfg.max_evaluations = 20000;
  RunConfig rc;
  rc.translation_boxes = toy_domain().translations;

  TempFile a("io_rep_a.json", "");
  TempFile b("io_rep_b.json", "");
  TempFile ca("io_rep_a.csv", "");
  TempFile cb("io_rep_b.csv", "");
  const SolverReport r1 = solve(ctx, toy_domain(), cfg);
  write_report(r1, rc, a.path, ReportFormat::json);
  write_report(r1, rc, ca.path, ReportFormat::trace_csv);
  const SolverReport r2 = solve(ctx, toy_domain(), cfg);
  write_report(r2, rc, b.path, ReportFormat::json);
  write_report(r2, rc, cb.path, ReportFormat::trace_csv);

  CHECK(strip_timing_lines(slurp(a.path)) == strip_timing_lines(slurp(b.path)));
  CHECK(slurp(ca.path) == slurp(cb.path));  // trace has no timing columns
}
