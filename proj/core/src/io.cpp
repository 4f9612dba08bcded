#include "smalign/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "smalign/errors.hpp"

namespace smalign {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kDegree = M_PI / 180.0;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  const auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

std::vector<std::string> tokenize(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& tok, const std::string& where) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ParseError(where + ": '" + tok + "' is not a number");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& tok, const std::string& where) {
  std::uint64_t v = 0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ParseError(where + ": '" + tok + "' is not a non-negative integer");
  }
  return v;
}

// ---------------------------------------------------------------------------
// Config files

void require_positive(double v, const std::string& key) {
  if (!(v > 0.0)) {
    throw ParseError("config key '" + key + "': value must be > 0");
  }
}

RunConfig parse_config_stream(std::istream& in, const std::string& path) {
  RunConfig cfg;
  std::set<std::string> seen;
  const auto once = [&](const std::string& key) {
    if (!seen.insert(key).second) {
      throw ParseError("config key '" + key + "': duplicate assignment");
    }
  };

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": expected 'key = value'");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const std::string where = "config key '" + key + "'";
    if (key.empty() || value.empty()) {
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": expected 'key = value'");
    }

    if (key == "points") {
      once(key);
      cfg.points_path = value;
    } else if (key == "bearings") {
      once(key);
      cfg.bearings_path = value;
    } else if (key == "output") {
      once(key);
      cfg.output_path = value;
    } else if (key == "focal") {
      once(key);
      const double v = parse_double(value, where);
      require_positive(v, key);
      cfg.focal = v;
    } else if (key == "principal_x") {
      once(key);
      cfg.principal.x() = parse_double(value, where);
    } else if (key == "principal_y") {
      once(key);
      cfg.principal.y() = parse_double(value, where);
    } else if (key == "lambda_p") {
      once(key);
      cfg.lambda_p = parse_double(value, where);
      require_positive(cfg.lambda_p, key);
    } else if (key == "lambda_f") {  // degrees in the file
      once(key);
      const double deg = parse_double(value, where);
      require_positive(deg, key);
      cfg.lambda_f = deg * kDegree;
    } else if (key == "epsilon") {
      once(key);
      cfg.epsilon = parse_double(value, where);
      require_positive(cfg.epsilon, key);
    } else if (key == "zeta") {
      once(key);
      cfg.zeta = parse_double(value, where);
      require_positive(cfg.zeta, key);
    } else if (key == "torus_major") {
      once(key);
      const double v = parse_double(value, where);
      require_positive(v, key);
      cfg.torus_major = v;
    } else if (key == "torus_minor") {
      once(key);
      const double v = parse_double(value, where);
      require_positive(v, key);
      cfg.torus_minor = v;
    } else if (key == "translation_box") {  // cx cy cz hx hy hz; repeatable
      const auto toks = tokenize(value);
      if (toks.size() != 6) {
        throw ParseError(where + ": expected 6 numbers (center, half-widths)");
      }
      TranslationCuboid box;
      for (int i = 0; i < 3; ++i) box.center[i] = parse_double(toks[i], where);
      for (int i = 0; i < 3; ++i) {
        box.half_widths[i] = parse_double(toks[3 + i], where);
        if (box.half_widths[i] < 0.0) {
          throw ParseError(where + ": half-widths must be >= 0");
        }
      }
      cfg.translation_boxes.push_back(box);
    } else if (key == "rotation_center") {
      once(key);
      const auto toks = tokenize(value);
      if (toks.size() != 3) throw ParseError(where + ": expected 3 numbers");
      for (int i = 0; i < 3; ++i) {
        cfg.rotation.center[i] = parse_double(toks[i], where);
      }
    } else if (key == "rotation_half_width") {  // degrees in the file
      once(key);
      const double deg = parse_double(value, where);
      if (deg < 0.0) throw ParseError(where + ": value must be >= 0");
      cfg.rotation.half_width = deg * kDegree;
    } else if (key == "class_weight") {  // "label weight"; repeatable
      const auto toks = tokenize(value);
      if (toks.size() != 2) {
        throw ParseError(where + ": expected 'label weight'");
      }
      const double w = parse_double(toks[1], where);
      require_positive(w, key);
      if (!cfg.class_weights.emplace(toks[0], w).second) {
        throw ParseError(where + ": duplicate label '" + toks[0] + "'");
      }
    } else if (key == "max_evaluations") {
      once(key);
      const std::uint64_t v = parse_u64(value, where);
      if (v == 0) throw ParseError(where + ": value must be > 0");
      cfg.max_evaluations = v;
    } else if (key == "time_limit") {
      once(key);
      const double v = parse_double(value, where);
      if (v < 0.0) throw ParseError(where + ": value must be >= 0");
      cfg.time_limit_seconds = v;
    } else if (key == "batch_size") {
      once(key);
      const std::uint64_t v = parse_u64(value, where);
      if (v == 0 || v > 1u << 20) throw ParseError(where + ": out of range");
      cfg.batch_size = static_cast<int>(v);
    } else if (key == "queue_capacity") {
      once(key);
      const std::uint64_t v = parse_u64(value, where);
      if (v == 0) throw ParseError(where + ": value must be > 0");
      cfg.queue_capacity = static_cast<std::size_t>(v);
    } else if (key == "threads") {
      once(key);
      cfg.threads = static_cast<int>(parse_u64(value, where));
    } else if (key == "seed") {
      once(key);
      cfg.seed = parse_u64(value, where);
    } else {
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// PLY

struct PlyProperty {
  std::string name;
  char kind = 'f';  // 'f' float, 'i' signed, 'u' unsigned
  int size = 4;
  bool is_list = false;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

bool ply_scalar_type(const std::string& t, char& kind, int& size) {
  static const std::map<std::string, std::pair<char, int>> types = {
      {"float", {'f', 4}},  {"float32", {'f', 4}}, {"double", {'f', 8}},
      {"float64", {'f', 8}}, {"char", {'i', 1}},   {"int8", {'i', 1}},
      {"uchar", {'u', 1}},  {"uint8", {'u', 1}},   {"short", {'i', 2}},
      {"int16", {'i', 2}},  {"ushort", {'u', 2}},  {"uint16", {'u', 2}},
      {"int", {'i', 4}},    {"int32", {'i', 4}},   {"uint", {'u', 4}},
      {"uint32", {'u', 4}}};
  const auto it = types.find(t);
  if (it == types.end()) return false;
  kind = it->second.first;
  size = it->second.second;
  return true;
}

double ply_read_binary_scalar(std::istream& in, char kind, int size,
                              const std::string& where) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), size)) {
    throw ParseError(where + ": unexpected end of binary data");
  }
  // Little-endian payload on a little-endian host.
  if (kind == 'f') {
    if (size == 4) {
      float f;
      std::memcpy(&f, buf, 4);
      return f;
    }
    double d;
    std::memcpy(&d, buf, 8);
    return d;
  }
  std::uint64_t raw = 0;
  for (int i = size - 1; i >= 0; --i) raw = (raw << 8) | buf[i];
  if (kind == 'u') return static_cast<double>(raw);
  switch (size) {
    case 1: return static_cast<std::int8_t>(raw);
    case 2: return static_cast<std::int16_t>(raw);
    default: return static_cast<std::int32_t>(raw);
  }
}

LabeledPointSet load_ply_points(std::istream& in, const std::string& path) {
  std::string line;
  std::getline(in, line);  // "ply" already sniffed by the caller
  bool binary = false;
  std::vector<PlyElement> elements;
  bool have_format = false;
  while (std::getline(in, line)) {
    const std::string l = trim(line);
    if (l == "end_header") break;
    const auto toks = tokenize(l);
    if (toks.empty() || toks[0] == "comment" || toks[0] == "obj_info") continue;
    if (toks[0] == "format") {
      if (toks.size() < 2 ||
          (toks[1] != "ascii" && toks[1] != "binary_little_endian")) {
        throw ParseError(path + ": unsupported PLY format (want ascii or "
                         "binary_little_endian)");
      }
      binary = toks[1] == "binary_little_endian";
      have_format = true;
    } else if (toks[0] == "element") {
      if (toks.size() != 3) throw ParseError(path + ": malformed element line");
      PlyElement e;
      e.name = toks[1];
      e.count = parse_u64(toks[2], path + " element " + toks[1]);
      elements.push_back(e);
    } else if (toks[0] == "property") {
      if (elements.empty() || toks.size() < 3) {
        throw ParseError(path + ": property before any element");
      }
      PlyProperty p;
      if (toks[1] == "list") {
        p.is_list = true;
        p.name = toks.back();
      } else {
        if (!ply_scalar_type(toks[1], p.kind, p.size)) {
          throw ParseError(path + ": unknown PLY type '" + toks[1] + "'");
        }
        p.name = toks[2];
      }
      elements.back().props.push_back(p);
    } else {
      throw ParseError(path + ": unexpected header line '" + l + "'");
    }
  }
  if (!have_format) throw ParseError(path + ": PLY header missing format line");

  const auto vertex_it =
      std::find_if(elements.begin(), elements.end(),
                   [](const PlyElement& e) { return e.name == "vertex"; });
  if (vertex_it == elements.end()) {
    throw ParseError(path + ": PLY file has no vertex element");
  }
  if (vertex_it->count == 0) throw ParseError(path + ": no points in file");

  // Locate x, y, z and the optional integer label among the vertex props.
  int idx_xyz[3] = {-1, -1, -1};
  int idx_label = -1;
  for (std::size_t i = 0; i < vertex_it->props.size(); ++i) {
    const PlyProperty& p = vertex_it->props[i];
    if (p.is_list) {
      throw ParseError(path + ": list property in vertex element is unsupported");
    }
    if (p.name == "x") idx_xyz[0] = static_cast<int>(i);
    if (p.name == "y") idx_xyz[1] = static_cast<int>(i);
    if (p.name == "z") idx_xyz[2] = static_cast<int>(i);
    if (p.name == "label") {
      if (p.kind == 'f') {
        throw ParseError(path + ": label property must be an integer type");
      }
      idx_label = static_cast<int>(i);
    }
  }
  if (idx_xyz[0] < 0 || idx_xyz[1] < 0 || idx_xyz[2] < 0) {
    throw ParseError(path + ": vertex element lacks x, y, z properties");
  }

  // Skip any elements declared before vertex.
  for (auto it = elements.begin(); it != vertex_it; ++it) {
    for (const PlyProperty& p : it->props) {
      if (p.is_list) {
        throw ParseError(path + ": element '" + it->name +
                         "' precedes vertex and has a list property; unsupported");
      }
    }
    if (binary) {
      std::size_t record = 0;
      for (const PlyProperty& p : it->props) record += p.size;
      in.seekg(static_cast<std::streamoff>(record * it->count), std::ios::cur);
    } else {
      for (std::size_t i = 0; i < it->count; ++i) std::getline(in, line);
    }
    if (!in) throw ParseError(path + ": truncated PLY data");
  }

  LabeledPointSet out;
  for (std::size_t v = 0; v < vertex_it->count; ++v) {
    const std::string where = path + " vertex " + std::to_string(v + 1);
    std::vector<double> values(vertex_it->props.size());
    if (binary) {
      for (std::size_t i = 0; i < vertex_it->props.size(); ++i) {
        const PlyProperty& p = vertex_it->props[i];
        values[i] = ply_read_binary_scalar(in, p.kind, p.size, where);
      }
    } else {
      if (!std::getline(in, line)) {
        throw ParseError(where + ": unexpected end of file");
      }
      const auto toks = tokenize(line);
      if (toks.size() != vertex_it->props.size()) {
        throw ParseError(where + ": expected " +
                         std::to_string(vertex_it->props.size()) + " values");
      }
      for (std::size_t i = 0; i < toks.size(); ++i) {
        values[i] = parse_double(toks[i], where);
      }
    }
    out.points.emplace_back(values[idx_xyz[0]], values[idx_xyz[1]],
                            values[idx_xyz[2]]);
    if (idx_label >= 0) {
      out.labels.push_back(
          std::to_string(static_cast<long long>(values[idx_label])));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Deterministic double formatting for the CSV trace (17 significant digits).

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

SolverStatus status_from_name(const std::string& s, const std::string& path) {
  if (s == "epsilon_optimal") return SolverStatus::epsilon_optimal;
  if (s == "time_limit") return SolverStatus::time_limit;
  if (s == "queue_exhausted") return SolverStatus::queue_exhausted;
  throw ParseError(path + ": unknown solver status '" + s + "'");
}

ordered_json config_echo(const RunConfig& cfg) {
  // Keyed and scaled exactly like the config file, so the block can be fed
  // back in as-is to reproduce the run.
  ordered_json j;
  if (!cfg.points_path.empty()) j["points"] = cfg.points_path;
  if (!cfg.bearings_path.empty()) j["bearings"] = cfg.bearings_path;
  j["output"] = cfg.output_path;
  if (cfg.focal) {
    j["focal"] = *cfg.focal;
    j["principal_x"] = cfg.principal.x();
    j["principal_y"] = cfg.principal.y();
  }
  j["lambda_p"] = cfg.lambda_p;
  j["lambda_f"] = cfg.lambda_f / kDegree;
  j["epsilon"] = cfg.epsilon;
  j["zeta"] = cfg.zeta;
  if (cfg.torus_major) j["torus_major"] = *cfg.torus_major;
  if (cfg.torus_minor) j["torus_minor"] = *cfg.torus_minor;
  if (!cfg.translation_boxes.empty()) {
    ordered_json boxes = ordered_json::array();
    for (const auto& b : cfg.translation_boxes) {
      boxes.push_back({b.center.x(), b.center.y(), b.center.z(),
                       b.half_widths.x(), b.half_widths.y(), b.half_widths.z()});
    }
    j["translation_box"] = boxes;
  }
  j["rotation_center"] = {cfg.rotation.center.x(), cfg.rotation.center.y(),
                          cfg.rotation.center.z()};
  j["rotation_half_width"] = cfg.rotation.half_width / kDegree;
  if (!cfg.class_weights.empty()) {
    ordered_json w;
    for (const auto& [label, weight] : cfg.class_weights) w[label] = weight;
    j["class_weight"] = w;
  }
  if (cfg.max_evaluations) j["max_evaluations"] = *cfg.max_evaluations;
  if (cfg.time_limit_seconds) j["time_limit"] = *cfg.time_limit_seconds;
  j["batch_size"] = cfg.batch_size;
  if (cfg.queue_capacity) j["queue_capacity"] = *cfg.queue_capacity;
  j["threads"] = cfg.threads;
  j["seed"] = cfg.seed;
  return j;
}

}  // namespace

std::string status_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::epsilon_optimal: return "epsilon_optimal";
    case SolverStatus::time_limit: return "time_limit";
    case SolverStatus::queue_exhausted: return "queue_exhausted";
  }
  return "unknown";
}

SolverConfig RunConfig::solver_config() const {
  SolverConfig s;
  s.epsilon = epsilon;
  s.zeta = zeta;
  s.batch_size = batch_size;
  s.time_limit = time_limit_seconds;
  s.queue_capacity = queue_capacity;
  s.max_evaluations = max_evaluations;
  s.threads = threads;
  s.seed = seed;
  return s;
}

PoseDomain RunConfig::domain() const {
  PoseDomain d;
  d.rotation = rotation;
  if (torus_major.has_value() != torus_minor.has_value()) {
    throw std::invalid_argument(
        "RunConfig: torus_major and torus_minor must be given together");
  }
  if (torus_major) {
    const PoseDomain torus = torus_cover(*torus_major, *torus_minor);
    d.translations = torus.translations;
  }
  d.translations.insert(d.translations.end(), translation_boxes.begin(),
                        translation_boxes.end());
  if (d.translations.empty()) {
    throw std::invalid_argument(
        "RunConfig: no translation domain (set torus parameters or "
        "translation_box entries)");
  }
  return d;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  return parse_config_stream(in, path);
}

LabeledPointSet load_points(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open points file: " + path);

  // Sniff the magic line; PLY handles its own framing.
  std::string first;
  std::getline(in, first);
  in.clear();
  in.seekg(0);
  if (trim(first) == "ply") return load_ply_points(in, path);

  LabeledPointSet out;
  std::string line;
  int line_no = 0;
  int labeled = -1;  // -1 undecided, then 0/1 locked by the first record
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = tokenize(strip_comment(line));
    if (toks.empty()) continue;
    const std::string where = path + " line " + std::to_string(line_no);
    if (toks.size() != 3 && toks.size() != 4) {
      throw ParseError(where + ": expected 'x y z [label]'");
    }
    const int has_label = toks.size() == 4 ? 1 : 0;
    if (labeled == -1) labeled = has_label;
    if (labeled != has_label) {
      throw ParseError(where + ": labels must appear on every record or none");
    }
    out.points.emplace_back(parse_double(toks[0], where),
                            parse_double(toks[1], where),
                            parse_double(toks[2], where));
    if (has_label) out.labels.push_back(toks[3]);
  }
  if (out.points.empty()) throw ParseError(path + ": no points in file");
  return out;
}

LabeledBearingSet load_bearings(const std::string& path,
                                const std::optional<CameraIntrinsics>& intrinsics) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open bearings file: " + path);

  LabeledBearingSet out;
  std::string line;
  int line_no = 0;
  int labeled = -1;
  const std::size_t arity = intrinsics ? 2 : 3;
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = tokenize(strip_comment(line));
    if (toks.empty()) continue;
    const std::string where = path + " line " + std::to_string(line_no);
    if (toks.size() != arity && toks.size() != arity + 1) {
      throw ParseError(where + (intrinsics
                                    ? ": expected 'u v [label]'"
                                    : ": expected 'fx fy fz [label]'"));
    }
    const int has_label = toks.size() == arity + 1 ? 1 : 0;
    if (labeled == -1) labeled = has_label;
    if (labeled != has_label) {
      throw ParseError(where + ": labels must appear on every record or none");
    }
    if (intrinsics) {
      const Eigen::Vector2d px(parse_double(toks[0], where),
                               parse_double(toks[1], where));
      out.bearings.push_back(pixel_to_bearing(*intrinsics, px));
    } else {
      const Eigen::Vector3d v(parse_double(toks[0], where),
                              parse_double(toks[1], where),
                              parse_double(toks[2], where));
      const double n = v.norm();
      if (!(n > 1e-12)) {
        throw ParseError(where + ": bearing vector has (near-)zero length");
      }
      out.bearings.push_back(UnitVector3(v / n));
    }
    if (has_label) out.labels.push_back(toks[arity]);
  }
  if (out.bearings.empty()) throw ParseError(path + ": no bearings in file");
  return out;
}

void write_report(const SolverReport& report, const RunConfig& config,
                  const std::string& path, ReportFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);

  if (format == ReportFormat::trace_csv) {
    out << "wave,bound_evaluations,best_upper,global_lower,queue_size,"
           "unexplored_volume_fraction,pruned_volume_fraction,"
           "resolved_volume_fraction\n";
    for (const TraceEntry& t : report.trace) {
      out << t.wave << ',' << t.bound_evaluations << ',' << fmt17(t.best_upper)
          << ',' << fmt17(t.global_lower) << ',' << t.queue_size << ','
          << fmt17(t.unexplored_volume_fraction) << ','
          << fmt17(t.pruned_volume_fraction) << ','
          << fmt17(t.resolved_volume_fraction) << '\n';
    }
  } else {
    const Eigen::Matrix3d R = rotation_matrix(report.best_pose.r);
    ordered_json j;
    j["best_value"] = report.best_value;
    j["global_lower"] = report.global_lower;
    j["gap"] = report.gap;
    j["status"] = status_string(report.status);
    j["epsilon_interpretation"] = report.epsilon_interpretation;
    j["pose"]["angle_axis"] = {report.best_pose.r.x(), report.best_pose.r.y(),
                               report.best_pose.r.z()};
    j["pose"]["rotation_matrix"] = {{R(0, 0), R(0, 1), R(0, 2)},
                                    {R(1, 0), R(1, 1), R(1, 2)},
                                    {R(2, 0), R(2, 1), R(2, 2)}};
    j["pose"]["translation"] = {report.best_pose.t.x(), report.best_pose.t.y(),
                                report.best_pose.t.z()};
    j["stats"]["branches_expanded"] = report.stats.branches_expanded;
    j["stats"]["sma_invocations"] = report.stats.sma_invocations;
    j["stats"]["bound_evaluations"] = report.stats.bound_evaluations;
    j["stats"]["wall_time_seconds"] = report.stats.wall_time_seconds;
    ordered_json trace = ordered_json::array();
    for (const TraceEntry& t : report.trace) {
      ordered_json row;
      row["wave"] = t.wave;
      row["bound_evaluations"] = t.bound_evaluations;
      row["best_upper"] = t.best_upper;
      row["global_lower"] = t.global_lower;
      row["queue_size"] = t.queue_size;
      row["unexplored_volume_fraction"] = t.unexplored_volume_fraction;
      row["pruned_volume_fraction"] = t.pruned_volume_fraction;
      row["resolved_volume_fraction"] = t.resolved_volume_fraction;
      trace.push_back(std::move(row));
    }
    j["trace"] = std::move(trace);
    j["config"] = config_echo(config);
    out << j.dump(2) << '\n';
  }
  out.flush();
  if (!out) throw std::runtime_error("failed writing output file: " + path);
}

SolverReport read_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open report file: " + path);
  try {
    const ordered_json j = ordered_json::parse(in);
    SolverReport r;
    r.best_value = j.at("best_value").get<double>();
    r.global_lower = j.at("global_lower").get<double>();
    r.gap = j.at("gap").get<double>();
    r.status = status_from_name(j.at("status").get<std::string>(), path);
    r.epsilon_interpretation = j.at("epsilon_interpretation").get<std::string>();
    const auto& aa = j.at("pose").at("angle_axis");
    const auto& tr = j.at("pose").at("translation");
    for (int i = 0; i < 3; ++i) {
      r.best_pose.r[i] = aa.at(i).get<double>();
      r.best_pose.t[i] = tr.at(i).get<double>();
    }
    r.stats.branches_expanded = j.at("stats").at("branches_expanded").get<std::uint64_t>();
    r.stats.sma_invocations = j.at("stats").at("sma_invocations").get<std::uint64_t>();
    r.stats.bound_evaluations =
        j.at("stats").at("bound_evaluations").get<std::uint64_t>();
    r.stats.wall_time_seconds = j.at("stats").at("wall_time_seconds").get<double>();
    for (const auto& row : j.at("trace")) {
      TraceEntry t;
      t.wave = row.at("wave").get<std::uint64_t>();
      t.bound_evaluations = row.at("bound_evaluations").get<std::uint64_t>();
      t.best_upper = row.at("best_upper").get<double>();
      t.global_lower = row.at("global_lower").get<double>();
      t.queue_size = row.at("queue_size").get<std::size_t>();
      t.unexplored_volume_fraction =
          row.at("unexplored_volume_fraction").get<double>();
      t.pruned_volume_fraction = row.at("pruned_volume_fraction").get<double>();
      t.resolved_volume_fraction =
          row.at("resolved_volume_fraction").get<double>();
      r.trace.push_back(t);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace smalign
