#pragma once

// Text artifacts: layout and scenario files (JSON), CSV tables and search /
// simulation reports. Every number goes through std::to_chars so output is
// independent of the global locale.

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "thrustopt/errors.hpp"
#include "thrustopt/geometry.hpp"
#include "thrustopt/search.hpp"
#include "thrustopt/sim.hpp"

namespace thrustopt {

using Json = nlohmann::ordered_json;

/// Scenario or layout file that does not match the expected schema.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

// ---------------------------------------------------------------------------
// Number formatting

/// Fixed-point text with `precision` decimals. Values that round to zero are
/// printed without a sign.
inline std::string fmt_fixed(double v, int precision) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  std::array<char, 512> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                 std::chars_format::fixed, precision);
  if (ec != std::errc{}) throw IoError("fmt_fixed: value out of range");
  std::string s(buf.data(), end);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

/// Shortest text that reads back to the same double.
inline std::string fmt_exact(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw IoError("fmt_exact: value out of range");
  return std::string(buf.data(), end);
}

// ---------------------------------------------------------------------------
// Files

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  }
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw IoError("write to " + path.string() + " failed");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read from " + path.string() + " failed");
  return ss.str();
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

/// Parses JSON text; syntax errors report line and column.
inline Json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1;
    std::size_t col = 1;
    const std::size_t stop = std::min(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                     ": invalid JSON");
  }
}

/// Minimal CSV builder; every row must match the header width.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : width_(header.size()) { add(header); }

  void add(const std::vector<std::string>& row) {
    if (row.size() != width_) throw DomainError("CsvTable: row width mismatch");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) text_ += ',';
      text_ += row[i];
    }
    text_ += '\n';
  }

  [[nodiscard]] const std::string& str() const { return text_; }
  void save(const std::filesystem::path& path) const { write_text(path, text_); }

 private:
  std::size_t width_;
  std::string text_;
};

// ---------------------------------------------------------------------------
// Strict JSON reading with field paths in every diagnostic

class JsonReader {
 public:
  JsonReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(path_ + ": " + msg); }

  [[nodiscard]] std::string field(const std::string& key) const { return path_ + "." + key; }

  /// Rejects keys outside `allowed`.
  void allow_only(std::initializer_list<std::string_view> allowed) const {
    for (const auto& [key, value] : j_.items()) {
      bool ok = false;
      for (auto a : allowed) ok = ok || key == a;
      if (!ok) throw ParseError(field(key) + ": unknown field");
    }
  }

  [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

  [[nodiscard]] JsonReader object(const std::string& key) const {
    return JsonReader(j_.at(key), field(key));
  }

  void number(const std::string& key, double& out) const {
    if (!has(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_number()) throw ParseError(field(key) + ": expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) throw ParseError(field(key) + ": must be finite");
  }

  void integer(const std::string& key, int& out) const {
    if (!has(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_number_integer()) throw ParseError(field(key) + ": expected an integer");
    out = v.get<int>();
  }

  template <int N>
  void vector(const std::string& key, Eigen::Matrix<double, N, 1>& out) const {
    if (!has(key)) return;
    out = read_vector(j_.at(key), field(key), N);
  }

  void vector(const std::string& key, std::optional<Eigen::Vector3d>& out) const {
    if (!has(key)) return;
    out = Eigen::Vector3d(read_vector(j_.at(key), field(key), 3));
  }

  void ids(const std::string& key, std::vector<int>& out) const {
    if (!has(key)) fail("missing field '" + key + "'");
    const Json& v = j_.at(key);
    if (!v.is_array() || v.empty()) {
      throw ParseError(field(key) + ": expected a non-empty array of integers");
    }
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string at = field(key) + "[" + std::to_string(i) + "]";
      if (!v[i].is_number_integer()) throw ParseError(at + ": expected an integer");
      const int id = v[i].get<int>();
      if (id < 1 || id > kMaxThrusters) {
        throw ParseError(at + ": unknown thruster id " + std::to_string(id));
      }
      out.push_back(id);
    }
  }

  static Eigen::VectorXd read_vector(const Json& v, const std::string& at, Eigen::Index n) {
    if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != n) {
      throw ParseError(at + ": expected an array of " + std::to_string(n) + " numbers");
    }
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Json& e = v[static_cast<std::size_t>(i)];
      if (!e.is_number()) {
        throw ParseError(at + "[" + std::to_string(i) + "]: expected a number");
      }
      out(i) = e.get<double>();
      if (!std::isfinite(out(i))) {
        throw ParseError(at + "[" + std::to_string(i) + "]: must be finite");
      }
    }
    return out;
  }

  [[nodiscard]] const Json& raw(const std::string& key) const { return j_.at(key); }

 private:
  const Json& j_;
  std::string path_;
};

inline Json to_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

// ---------------------------------------------------------------------------
// Layout files: angles are stored in degrees

inline Json layout_to_json(const CubeGeometry& geom, const FaceAngles& angles,
                           std::span<const Thruster> thrusters) {
  Json j;
  j["side_length"] = geom.side_length;
  j["angles"] = {{"theta", rad2deg(angles.theta)}, {"phi", rad2deg(angles.phi)}};
  Json list = Json::array();
  for (const auto& t : thrusters) {
    Json e;
    e["id"] = t.id;
    e["face"] = t.face;
    e["corner"] = t.corner;
    e["position"] = to_json(t.position);
    e["direction"] = to_json(t.direction);
    list.push_back(std::move(e));
  }
  j["thrusters"] = std::move(list);
  return j;
}

struct LayoutFile {
  CubeGeometry geometry;
  FaceAngles angles;
  std::vector<Thruster> thrusters;
};

/// Reads a full 24-thruster layout file. Positions and directions must agree
/// with the geometry rebuilt from side_length and angles.
inline LayoutFile layout_from_json(const Json& j, double tol = 1e-9) {
  JsonReader r(j, "layout");
  r.allow_only({"side_length", "angles", "thrusters"});
  if (!r.has("side_length")) r.fail("missing field 'side_length'");
  if (!r.has("thrusters")) r.fail("missing field 'thrusters'");
  double side = 0.0;
  r.number("side_length", side);
  if (!(side > 0.0)) throw ParseError(r.field("side_length") + ": must be positive");

  FaceAngles angles;
  if (r.has("angles")) {
    const JsonReader a = r.object("angles");
    a.allow_only({"theta", "phi"});
    double th = rad2deg(angles.theta);
    double ph = rad2deg(angles.phi);
    a.number("theta", th);
    a.number("phi", ph);
    angles = {deg2rad(th), deg2rad(ph)};
    if (!angles.valid()) r.fail("angles out of range");
  }

  LayoutFile out;
  out.geometry = make_cube_geometry(side);
  out.angles = angles;
  const auto full = build_layout(out.geometry, angles);

  const Json& list = r.raw("thrusters");
  if (!list.is_array() || list.size() != static_cast<std::size_t>(kMaxThrusters)) {
    throw ParseError(r.field("thrusters") + ": expected an array of 24 thrusters");
  }
  std::set<int> seen;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const JsonReader e(list[i], r.field("thrusters") + "[" + std::to_string(i) + "]");
    e.allow_only({"id", "face", "corner", "position", "direction"});
    int id = 0;
    if (!e.has("id")) e.fail("missing field 'id'");
    e.integer("id", id);
    if (id < 1 || id > kMaxThrusters) {
      throw ParseError(e.field("id") + ": unknown thruster id " + std::to_string(id));
    }
    if (!seen.insert(id).second) throw ParseError(e.field("id") + ": duplicate id");
    const Thruster& ref = full[static_cast<std::size_t>(id - 1)];
    Thruster t = ref;
    int face = ref.face;
    int corner = ref.corner;
    e.integer("face", face);
    e.integer("corner", corner);
    if (face != ref.face || corner != ref.corner) {
      e.fail("face/corner disagree with id " + std::to_string(id));
    }
    Eigen::Vector3d pos = ref.position;
    Eigen::Vector3d dir = ref.direction;
    e.vector<3>("position", pos);
    e.vector<3>("direction", dir);
    if ((pos - ref.position).norm() > tol) e.fail("position disagrees with the cube geometry");
    if ((dir - ref.direction).norm() > tol) e.fail("direction disagrees with the angles");
    out.thrusters.push_back(t);
  }
  std::sort(out.thrusters.begin(), out.thrusters.end(),
            [](const Thruster& a, const Thruster& b) { return a.id < b.id; });
  return out;
}

// ---------------------------------------------------------------------------
// Scenario files

inline Json weights_to_json(const PhaseWeights& w) {
  return {{"q", to_json(w.q_diag)}, {"r", w.r}, {"r_df", w.r_df}};
}

inline Json scenario_to_json(const ScenarioConfig& c) {
  Json j;
  j["thruster_ids"] = c.thruster_ids;
  Json vehicle;
  vehicle["side_length"] = c.side_length;
  vehicle["mass"] = c.mass;
  const Eigen::Matrix3d inertia = c.body().inertia;
  Json rows = Json::array();
  for (int i = 0; i < 3; ++i) rows.push_back(to_json(inertia.row(i).transpose()));
  vehicle["inertia"] = std::move(rows);
  j["vehicle"] = std::move(vehicle);
  j["angles"] = {{"theta", rad2deg(c.angles.theta)}, {"phi", rad2deg(c.angles.phi)}};
  j["orbit"] = {{"mu", c.mu},
                {"semi_major_axis", c.semi_major_axis},
                {"eccentricity", c.eccentricity},
                {"initial_anomaly", rad2deg(c.initial_anomaly)}};
  j["timing"] = {{"dt", c.dt}, {"t_final", c.t_final}};
  Json init;
  init["position"] = to_json(c.initial_position);
  init["velocity"] = to_json(c.initial_velocity);
  init["attitude_axis"] = to_json(c.initial_attitude_axis);
  init["attitude_angle"] = rad2deg(c.initial_attitude_angle);
  init["chaser_rate"] = to_json(c.chaser_rate);
  init["target_rate"] = to_json(c.target_rate);
  if (c.initial_relative_rate) init["relative_rate"] = to_json(*c.initial_relative_rate);
  j["initial"] = std::move(init);
  j["mpc"] = {{"horizon", c.mpc.horizon},
              {"f_min", c.mpc.f_min},
              {"f_max", c.mpc.f_max},
              {"rho", c.mpc.rho},
              {"terminal_scale", c.mpc.terminal_scale},
              {"qp_max_iterations", c.mpc.qp_max_iterations},
              {"qp_tol", c.mpc.qp_tol}};
  j["weights"] = {{"approach", weights_to_json(c.schedule.approach)},
                  {"docking", weights_to_json(c.schedule.docking)}};
  j["schedule"] = {{"waypoint", to_json(c.schedule.waypoint.r)},
                   {"switch_r_tol", c.schedule.switch_r_tol},
                   {"switch_v_tol", c.schedule.switch_v_tol},
                   {"approach_glide_speed", c.schedule.approach_glide_speed},
                   {"docking_glide_speed", c.schedule.docking_glide_speed},
                   {"glide_time_constant", c.schedule.glide_time_constant},
                   {"attitude_slew_rate", rad2deg(c.schedule.attitude_slew_rate)}};
  j["terminal"] = {{"r_tol", c.terminal.r_tol},
                   {"v_tol", c.terminal.v_tol},
                   {"angle", rad2deg(c.terminal.alpha_tol)}};
  j["activity_threshold"] = c.activity_threshold;
  return j;
}

inline void read_weights(const JsonReader& r, PhaseWeights& w) {
  r.allow_only({"q", "r", "r_df"});
  r.vector<kStateDim>("q", w.q_diag);
  r.number("r", w.r);
  r.number("r_df", w.r_df);
}

/// Builds a scenario from JSON. Absent fields keep their defaults; unknown
/// fields and type errors raise ParseError naming the field.
inline ScenarioConfig scenario_from_json(const Json& j) {
  ScenarioConfig c;
  const JsonReader r(j, "scenario");
  r.allow_only({"thruster_ids", "vehicle", "angles", "orbit", "timing", "initial", "mpc",
                "weights", "schedule", "terminal", "activity_threshold"});
  r.ids("thruster_ids", c.thruster_ids);

  if (r.has("vehicle")) {
    const JsonReader v = r.object("vehicle");
    v.allow_only({"side_length", "mass", "inertia"});
    v.number("side_length", c.side_length);
    v.number("mass", c.mass);
    if (v.has("inertia")) {
      const Json& in = v.raw("inertia");
      const std::string at = v.field("inertia");
      if (!in.is_array() || in.size() != 3) throw ParseError(at + ": expected 3 rows of 3");
      Eigen::Matrix3d m;
      for (int i = 0; i < 3; ++i) {
        m.row(i) = JsonReader::read_vector(in[static_cast<std::size_t>(i)],
                                           at + "[" + std::to_string(i) + "]", 3)
                       .transpose();
      }
      c.inertia = m;
    }
  }
  if (r.has("angles")) {
    const JsonReader a = r.object("angles");
    a.allow_only({"theta", "phi"});
    double th = rad2deg(c.angles.theta);
    double ph = rad2deg(c.angles.phi);
    a.number("theta", th);
    a.number("phi", ph);
    c.angles = {deg2rad(th), deg2rad(ph)};
  }
  if (r.has("orbit")) {
    const JsonReader o = r.object("orbit");
    o.allow_only({"mu", "semi_major_axis", "eccentricity", "initial_anomaly"});
    o.number("mu", c.mu);
    o.number("semi_major_axis", c.semi_major_axis);
    o.number("eccentricity", c.eccentricity);
    double nu = rad2deg(c.initial_anomaly);
    o.number("initial_anomaly", nu);
    c.initial_anomaly = deg2rad(nu);
  }
  if (r.has("timing")) {
    const JsonReader t = r.object("timing");
    t.allow_only({"dt", "t_final"});
    t.number("dt", c.dt);
    t.number("t_final", c.t_final);
  }
  if (r.has("initial")) {
    const JsonReader s = r.object("initial");
    s.allow_only({"position", "velocity", "attitude_axis", "attitude_angle", "chaser_rate",
                  "target_rate", "relative_rate"});
    s.vector<3>("position", c.initial_position);
    s.vector<3>("velocity", c.initial_velocity);
    s.vector<3>("attitude_axis", c.initial_attitude_axis);
    double ang = rad2deg(c.initial_attitude_angle);
    s.number("attitude_angle", ang);
    c.initial_attitude_angle = deg2rad(ang);
    s.vector<3>("chaser_rate", c.chaser_rate);
    s.vector<3>("target_rate", c.target_rate);
    s.vector("relative_rate", c.initial_relative_rate);
  }
  if (r.has("mpc")) {
    const JsonReader m = r.object("mpc");
    m.allow_only({"horizon", "f_min", "f_max", "rho", "terminal_scale", "qp_max_iterations",
                  "qp_tol"});
    m.integer("horizon", c.mpc.horizon);
    m.number("f_min", c.mpc.f_min);
    m.number("f_max", c.mpc.f_max);
    m.number("rho", c.mpc.rho);
    m.number("terminal_scale", c.mpc.terminal_scale);
    m.integer("qp_max_iterations", c.mpc.qp_max_iterations);
    m.number("qp_tol", c.mpc.qp_tol);
  }
  if (r.has("weights")) {
    const JsonReader w = r.object("weights");
    w.allow_only({"approach", "docking"});
    if (w.has("approach")) read_weights(w.object("approach"), c.schedule.approach);
    if (w.has("docking")) read_weights(w.object("docking"), c.schedule.docking);
  }
  if (r.has("schedule")) {
    const JsonReader s = r.object("schedule");
    s.allow_only({"waypoint", "switch_r_tol", "switch_v_tol", "approach_glide_speed",
                  "docking_glide_speed", "glide_time_constant", "attitude_slew_rate"});
    s.vector<3>("waypoint", c.schedule.waypoint.r);
    s.number("switch_r_tol", c.schedule.switch_r_tol);
    s.number("switch_v_tol", c.schedule.switch_v_tol);
    s.number("approach_glide_speed", c.schedule.approach_glide_speed);
    s.number("docking_glide_speed", c.schedule.docking_glide_speed);
    s.number("glide_time_constant", c.schedule.glide_time_constant);
    double slew = rad2deg(c.schedule.attitude_slew_rate);
    s.number("attitude_slew_rate", slew);
    c.schedule.attitude_slew_rate = deg2rad(slew);
  }
  if (r.has("terminal")) {
    const JsonReader t = r.object("terminal");
    t.allow_only({"r_tol", "v_tol", "angle"});
    t.number("r_tol", c.terminal.r_tol);
    t.number("v_tol", c.terminal.v_tol);
    double ang = rad2deg(c.terminal.alpha_tol);
    t.number("angle", ang);
    c.terminal.alpha_tol = deg2rad(ang);
  }
  r.number("activity_threshold", c.activity_threshold);

  try {
    c.validate();
  } catch (const DomainError& e) {
    throw ParseError(e.what());
  }
  return c;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(parse_json_text(read_text(path), path.string()));
}

// ---------------------------------------------------------------------------
// Search report

inline constexpr int kTablePrecision = 6;
inline constexpr int kStatePrecision = 12;

inline std::string summary_csv(const SearchResult& res) {
  CsvTable t({"N", "combinations", "viable", "optimal", "f_min"});
  for (const auto& s : res.sizes) {
    const auto& m = s.summary;
    t.add({std::to_string(m.n), std::to_string(m.combinations), std::to_string(m.viable),
           std::to_string(m.optimal), m.f_min ? fmt_fixed(*m.f_min, kTablePrecision) : "--"});
  }
  return t.str();
}

inline const std::array<const char*, kNumUnitCommands>& unit_command_labels() {
  static const std::array<const char*, kNumUnitCommands> labels = {
      "+fx", "+fy", "+fz", "+tx", "+ty", "+tz", "-fx", "-fy", "-fz", "-tx", "-ty", "-tz"};
  return labels;
}

inline Json optimal_set_json(const SizeResult& s, const SearchOptions& opts) {
  Json j;
  j["n"] = s.summary.n;
  j["f_min"] = s.summary.f_min ? Json(*s.summary.f_min) : Json(nullptr);
  j["tie_tol"] = opts.tie_tol;
  j["unit_commands"] = unit_command_labels();
  Json list = Json::array();
  for (const auto& rec : s.optimal) {
    Json e;
    e["ids"] = rec.thruster_ids;
    e["total_thrust"] = rec.total_thrust;
    e["max_residual"] = rec.max_residual;
    if (rec.unit_solutions.size() > 0) {
      // One row per unit command, one entry per thruster.
      Json sol = Json::array();
      for (Eigen::Index q = 0; q < rec.unit_solutions.cols(); ++q) {
        sol.push_back(to_json(rec.unit_solutions.col(q)));
      }
      e["unit_solutions"] = std::move(sol);
    }
    list.push_back(std::move(e));
  }
  j["configurations"] = std::move(list);
  return j;
}

inline std::string optimal_file_name(int n) {
  return "optimal_N" + std::string(n < 10 ? "0" : "") + std::to_string(n) + ".json";
}

/// Writes summary.csv and one optimal_NXX.json per size; returns the file
/// names written.
inline std::vector<std::string> emit_report(const SearchResult& res, const SearchOptions& opts,
                                            const std::filesystem::path& dir) {
  ensure_directory(dir);
  std::vector<std::string> files;
  write_text(dir / "summary.csv", summary_csv(res));
  files.emplace_back("summary.csv");
  for (const auto& s : res.sizes) {
    const std::string name = optimal_file_name(s.summary.n);
    write_json(dir / name, optimal_set_json(s, opts));
    files.push_back(name);
  }
  return files;
}

/// First optimal id list in an optimal_NXX.json file, if any.
inline std::optional<std::vector<int>> read_first_optimal(const std::filesystem::path& path) {
  const Json j = parse_json_text(read_text(path), path.string());
  const JsonReader r(j, path.filename().string());
  if (!r.has("configurations") || !r.raw("configurations").is_array()) {
    r.fail("missing 'configurations' array");
  }
  const Json& list = r.raw("configurations");
  if (list.empty()) return std::nullopt;
  std::vector<int> ids;
  JsonReader(list[0], r.field("configurations[0]")).ids("ids", ids);
  return ids;
}

// ---------------------------------------------------------------------------
// Simulation outputs

inline std::string opt_fixed(const std::optional<double>& v, int precision) {
  return v ? fmt_fixed(*v, precision) : "--";
}

inline Json sim_result_json(const SimResult& r) {
  Json j;
  j["thruster_ids"] = r.thruster_ids;
  j["docked"] = r.docked;
  j["time_to_dock"] = r.time_to_dock ? Json(*r.time_to_dock) : Json(nullptr);
  j["t_end"] = r.t_end;
  j["steps"] = r.log.size();
  j["total_impulse"] = r.metrics.total_impulse;
  j["angular_velocity_rms"] = to_json(r.metrics.rate_rms);
  j["angular_velocity_rms_norm"] = r.metrics.rate_rms_norm;
  j["activity"] = to_json(r.metrics.activity);
  j["phase_switch_time"] = r.phase_switch_time ? Json(*r.phase_switch_time) : Json(nullptr);
  j["qp_unconverged_steps"] = r.qp_unconverged_steps;
  j["diagnostic"] = r.diagnostic;
  return j;
}

inline std::string trajectory_csv(const SimResult& r) {
  std::vector<std::string> header = {"t",  "x",  "y",  "z",  "vx", "vy", "vz",
                                     "q0", "q1", "q2", "q3", "wx", "wy", "wz"};
  for (int id : r.thruster_ids) header.push_back("f" + std::to_string(id));
  header.emplace_back("phase");
  CsvTable t(header);
  std::vector<std::string> row(header.size());
  for (const auto& e : r.log) {
    std::size_t k = 0;
    row[k++] = fmt_fixed(e.t, 3);
    for (Eigen::Index i = 0; i < kStateDim; ++i) row[k++] = fmt_fixed(e.state(i), kStatePrecision);
    for (Eigen::Index i = 0; i < e.thrust.size(); ++i) {
      row[k++] = fmt_fixed(e.thrust(i), kStatePrecision);
    }
    row[k++] = std::to_string(e.phase);
    t.add(row);
  }
  return t.str();
}

/// One summary row per entry; a missing result prints "--".
struct BatchRow {
  int n = 0;
  const SimResult* result = nullptr;
};

inline std::string table4_csv(const std::vector<BatchRow>& rows) {
  CsvTable t({"N", "docked", "time_to_dock", "total_impulse"});
  for (const auto& e : rows) {
    if (!e.result) {
      t.add({std::to_string(e.n), "--", "--", "--"});
      continue;
    }
    const SimResult& r = *e.result;
    t.add({std::to_string(e.n), r.docked ? "1" : "0", opt_fixed(r.time_to_dock, 1),
           fmt_fixed(r.metrics.total_impulse, 4)});
  }
  return t.str();
}

inline std::string activity_csv(const std::vector<BatchRow>& rows) {
  CsvTable t({"N", "id", "activity"});
  for (const auto& e : rows) {
    if (!e.result) continue;
    const SimResult& r = *e.result;
    for (std::size_t i = 0; i < r.thruster_ids.size(); ++i) {
      t.add({std::to_string(e.n), std::to_string(r.thruster_ids[i]),
             fmt_fixed(r.metrics.activity(static_cast<Eigen::Index>(i)), kTablePrecision)});
    }
  }
  return t.str();
}

inline std::string rms_csv(const std::vector<BatchRow>& rows) {
  CsvTable t({"N", "wx_rms", "wy_rms", "wz_rms", "w_rms"});
  for (const auto& e : rows) {
    if (!e.result) {
      t.add({std::to_string(e.n), "--", "--", "--", "--"});
      continue;
    }
    const auto& m = e.result->metrics;
    t.add({std::to_string(e.n), fmt_fixed(m.rate_rms(0), 9), fmt_fixed(m.rate_rms(1), 9),
           fmt_fixed(m.rate_rms(2), 9), fmt_fixed(m.rate_rms_norm, 9)});
  }
  return t.str();
}

// ---------------------------------------------------------------------------
// Run manifest

inline constexpr const char* kVersion = "0.1.0";

struct RunManifest {
  std::vector<std::string> command_line;
  Json config;
  std::vector<std::string> outputs;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::array<char, 32> buf{};
  std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf.data();
}

inline void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  Json j;
  j["command_line"] = m.command_line;
  j["version"] = kVersion;
  j["timestamp"] = utc_timestamp();
  j["config"] = m.config;
  std::vector<std::string> files = m.outputs;
  files.emplace_back("manifest.json");
  j["outputs"] = files;
  write_json(dir / "manifest.json", j);
}

}  // namespace thrustopt
