#ifndef POSEBENCH_IO_HPP
#define POSEBENCH_IO_HPP

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "json.hpp"
#include "posebench/error.hpp"
#include "posebench/geometry.hpp"
#include "posebench/metrics.hpp"
#include "posebench/scene_synth.hpp"
#include "posebench/sfm/bundle_adjust.hpp"
#include "posebench/trajgen.hpp"
#include "posebench/uncertainty.hpp"

namespace posebench::io {

using Json = nlohmann::json;

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::kIoError, "write failed for " + path.string());
}

inline Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    fail(ErrorCode::kParseError, e.what());
  }
}

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace detail {

inline Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

/// Non-finite coordinates (unobserved points) are stored as null.
inline Json pixel_json(const Vec2& p) {
  if (!p.allFinite()) return Json(nullptr);
  return Json::array({p.x(), p.y()});
}

template <typename F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Json::exception& e) {
    fail(ErrorCode::kParseError, e.what());
  }
}

inline double number(const Json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) fail(ErrorCode::kParseError, "expected a number");
  return j.get<double>();
}

inline Vec3 vec3(const Json& j) {
  if (!j.is_array() || j.size() != 3) fail(ErrorCode::kParseError, "expected [x, y, z]");
  return {number(j[0]), number(j[1]), number(j[2])};
}

inline Vec2 pixel(const Json& j) {
  if (j.is_null()) return Vec2::Constant(std::numeric_limits<double>::quiet_NaN());
  if (!j.is_array() || j.size() != 2) fail(ErrorCode::kParseError, "expected [x, y]");
  return {number(j[0]), number(j[1])};
}

inline Json pose_json(const Pose& p) {
  const auto q = quaternion_from_rotation(p.rotation);
  Json r = Json::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.push_back(p.rotation(i, j));
  return {{"q", {q[0], q[1], q[2], q[3]}}, {"t", vec_json(p.translation)}, {"R", r}};
}

/// Reads q/t, preferring the full-precision "R" when present. Sets
/// `repaired` when a slightly drifted rotation was re-orthonormalized.
inline Pose pose_from_json(const Json& f, bool& repaired) {
  Pose p;
  p.translation = vec3(f.at("t"));
  if (f.contains("R")) {
    const Json& r = f.at("R");
    if (!r.is_array() || r.size() != 9) fail(ErrorCode::kParseError, "R must hold 9 values");
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) p.rotation(i, j) = number(r[3 * i + j]);
  } else {
    const Json& q = f.at("q");
    if (!q.is_array() || q.size() != 4) fail(ErrorCode::kParseError, "q must be [w, x, y, z]");
    std::array<double, 4> wxyz{number(q[0]), number(q[1]), number(q[2]), number(q[3])};
    const double norm = std::sqrt(wxyz[0] * wxyz[0] + wxyz[1] * wxyz[1] + wxyz[2] * wxyz[2] + wxyz[3] * wxyz[3]);
    if (!(std::abs(norm - 1.0) <= 1e-6)) fail(ErrorCode::kInvalidPose, "quaternion is not unit norm");
    p.rotation = rotation_from_quaternion(wxyz);
  }
  if (!p.rotation.allFinite() || !p.translation.allFinite()) fail(ErrorCode::kInvalidPose, "non-finite pose");
  if (p.rotation.determinant() < 0.0) fail(ErrorCode::kInvalidPose, "rotation is a reflection");
  const double err = orthonormality_error(p.rotation);
  if (err > 1e-6) fail(ErrorCode::kInvalidPose, "rotation is not orthonormal");
  if (err > 1e-12) {
    p.rotation = nearest_rotation(p.rotation);
    repaired = true;
  }
  return p;
}

}  // namespace detail

// --- Trajectory ---------------------------------------------------------------

inline Json trajectory_to_json(const Trajectory& t) {
  Json frames = Json::array();
  for (std::size_t i = 0; i < t.size(); ++i) {
    Json f = detail::pose_json(t.poses[i]);
    f["idx"] = t.frame_indices[i];
    frames.push_back(std::move(f));
  }
  return {{"convention", "world_to_camera"}, {"frames", frames}};
}

struct TrajectoryImport {
  Trajectory trajectory;
  bool reorthonormalized = false;  // some rotation drifted by <= 1e-6 and was repaired
};

inline TrajectoryImport trajectory_from_json(const Json& j) {
  return detail::guarded([&] {
    if (!j.is_object()) fail(ErrorCode::kParseError, "trajectory must be an object");
    if (j.contains("convention") && j.at("convention") != "world_to_camera")
      fail(ErrorCode::kParseError, "unsupported pose convention");
    TrajectoryImport out;
    for (const Json& f : j.at("frames")) {
      out.trajectory.frame_indices.push_back(f.at("idx").get<std::int64_t>());
      out.trajectory.poses.push_back(detail::pose_from_json(f, out.reorthonormalized));
    }
    if (out.trajectory.size() < 2) fail(ErrorCode::kInvalidParams, "trajectory needs >= 2 frames");
    out.trajectory.validate(1e-9);
    return out;
  });
}

inline void export_trajectory(const Trajectory& t, const std::filesystem::path& path) {
  write_text(path, trajectory_to_json(t).dump(1) + "\n");
}

inline TrajectoryImport import_trajectory_checked(const std::filesystem::path& path) {
  return trajectory_from_json(parse_json(read_text(path)));
}

inline Trajectory import_trajectory(const std::filesystem::path& path) {
  return import_trajectory_checked(path).trajectory;
}

// --- TrackSet -------------------------------------------------------------------

inline Json trackset_to_json(const TrackSet& ts) {
  Json points = Json::array();
  for (std::size_t i = 0; i < ts.num_points(); ++i) {
    Json xy = Json::array(), vis = Json::array();
    for (int t = 0; t < ts.num_frames; ++t) {
      xy.push_back(detail::pixel_json(ts.position(t, i)));
      vis.push_back(ts.visible(t, i));
    }
    Json p = {{"id", ts.point_ids[i]}, {"xy", xy}, {"vis", vis}};
    if (ts.levels) {
      Json lv = Json::array();
      for (int t = 0; t < ts.num_frames; ++t) lv.push_back(ts.level(t, i));
      p["level"] = lv;
    }
    if (ts.logits) {
      Json lg = Json::array();
      for (int t = 0; t < ts.num_frames; ++t) {
        const auto row = ts.logit(t, i);
        lg.push_back(Json(std::vector<double>(row.begin(), row.end())));
      }
      p["logits"] = lg;
    }
    points.push_back(std::move(p));
  }
  return {{"num_frames", ts.num_frames}, {"points", points}};
}

inline TrackSet trackset_from_json(const Json& j) {
  return detail::guarded([&] {
    const int t_count = j.at("num_frames").get<int>();
    if (t_count < 1) fail(ErrorCode::kParseError, "num_frames must be positive");
    const Json& pts = j.at("points");
    std::vector<int> ids;
    for (const Json& p : pts) ids.push_back(p.at("id").get<int>());
    TrackSet ts(t_count, ids);
    const bool has_levels = !pts.empty() && pts[0].contains("level");
    const bool has_logits = !pts.empty() && pts[0].contains("logits");
    if (has_levels) ts.levels = std::vector<int>(ts.positions.size(), 1);
    if (has_logits) {
      ts.num_levels = static_cast<int>(pts[0].at("logits").at(0).size());
      ts.logits = std::vector<double>(ts.positions.size() * ts.num_levels, 0.0);
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Json& p = pts[i];
      const Json& xy = p.at("xy");
      const Json& vis = p.at("vis");
      if (xy.size() != static_cast<std::size_t>(t_count) || vis.size() != static_cast<std::size_t>(t_count))
        fail(ErrorCode::kShapeMismatch, "per-point arrays must have num_frames entries");
      if (p.contains("level") != has_levels || p.contains("logits") != has_logits)
        fail(ErrorCode::kShapeMismatch, "optional fields must be present for all points or none");
      for (int t = 0; t < t_count; ++t) {
        ts.position(t, i) = detail::pixel(xy[t]);
        ts.set_visible(t, i, vis[t].get<bool>());
        if (has_levels) (*ts.levels)[ts.index(t, i)] = p.at("level").at(t).get<int>();
        if (has_logits) {
          const Json& row = p.at("logits").at(t);
          if (row.size() != static_cast<std::size_t>(ts.num_levels))
            fail(ErrorCode::kShapeMismatch, "logit rows must have n_levels entries");
          for (int k = 0; k < ts.num_levels; ++k)
            (*ts.logits)[ts.index(t, i) * ts.num_levels + k] = detail::number(row[k]);
        }
      }
    }
    if (has_levels && !has_logits) {
      int n = 0;
      for (int v : *ts.levels) n = std::max(n, v);
      ts.num_levels = n;
    }
    if (t_count >= 2) ts.validate();
    return ts;
  });
}

// --- Reconstruction ---------------------------------------------------------------

inline Json reconstruction_to_json(const sfm::Reconstruction& r) {
  Json poses = Json::array();
  for (int f = 0; f < r.num_frames(); ++f) {
    Json p = detail::pose_json(r.poses[f]);
    p["frame"] = f;
    p["registered"] = r.registered[f] != 0;
    poses.push_back(std::move(p));
  }
  Json lms = Json::array();
  for (const auto& [id, x] : r.landmarks) lms.push_back({{"id", id}, {"xyz", detail::vec_json(x)}});
  Json obs = Json::array();
  for (const auto& o : r.observations)
    obs.push_back({{"id", o.point_id}, {"frame", o.frame}, {"xy", detail::pixel_json(o.pixel)}, {"inlier", o.inlier}});
  return {{"poses", poses},
          {"landmarks", lms},
          {"observations", obs},
          {"rmse", r.rmse},
          {"init_pair", {r.init_frame_a, r.init_frame_b}},
          {"anchor_frame", r.anchor_frame},
          {"scale_frame", r.scale_frame},
          {"diverged", r.diverged}};
}

inline sfm::Reconstruction reconstruction_from_json(const Json& j) {
  return detail::guarded([&] {
    sfm::Reconstruction r;
    for (const Json& p : j.at("poses")) {
      Pose pose;
      pose.translation = detail::vec3(p.at("t"));
      const Json& m = p.at("R");
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) pose.rotation(a, b) = detail::number(m.at(3 * a + b));
      r.poses.push_back(pose);
      r.registered.push_back(p.at("registered").get<bool>() ? 1 : 0);
    }
    for (const Json& l : j.at("landmarks")) r.landmarks[l.at("id").get<int>()] = detail::vec3(l.at("xyz"));
    for (const Json& o : j.at("observations"))
      r.observations.push_back(
          {o.at("id").get<int>(), o.at("frame").get<int>(), detail::pixel(o.at("xy")), o.at("inlier").get<bool>()});
    r.rmse = detail::number(j.at("rmse"));
    r.init_frame_a = j.at("init_pair").at(0).get<int>();
    r.init_frame_b = j.at("init_pair").at(1).get<int>();
    r.anchor_frame = j.at("anchor_frame").get<int>();
    r.scale_frame = j.at("scale_frame").get<int>();
    r.diverged = j.at("diverged").get<bool>();
    return r;
  });
}

// --- Kept sets ----------------------------------------------------------------------

inline Json kept_to_json(const KeptSet& kept) { return Json(kept); }

inline KeptSet kept_from_json(const Json& j) {
  return detail::guarded([&] { return j.get<KeptSet>(); });
}

// --- Scores ---------------------------------------------------------------------

inline Json score_to_json(const WindowScore& s) {
  Json j = {{"registered", s.registered}};
  if (s.registered) {
    j["t_err"] = s.t_err;
    j["r_err"] = s.r_err;
    j["ate"] = s.ate;
    j["rpe_trans"] = s.rpe_trans;
    j["rpe_rot"] = s.rpe_rot;
    Json r = Json::array();
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) r.push_back(s.alignment.rotation(a, b));
    j["alignment"] = {{"scale", s.alignment.scale}, {"R", r}, {"t", detail::vec_json(s.alignment.translation)}};
  } else {
    j["failure"] = s.failure;
  }
  return j;
}

inline WindowScore score_from_json(const Json& j) {
  return detail::guarded([&] {
    WindowScore s;
    s.registered = j.at("registered").get<bool>();
    if (!s.registered) {
      s.failure = j.value("failure", std::string());
      return s;
    }
    s.t_err = detail::number(j.at("t_err"));
    s.r_err = detail::number(j.at("r_err"));
    s.ate = detail::number(j.at("ate"));
    s.rpe_trans = detail::number(j.at("rpe_trans"));
    s.rpe_rot = detail::number(j.at("rpe_rot"));
    const Json& a = j.at("alignment");
    s.alignment.scale = detail::number(a.at("scale"));
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) s.alignment.rotation(r, c) = detail::number(a.at("R").at(3 * r + c));
    s.alignment.translation = detail::vec3(a.at("t"));
    return s;
  });
}

// --- AP table CSV -------------------------------------------------------------------

inline std::string ap_table_csv(const std::vector<ApEntry>& rows) {
  std::string out = "method,metric,threshold,ap,num_windows,num_failures\n";
  for (const auto& r : rows)
    out += r.method + "," + std::string(to_string(r.metric)) + "," + format_double(r.threshold) + "," +
           format_double(r.ap) + "," + std::to_string(r.num_windows) + "," + std::to_string(r.num_failures) + "\n";
  return out;
}

inline std::vector<ApEntry> ap_table_from_csv(const std::string& text) {
  std::vector<ApEntry> rows;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line != "method,metric,threshold,ap,num_windows,num_failures")
    fail(ErrorCode::kParseError, "unexpected AP table header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) fail(ErrorCode::kParseError, "AP table rows need 6 columns");
    try {
      rows.push_back({cells[0], metric_from_string(cells[1]), std::stod(cells[2]), std::stod(cells[3]),
                      static_cast<std::size_t>(std::stoull(cells[4])), static_cast<std::size_t>(std::stoull(cells[5]))});
    } catch (const std::logic_error&) {
      fail(ErrorCode::kParseError, "malformed AP table row");
    }
  }
  return rows;
}

}  // namespace posebench::io

#endif  // POSEBENCH_IO_HPP
