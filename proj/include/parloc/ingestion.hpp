#pragma once

// Whitespace-separated text formats ('#' starts a comment line):
//
//   landmarks : id x y z ndesc D v_1 .. v_(ndesc*D)
//   frames    : id G g_1 .. g_G nvis lm_1 .. lm_nvis
//   queries   : query id fx fy cx cy k1 k2 nkp G g_1 .. g_G
//               followed by nkp lines: u v orientation scale D v_1 .. v_D
//   results   : query_id status tx ty tz qw qx qy qz inliers
//   truth     : query_id tx ty tz qw qx qy qz
//   model     : key value lines (mu, sigma, degenerate)
//
// Poses are world-to-camera. Binary descriptors are never stored; they are
// recomputed from the real values on load. Writers emit the shortest
// round-trip decimal form, so writing a loaded canonical file reproduces it
// byte for byte. Poses are the exception: quaternions pass through a rotation
// matrix and may move in the last digit.

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "parloc/core_types.hpp"
#include "parloc/error.hpp"
#include "parloc/map_database.hpp"
#include "parloc/pose_solver.hpp"
#include "parloc/rtree_index.hpp"
#include "parloc/text_io.hpp"

namespace parloc {

inline constexpr const char* kLandmarksHeader = "# parloc landmarks: id x y z ndesc D values...";
inline constexpr const char* kFramesHeader = "# parloc frames: id G values... nvis landmark_ids...";
inline constexpr const char* kQueriesHeader =
    "# parloc queries: query id fx fy cx cy k1 k2 nkp G values... / u v orientation scale D values...";
inline constexpr const char* kResultsHeader =
    "# parloc results: query_id status tx ty tz qw qx qy qz inliers";
inline constexpr const char* kTruthHeader = "# parloc ground truth: query_id tx ty tz qw qx qy qz";

namespace detail {

inline void append_values(std::string& out, std::span<const double> values) {
  for (double v : values) {
    out += ' ';
    append_number(out, v);
  }
}

template <class Vec>
Vec read_unit_vector(LineTokens& tok, std::size_t n) {
  std::vector<double> values(n);
  for (double& v : values) v = tok.real();
  try {
    return Vec(std::move(values));
  } catch (const Error& e) {
    tok.error(e.what());
  }
}

}  // namespace detail

// --- landmarks / frames ----------------------------------------------------------

inline std::vector<LandmarkRecord> read_landmarks(std::istream& in, const std::string& name) {
  std::vector<LandmarkRecord> out;
  DataLines lines(in, name);
  std::string line;
  std::size_t dim = 0;
  while (lines.next(line)) {
    LineTokens tok(line, lines.where());
    LandmarkRecord lm;
    lm.id = tok.integer();
    lm.position = Vec3{tok.real(), tok.real(), tok.real()};
    const std::uint64_t ndesc = tok.integer();
    const std::uint64_t d = tok.integer();
    if (ndesc == 0) tok.error("landmark " + std::to_string(lm.id) + " has no descriptors");
    if (d == 0) tok.error("descriptor dimension is zero");
    if (dim == 0) dim = d;
    if (d != dim) {
      fail(ErrorKind::kDimension, lines.where() + ": descriptor dimension " + std::to_string(d) +
                                      " differs from earlier " + std::to_string(dim));
    }
    for (std::uint64_t k = 0; k < ndesc; ++k) {
      lm.descriptors.push_back(DescriptorPair::from_real(detail::read_unit_vector<RealDescriptor>(tok, d)));
    }
    tok.expect_end();
    out.push_back(std::move(lm));
  }
  return out;
}

inline std::vector<FrameRecord> read_frames(std::istream& in, const std::string& name) {
  std::vector<FrameRecord> out;
  DataLines lines(in, name);
  std::string line;
  std::size_t dim = 0;
  while (lines.next(line)) {
    LineTokens tok(line, lines.where());
    FrameRecord f;
    f.id = tok.integer();
    const std::uint64_t g = tok.integer();
    if (g == 0) tok.error("global descriptor dimension is zero");
    if (dim == 0) dim = g;
    if (g != dim) {
      fail(ErrorKind::kDimension, lines.where() + ": global dimension " + std::to_string(g) +
                                      " differs from earlier " + std::to_string(dim));
    }
    f.global_descriptor = detail::read_unit_vector<GlobalDescriptor>(tok, g);
    const std::uint64_t nvis = tok.integer();
    f.visible_landmarks.resize(nvis);
    for (auto& id : f.visible_landmarks) id = tok.integer();
    tok.expect_end();
    out.push_back(std::move(f));
  }
  return out;
}

inline std::string format_landmarks(const MapDatabase& db) {
  std::string out = kLandmarksHeader;
  out += '\n';
  for (const auto& lm : db.landmarks()) {
    append_number(out, lm.id);
    for (double v : {lm.position.x, lm.position.y, lm.position.z}) {
      out += ' ';
      append_number(out, v);
    }
    out += ' ';
    append_number(out, static_cast<std::uint64_t>(lm.descriptors.size()));
    out += ' ';
    append_number(out, static_cast<std::uint64_t>(db.local_dim()));
    for (const auto& d : lm.descriptors) detail::append_values(out, d.real.values());
    out += '\n';
  }
  return out;
}

inline std::string format_frames(const MapDatabase& db) {
  std::string out = kFramesHeader;
  out += '\n';
  for (const auto& f : db.frames()) {
    append_number(out, f.id);
    out += ' ';
    append_number(out, static_cast<std::uint64_t>(f.global_descriptor.size()));
    detail::append_values(out, f.global_descriptor.values());
    out += ' ';
    append_number(out, static_cast<std::uint64_t>(f.visible_landmarks.size()));
    for (LandmarkId id : f.visible_landmarks) {
      out += ' ';
      append_number(out, id);
    }
    out += '\n';
  }
  return out;
}

inline MapDatabase load_map(const std::string& landmarks_path, const std::string& frames_path) {
  auto lin = open_input(landmarks_path);
  auto landmarks = read_landmarks(lin, landmarks_path);
  auto fin = open_input(frames_path);
  auto frames = read_frames(fin, frames_path);
  return MapDatabase::build(std::move(landmarks), std::move(frames));
}

inline void save_map(const MapDatabase& db, const std::string& landmarks_path,
                     const std::string& frames_path) {
  write_text_file(landmarks_path, format_landmarks(db));
  write_text_file(frames_path, format_frames(db));
}

// --- queries -------------------------------------------------------------------------

struct QueryImage {
  std::uint64_t id = 0;
  CameraIntrinsics intrinsics;
  GlobalDescriptor global;
  std::vector<QueryKeypoint> keypoints;
};

inline std::vector<QueryImage> read_queries(std::istream& in, const std::string& name) {
  std::vector<QueryImage> out;
  DataLines lines(in, name);
  std::string line;
  while (lines.next(line)) {
    LineTokens head(line, lines.where());
    if (head.word() != "query") head.error("expected a 'query' header line");
    QueryImage q;
    q.id = head.integer();
    q.intrinsics = CameraIntrinsics{head.real(), head.real(), head.real(),
                                    head.real(), head.real(), head.real()};
    if (!(q.intrinsics.fx > 0.0) || !(q.intrinsics.fy > 0.0)) head.error("fx and fy must be > 0");
    const std::uint64_t nkp = head.integer();
    const std::uint64_t g = head.integer();
    if (g == 0) head.error("global descriptor dimension is zero");
    q.global = detail::read_unit_vector<GlobalDescriptor>(head, g);
    head.expect_end();
    for (std::uint64_t k = 0; k < nkp; ++k) {
      if (!lines.next(line)) {
        fail(ErrorKind::kParse, lines.where() + ": query " + std::to_string(q.id) + " expects " +
                                    std::to_string(nkp) + " keypoint lines");
      }
      LineTokens tok(line, lines.where());
      QueryKeypoint kp;
      kp.pixel = Pixel{tok.real(), tok.real()};
      kp.orientation = tok.real();
      kp.scale = tok.real();
      if (!(kp.scale > 0.0)) tok.error("keypoint scale must be > 0");
      const std::uint64_t d = tok.integer();
      if (d == 0) tok.error("descriptor dimension is zero");
      kp.descriptor = DescriptorPair::from_real(detail::read_unit_vector<RealDescriptor>(tok, d));
      tok.expect_end();
      q.keypoints.push_back(std::move(kp));
    }
    out.push_back(std::move(q));
  }
  return out;
}

inline std::string format_queries(std::span<const QueryImage> queries) {
  std::string out = kQueriesHeader;
  out += '\n';
  for (const auto& q : queries) {
    out += "query ";
    append_number(out, q.id);
    const auto& k = q.intrinsics;
    detail::append_values(out, std::vector<double>{k.fx, k.fy, k.cx, k.cy, k.k1, k.k2});
    out += ' ';
    append_number(out, static_cast<std::uint64_t>(q.keypoints.size()));
    out += ' ';
    append_number(out, static_cast<std::uint64_t>(q.global.size()));
    detail::append_values(out, q.global.values());
    out += '\n';
    for (const auto& kp : q.keypoints) {
      append_number(out, kp.pixel.u);
      detail::append_values(out, std::vector<double>{kp.pixel.v, kp.orientation, kp.scale});
      out += ' ';
      append_number(out, static_cast<std::uint64_t>(kp.descriptor.real.size()));
      detail::append_values(out, kp.descriptor.real.values());
      out += '\n';
    }
  }
  return out;
}

inline std::vector<QueryImage> load_queries(const std::string& path) {
  auto in = open_input(path);
  return read_queries(in, path);
}

// --- results / ground truth ---------------------------------------------------------------

struct ResultRecord {
  std::uint64_t query_id = 0;
  LocalizationStatus status = LocalizationStatus::kInsufficientMatches;
  CameraPose pose;  // meaningful only when status is ok
  std::size_t inliers = 0;
};

namespace detail {

inline void append_pose(std::string& out, const CameraPose& pose) {
  Eigen::Quaterniond q(pose.rotation);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  append_values(out, std::vector<double>{pose.translation.x(), pose.translation.y(),
                                         pose.translation.z(), q.w(), q.x(), q.y(), q.z()});
}

inline CameraPose read_pose(LineTokens& tok) {
  CameraPose pose;
  const double tx = tok.real(), ty = tok.real(), tz = tok.real();
  pose.translation = Eigen::Vector3d(tx, ty, tz);
  const double w = tok.real(), x = tok.real(), y = tok.real(), z = tok.real();
  Eigen::Quaterniond q(w, x, y, z);
  if (!(q.norm() > 0.5)) tok.error("rotation quaternion is not unit length");
  pose.rotation = q.normalized().toRotationMatrix();
  return pose;
}

inline LocalizationStatus parse_status(LineTokens& tok) {
  const std::string_view s = tok.word();
  if (s == "ok") return LocalizationStatus::kOk;
  if (s == "insufficient_matches") return LocalizationStatus::kInsufficientMatches;
  if (s == "ransac_failed") return LocalizationStatus::kRansacFailed;
  tok.error("unknown status '" + std::string(s) + "'");
}

}  // namespace detail

inline std::string format_result_line(const ResultRecord& r) {
  std::string out;
  append_number(out, r.query_id);
  out += ' ';
  out += to_string(r.status);
  if (r.status == LocalizationStatus::kOk) {
    detail::append_pose(out, r.pose);
  } else {
    out += " 0 0 0 1 0 0 0";
  }
  out += ' ';
  append_number(out, static_cast<std::uint64_t>(r.inliers));
  out += '\n';
  return out;
}

inline std::string format_results(std::span<const ResultRecord> results) {
  std::string out = kResultsHeader;
  out += '\n';
  for (const auto& r : results) out += format_result_line(r);
  return out;
}

inline std::vector<ResultRecord> read_results(std::istream& in, const std::string& name) {
  std::vector<ResultRecord> out;
  DataLines lines(in, name);
  std::string line;
  while (lines.next(line)) {
    LineTokens tok(line, lines.where());
    ResultRecord r;
    r.query_id = tok.integer();
    r.status = detail::parse_status(tok);
    r.pose = detail::read_pose(tok);
    r.inliers = tok.integer();
    tok.expect_end();
    out.push_back(r);
  }
  return out;
}

inline std::string format_ground_truth(const std::map<std::uint64_t, CameraPose>& truth) {
  std::string out = kTruthHeader;
  out += '\n';
  for (const auto& [id, pose] : truth) {
    append_number(out, id);
    detail::append_pose(out, pose);
    out += '\n';
  }
  return out;
}

inline std::map<std::uint64_t, CameraPose> read_ground_truth(std::istream& in,
                                                             const std::string& name) {
  std::map<std::uint64_t, CameraPose> out;
  DataLines lines(in, name);
  std::string line;
  while (lines.next(line)) {
    LineTokens tok(line, lines.where());
    const std::uint64_t id = tok.integer();
    CameraPose pose = detail::read_pose(tok);
    tok.expect_end();
    if (!out.emplace(id, pose).second) tok.error("duplicate query id " + std::to_string(id));
  }
  return out;
}

// --- perturbation model sidecar -------------------------------------------------------------

inline std::string format_model(const PerturbationModel& m) {
  std::string out = "# parloc perturbation model\nmu ";
  append_number(out, m.mu);
  out += "\nsigma ";
  append_number(out, m.sigma);
  out += "\ndegenerate ";
  out += m.degenerate ? "1" : "0";
  out += '\n';
  return out;
}

inline PerturbationModel read_model(std::istream& in, const std::string& name) {
  PerturbationModel m;
  bool have_mu = false, have_sigma = false;
  DataLines lines(in, name);
  std::string line;
  while (lines.next(line)) {
    LineTokens tok(line, lines.where());
    const std::string key(tok.word());
    if (key == "mu") {
      m.mu = tok.real();
      have_mu = true;
    } else if (key == "sigma") {
      m.sigma = tok.real();
      have_sigma = true;
    } else if (key == "degenerate") {
      m.degenerate = tok.integer() != 0;
    } else {
      tok.error("unknown model key '" + key + "'");
    }
    tok.expect_end();
  }
  if (!have_mu || !have_sigma) fail(ErrorKind::kParse, name + ": model needs mu and sigma");
  m.validate();
  return m;
}

}  // namespace parloc
