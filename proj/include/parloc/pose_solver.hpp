#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "parloc/error.hpp"

namespace parloc {

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double k1 = 0.0;  // radial distortion, r^2 term
  double k2 = 0.0;  // radial distortion, r^4 term

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) fail(ErrorKind::kInvalidArgument, "intrinsics need fx, fy > 0");
  }
};

/// World-to-camera rigid transform: x_cam = rotation * x_world + translation.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }
  Eigen::Vector3d to_camera(const Eigen::Vector3d& x) const { return rotation * x + translation; }
};

/// One 2D observation paired with a 3D map point.
struct PointMatch {
  Eigen::Vector2d pixel;
  Eigen::Vector3d point;
};

// --- projection ----------------------------------------------------------------

namespace detail {

inline Eigen::Vector2d distort(const CameraIntrinsics& k, const Eigen::Vector2d& xy) {
  const double r2 = xy.squaredNorm();
  return xy * (1.0 + k.k1 * r2 + k.k2 * r2 * r2);
}

inline Eigen::Vector2d to_pixel(const CameraIntrinsics& k, const Eigen::Vector2d& xy) {
  const Eigen::Vector2d d = distort(k, xy);
  return {k.fx * d.x() + k.cx, k.fy * d.y() + k.cy};
}

}  // namespace detail

/// Pinhole projection with optional radial distortion.
inline Eigen::Vector2d project(const CameraPose& pose, const CameraIntrinsics& intrinsics,
                               const Eigen::Vector3d& point) {
  const Eigen::Vector3d xc = pose.to_camera(point);
  if (!(xc.z() > 0.0)) fail(ErrorKind::kGeometry, "project: point has nonpositive depth");
  return detail::to_pixel(intrinsics, xc.head<2>() / xc.z());
}

/// Normalized image coordinates of a pixel (distortion inverted by
/// fixed-point iteration).
inline Eigen::Vector2d normalize_pixel(const CameraIntrinsics& k, const Eigen::Vector2d& pixel) {
  const Eigen::Vector2d distorted((pixel.x() - k.cx) / k.fx, (pixel.y() - k.cy) / k.fy);
  if (k.k1 == 0.0 && k.k2 == 0.0) return distorted;
  Eigen::Vector2d xy = distorted;
  for (int i = 0; i < 50; ++i) {
    const double r2 = xy.squaredNorm();
    xy = distorted / (1.0 + k.k1 * r2 + k.k2 * r2 * r2);
  }
  return xy;
}

inline Eigen::Vector3d bearing(const CameraIntrinsics& k, const Eigen::Vector2d& pixel) {
  const Eigen::Vector2d xy = normalize_pixel(k, pixel);
  return Eigen::Vector3d(xy.x(), xy.y(), 1.0).normalized();
}

/// Squared pixel reprojection error; +inf behind the camera.
inline double reprojection_error_sq(const CameraPose& pose, const CameraIntrinsics& k,
                                    const PointMatch& m) {
  const Eigen::Vector3d xc = pose.to_camera(m.point);
  if (!(xc.z() > 0.0)) return std::numeric_limits<double>::infinity();
  return (detail::to_pixel(k, xc.head<2>() / xc.z()) - m.pixel).squaredNorm();
}

// --- polynomial roots --------------------------------------------------------------

/// Real roots of sum_i coeffs[i] x^i (ascending order), via companion-matrix
/// eigenvalues followed by Newton polishing.
inline std::vector<double> real_polynomial_roots(std::vector<double> coeffs) {
  double scale = 0.0;
  for (double c : coeffs) scale = std::max(scale, std::abs(c));
  if (scale == 0.0) return {};
  while (coeffs.size() > 1 && std::abs(coeffs.back()) <= 1e-14 * scale) coeffs.pop_back();
  const std::size_t degree = coeffs.size() - 1;
  if (degree == 0) return {};

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(degree),
                                                    static_cast<Eigen::Index>(degree));
  for (std::size_t i = 0; i < degree; ++i) {
    companion(0, static_cast<Eigen::Index>(i)) = -coeffs[degree - 1 - i] / coeffs[degree];
    if (i + 1 < degree) companion(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(i)) = 1.0;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  const auto eig = solver.eigenvalues();

  auto eval = [&](double x, double& deriv) {
    double p = 0.0;
    deriv = 0.0;
    for (std::size_t i = coeffs.size(); i-- > 0;) {
      deriv = deriv * x + p;
      p = p * x + coeffs[i];
    }
    return p;
  };

  std::vector<double> roots;
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    const std::complex<double> z = eig[i];
    if (std::abs(z.imag()) > 1e-6 * (1.0 + std::abs(z.real()))) continue;
    double x = z.real();
    for (int it = 0; it < 8; ++it) {
      double d = 0.0;
      const double p = eval(x, d);
      if (d == 0.0) break;
      const double step = p / d;
      x -= step;
      if (std::abs(step) <= 1e-15 * (1.0 + std::abs(x))) break;
    }
    roots.push_back(x);
  }
  return roots;
}

// --- minimal solver ------------------------------------------------------------------

namespace detail {

inline bool collinear(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  const Eigen::Vector3d ab = b - a;
  const Eigen::Vector3d ac = c - a;
  const double scale = std::max(ab.squaredNorm(), ac.squaredNorm());
  if (scale == 0.0) return true;
  return ab.cross(ac).norm() <= 1e-9 * scale;
}

// Rigid transform mapping `world` onto `camera` (least squares, det = +1).
inline CameraPose align_points(const Eigen::Matrix3d& world, const Eigen::Matrix3d& camera) {
  const Eigen::Vector3d wc = world.rowwise().mean();
  const Eigen::Vector3d cc = camera.rowwise().mean();
  const Eigen::Matrix3d h = (world.colwise() - wc) * (camera.colwise() - cc).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  CameraPose pose;
  pose.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  pose.translation = cc - pose.rotation * wc;
  return pose;
}

// Polynomial helpers in ascending coefficient order.
inline std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

inline std::vector<double> poly_axpy(double alpha, const std::vector<double>& x,
                                     std::vector<double> y) {
  if (y.size() < x.size()) y.resize(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
  return y;
}

}  // namespace detail

/// Grunert's three-point solution. With s2 = u*s1, s3 = v*s1 the law of
/// cosines on the three point pairs reduces to a quartic in v. Returns up to
/// four poses; empty for degenerate input.
inline std::vector<CameraPose> solve_p3p(const std::array<Eigen::Vector3d, 3>& bearings,
                                         const std::array<Eigen::Vector3d, 3>& points) {
  if (detail::collinear(points[0], points[1], points[2])) return {};
  const double a2 = (points[1] - points[2]).squaredNorm();
  const double b2 = (points[0] - points[2]).squaredNorm();
  const double c2 = (points[0] - points[1]).squaredNorm();
  const double cos_alpha = bearings[1].dot(bearings[2]);
  const double cos_beta = bearings[0].dot(bearings[2]);
  const double cos_gamma = bearings[0].dot(bearings[1]);

  const double ac = (a2 - c2) / b2;
  const double cb = c2 / b2;
  // u(v) = num(v) / den(v)
  const std::vector<double> num = {1.0 + ac, -2.0 * ac * cos_beta, ac - 1.0};
  const std::vector<double> den = {2.0 * cos_gamma, -2.0 * cos_alpha};
  const std::vector<double> side = {1.0, -2.0 * cos_beta, 1.0};  // 1 + v^2 - 2 v cos(beta)
  // den^2 + num^2 - 2 cos(gamma) num den - (c^2/b^2) side den^2 = 0
  const std::vector<double> den2 = detail::poly_mul(den, den);
  std::vector<double> quartic = detail::poly_mul(num, num);
  quartic = detail::poly_axpy(1.0, den2, quartic);
  quartic = detail::poly_axpy(-2.0 * cos_gamma, detail::poly_mul(num, den), quartic);
  quartic = detail::poly_axpy(-cb, detail::poly_mul(side, den2), quartic);

  std::vector<CameraPose> poses;
  for (double v : real_polynomial_roots(quartic)) {
    if (!(v > 0.0)) continue;
    const double d = den[0] + den[1] * v;
    if (std::abs(d) < 1e-12) continue;
    const double u = (num[0] + num[1] * v + num[2] * v * v) / d;
    if (!(u > 0.0)) continue;
    const double denom1 = 1.0 + v * v - 2.0 * v * cos_beta;
    if (!(denom1 > 0.0)) continue;
    const double s1 = std::sqrt(b2 / denom1);
    Eigen::Matrix3d cam;
    Eigen::Matrix3d world;
    cam.col(0) = s1 * bearings[0];
    cam.col(1) = u * s1 * bearings[1];
    cam.col(2) = v * s1 * bearings[2];
    for (int i = 0; i < 3; ++i) world.col(i) = points[static_cast<std::size_t>(i)];
    poses.push_back(detail::align_points(world, cam));
    if (poses.size() == 4) break;
  }
  return poses;
}

struct MinimalPnpResult {
  std::vector<CameraPose> candidates;  // at most 4
  CameraPose best;
};

namespace detail {

inline std::optional<MinimalPnpResult> minimal_pnp_impl(std::span<const PointMatch, 4> matches,
                                                        const CameraIntrinsics& k) {
  std::array<Eigen::Vector3d, 3> bearings;
  std::array<Eigen::Vector3d, 3> points;
  for (std::size_t i = 0; i < 3; ++i) {
    bearings[i] = bearing(k, matches[i].pixel);
    points[i] = matches[i].point;
  }
  MinimalPnpResult result;
  result.candidates = solve_p3p(bearings, points);
  if (result.candidates.empty()) return std::nullopt;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_index = 0;
  for (std::size_t i = 0; i < result.candidates.size(); ++i) {
    const double e = reprojection_error_sq(result.candidates[i], k, matches[3]);
    if (e < best) {
      best = e;
      best_index = i;
    }
  }
  result.best = result.candidates[best_index];
  return result;
}

}  // namespace detail

/// P3P on the first three matches; the fourth picks the candidate with the
/// smallest reprojection error.
inline MinimalPnpResult minimal_pnp(std::span<const PointMatch, 4> matches,
                                    const CameraIntrinsics& intrinsics) {
  intrinsics.validate();
  if (detail::collinear(matches[0].point, matches[1].point, matches[2].point)) {
    fail(ErrorKind::kGeometry, "minimal_pnp: degenerate (collinear or coincident) 3D points");
  }
  auto r = detail::minimal_pnp_impl(matches, intrinsics);
  if (!r) fail(ErrorKind::kGeometry, "minimal_pnp: no real solution");
  return *std::move(r);
}

// --- refinement ------------------------------------------------------------------------

inline double total_reprojection_error_sq(const CameraPose& pose, const CameraIntrinsics& k,
                                          std::span<const PointMatch> matches,
                                          std::span<const std::size_t> subset) {
  double s = 0.0;
  for (std::size_t i : subset) s += reprojection_error_sq(pose, k, matches[i]);
  return s;
}

struct RefineStats {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
};

/// Gauss-Newton on squared pixel reprojection error over `subset`, with a
/// left-multiplied rotation update. Steps that do not lower the cost are
/// halved, so the cost never increases. Stops after `max_iterations` or when
/// the step norm falls below `min_step`.
inline CameraPose refine_pose(const CameraPose& initial, const CameraIntrinsics& k,
                              std::span<const PointMatch> matches,
                              std::span<const std::size_t> subset, RefineStats* stats = nullptr,
                              int max_iterations = 20, double min_step = 1e-10) {
  CameraPose pose = initial;
  double cost = total_reprojection_error_sq(pose, k, matches, subset);
  const double initial_cost = cost;
  if (stats) stats->initial_cost = cost;
  int it = 0;
  for (; it < max_iterations && std::isfinite(cost); ++it) {
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t i : subset) {
      const Eigen::Vector3d xc = pose.to_camera(matches[i].point);
      const double z = xc.z();
      const Eigen::Vector2d xy = xc.head<2>() / z;
      const double r2 = xy.squaredNorm();
      const double f = 1.0 + k.k1 * r2 + k.k2 * r2 * r2;
      const double fp = k.k1 + 2.0 * k.k2 * r2;
      Eigen::Matrix2d d_dist;
      d_dist << f + 2.0 * xy.x() * xy.x() * fp, 2.0 * xy.x() * xy.y() * fp,
          2.0 * xy.x() * xy.y() * fp, f + 2.0 * xy.y() * xy.y() * fp;
      Eigen::Matrix<double, 2, 3> d_proj;
      d_proj << 1.0 / z, 0.0, -xc.x() / (z * z), 0.0, 1.0 / z, -xc.y() / (z * z);
      const Eigen::Matrix<double, 2, 3> d_cam =
          Eigen::Vector2d(k.fx, k.fy).asDiagonal() * d_dist * d_proj;
      Eigen::Matrix<double, 3, 6> d_param;
      d_param.leftCols<3>() << 0.0, xc.z(), -xc.y(), -xc.z(), 0.0, xc.x(), xc.y(), -xc.x(), 0.0;
      d_param.rightCols<3>().setIdentity();
      const Eigen::Matrix<double, 2, 6> j = d_cam * d_param;
      const Eigen::Vector2d r = detail::to_pixel(k, xy) - matches[i].pixel;
      h += j.transpose() * j;
      g += j.transpose() * r;
    }
    Eigen::Matrix<double, 6, 1> step = -h.ldlt().solve(g);
    if (!step.allFinite()) break;

    bool improved = false;
    for (int halving = 0; halving < 12; ++halving) {
      const Eigen::Vector3d w = step.head<3>();
      const double angle = w.norm();
      const Eigen::Matrix3d dr =
          angle > 0.0 ? Eigen::AngleAxisd(angle, w / angle).toRotationMatrix()
                      : Eigen::Matrix3d::Identity();
      CameraPose trial;
      trial.rotation = dr * pose.rotation;
      trial.translation = dr * pose.translation + step.tail<3>();
      const double trial_cost = total_reprojection_error_sq(trial, k, matches, subset);
      if (trial_cost < cost) {
        pose = trial;
        cost = trial_cost;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved || step.norm() < min_step) {
      ++it;
      break;
    }
  }
  // Re-orthonormalize to keep R^T R = I to machine precision.
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(pose.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  pose.rotation = svd.matrixU() * svd.matrixV().transpose();
  double final_cost = total_reprojection_error_sq(pose, k, matches, subset);
  if (!(final_cost <= initial_cost)) {
    pose = initial;
    final_cost = initial_cost;
  }
  if (stats) {
    stats->iterations = it;
    stats->final_cost = final_cost;
  }
  return pose;
}

// --- RANSAC ---------------------------------------------------------------------------

enum class LocalizationStatus { kOk, kInsufficientMatches, kRansacFailed };

inline const char* to_string(LocalizationStatus s) {
  switch (s) {
    case LocalizationStatus::kOk: return "ok";
    case LocalizationStatus::kInsufficientMatches: return "insufficient_matches";
    case LocalizationStatus::kRansacFailed: return "ransac_failed";
  }
  return "unknown";
}

struct LocalizationResult {
  std::optional<CameraPose> pose;
  std::vector<std::size_t> inlier_indices;  // ascending
  std::size_t iterations_used = 0;
  LocalizationStatus status = LocalizationStatus::kInsufficientMatches;
};

struct RansacParams {
  double inlier_threshold_px = 8.0;
  std::size_t max_iterations = 10000;
  double confidence = 0.9999;
  std::size_t min_inliers = 12;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(inlier_threshold_px > 0.0)) fail(ErrorKind::kConfig, "inlier threshold must be > 0");
    if (max_iterations < 1) fail(ErrorKind::kConfig, "max_iterations must be >= 1");
    if (!(confidence > 0.0 && confidence < 1.0)) fail(ErrorKind::kConfig, "confidence must be in (0, 1)");
    if (min_inliers < 4) fail(ErrorKind::kConfig, "min_inliers must be >= 4");
  }
};

namespace detail {

inline std::vector<std::size_t> collect_inliers(const CameraPose& pose, const CameraIntrinsics& k,
                                                std::span<const PointMatch> matches,
                                                double threshold_sq) {
  std::vector<std::size_t> inliers;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (reprojection_error_sq(pose, k, matches[i]) <= threshold_sq) inliers.push_back(i);
  }
  return inliers;
}

inline std::size_t adaptive_iterations(std::size_t inliers, std::size_t total, double confidence,
                                       std::size_t cap) {
  const double w = static_cast<double>(inliers) / static_cast<double>(total);
  const double p_good = std::pow(w, 4.0);
  if (p_good >= 1.0) return 1;
  if (p_good <= 0.0) return cap;
  const double n = std::log(1.0 - confidence) / std::log(1.0 - p_good);
  if (!std::isfinite(n) || n >= static_cast<double>(cap)) return cap;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(n)));
}

}  // namespace detail

/// RANSAC over 4-point samples (P3P + disambiguation), adaptive stopping from
/// the best inlier ratio, then Gauss-Newton refinement on the inliers with
/// re-classification until the inlier set is stable.
inline LocalizationResult ransac_pnp(std::span<const PointMatch> matches,
                                     const CameraIntrinsics& intrinsics,
                                     const RansacParams& params) {
  intrinsics.validate();
  params.validate();
  LocalizationResult result;
  if (matches.size() < 4) {
    result.status = LocalizationStatus::kInsufficientMatches;
    return result;
  }

  const double threshold_sq = params.inlier_threshold_px * params.inlier_threshold_px;
  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<std::size_t> pick(0, matches.size() - 1);

  std::optional<CameraPose> best_pose;
  std::size_t best_count = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  std::size_t needed = params.max_iterations;
  std::size_t it = 0;
  for (; it < needed; ++it) {
    std::array<std::size_t, 4> idx{};
    for (std::size_t s = 0; s < 4; ++s) {
      std::size_t candidate;
      do {
        candidate = pick(rng);
      } while (std::find(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(s), candidate) !=
               idx.begin() + static_cast<std::ptrdiff_t>(s));
      idx[s] = candidate;
    }
    const std::array<PointMatch, 4> sample = {matches[idx[0]], matches[idx[1]], matches[idx[2]],
                                              matches[idx[3]]};
    auto minimal = detail::minimal_pnp_impl(std::span<const PointMatch, 4>(sample), intrinsics);
    if (!minimal) continue;

    std::size_t count = 0;
    double cost = 0.0;
    for (const auto& m : matches) {
      const double e = reprojection_error_sq(minimal->best, intrinsics, m);
      if (e <= threshold_sq) {
        ++count;
        cost += e;
      }
    }
    if (count > best_count || (count == best_count && count > 0 && cost < best_cost)) {
      best_count = count;
      best_cost = cost;
      best_pose = minimal->best;
      needed = std::min(params.max_iterations,
                        detail::adaptive_iterations(count, matches.size(), params.confidence,
                                                    params.max_iterations));
    }
  }
  result.iterations_used = it;

  if (!best_pose || best_count < params.min_inliers) {
    result.status = LocalizationStatus::kRansacFailed;
    return result;
  }

  CameraPose pose = *best_pose;
  std::vector<std::size_t> inliers = detail::collect_inliers(pose, intrinsics, matches, threshold_sq);
  for (int round = 0; round < 4; ++round) {
    pose = refine_pose(pose, intrinsics, matches, inliers);
    std::vector<std::size_t> next = detail::collect_inliers(pose, intrinsics, matches, threshold_sq);
    if (next == inliers) break;
    if (next.size() < params.min_inliers) break;
    inliers = std::move(next);
  }
  if (inliers.size() < params.min_inliers) {
    result.status = LocalizationStatus::kRansacFailed;
    return result;
  }
  result.pose = pose;
  result.inlier_indices = std::move(inliers);
  result.status = LocalizationStatus::kOk;
  return result;
}

// --- evaluation ------------------------------------------------------------------------

struct PoseError {
  double translation_m = 0.0;
  double rotation_deg = 0.0;
};

/// Camera-center distance and the angle of R_gt^T R_est. The angle is
/// computed as atan2(|sin|, cos) rather than arccos of the trace so it stays
/// accurate for tiny rotations.
inline PoseError pose_error(const CameraPose& estimated, const CameraPose& ground_truth) {
  PoseError e;
  e.translation_m = (estimated.center() - ground_truth.center()).norm();
  const Eigen::Matrix3d d = ground_truth.rotation.transpose() * estimated.rotation;
  const double cos_angle = 0.5 * (d.trace() - 1.0);
  const Eigen::Vector3d axis(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  const double sin_angle = 0.5 * axis.norm();
  e.rotation_deg = std::atan2(sin_angle, cos_angle) * 180.0 / std::numbers::pi;
  return e;
}

struct RecallThreshold {
  double translation_m;
  double rotation_deg;
};

inline std::vector<RecallThreshold> default_recall_thresholds() {
  return {{0.25, 2.0}, {0.5, 5.0}, {5.0, 10.0}};
}

/// Percentage of queries localized within each (translation, rotation)
/// bound. Queries without a pose count as failures. The id sets must agree.
inline std::vector<double> recall_at_thresholds(
    const std::map<std::uint64_t, std::optional<CameraPose>>& results,
    const std::map<std::uint64_t, CameraPose>& ground_truths,
    std::span<const RecallThreshold> thresholds) {
  for (const auto& [id, pose] : results) {
    if (!ground_truths.contains(id)) {
      fail(ErrorKind::kIntegrity, "no ground truth for query " + std::to_string(id));
    }
  }
  for (const auto& [id, pose] : ground_truths) {
    if (!results.contains(id)) fail(ErrorKind::kIntegrity, "no result for query " + std::to_string(id));
  }
  std::vector<double> recall(thresholds.size(), 0.0);
  if (ground_truths.empty()) return recall;
  for (const auto& [id, pose] : results) {
    if (!pose) continue;
    const PoseError e = pose_error(*pose, ground_truths.at(id));
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      if (e.translation_m <= thresholds[t].translation_m &&
          e.rotation_deg <= thresholds[t].rotation_deg) {
        recall[t] += 1.0;
      }
    }
  }
  for (double& r : recall) r *= 100.0 / static_cast<double>(ground_truths.size());
  return recall;
}

}  // namespace parloc
