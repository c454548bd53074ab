#pragma once

// Seeded generators for synthetic maps, queries and images. Used by the test
// suites, the `synth` and `selftest` commands, and the sweep fixture.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "parloc/core_types.hpp"
#include "parloc/image.hpp"
#include "parloc/ingestion.hpp"
#include "parloc/localizer.hpp"
#include "parloc/pose_solver.hpp"

namespace parloc::synth {

using Rng = std::mt19937_64;

inline std::vector<double> gaussian_vector(std::size_t dim, double sigma, Rng& rng) {
  std::normal_distribution<double> n(0.0, sigma);
  std::vector<double> v(dim);
  for (double& x : v) x = n(rng);
  return v;
}

inline std::vector<double> random_unit_values(std::size_t dim, Rng& rng) {
  std::vector<double> v;
  double norm = 0.0;
  while (norm < 1e-6) {
    v = gaussian_vector(dim, 1.0, rng);
    norm = std::sqrt(detail::squared_norm(v));
  }
  for (double& x : v) x /= norm;
  return v;
}

template <class Vec = RealDescriptor>
Vec random_unit(std::size_t dim, Rng& rng) {
  return Vec::normalize(random_unit_values(dim, rng));
}

/// Adds N(mu, sigma^2) to every element and renormalizes.
template <class Vec>
Vec perturb(const Vec& v, double sigma, Rng& rng, double mu = 0.0) {
  std::normal_distribution<double> n(mu, sigma);
  std::vector<double> out(v.values().begin(), v.values().end());
  for (double& x : out) x += n(rng);
  return Vec::normalize(std::move(out));
}

/// Rotation by `angle` radians about a random axis.
inline Eigen::Matrix3d random_rotation(double angle, Rng& rng) {
  const auto axis = random_unit_values(3, rng);
  return Eigen::AngleAxisd(angle, Eigen::Vector3d(axis[0], axis[1], axis[2])).toRotationMatrix();
}

inline CameraPose pose_from_center(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& center) {
  return CameraPose{rotation, -rotation * center};
}

// --- PnP problems ---------------------------------------------------------------------------

struct PnpProblem {
  CameraIntrinsics intrinsics;
  CameraPose truth;
  std::vector<PointMatch> matches;
  std::vector<bool> is_inlier;
};

/// Points in front of a random camera, projected with `noise_px` Gaussian
/// pixel noise; outliers get a uniformly random pixel in the image.
inline PnpProblem pnp_problem(std::size_t inliers, std::size_t outliers, double noise_px,
                              std::uint64_t seed, bool distortion = false) {
  Rng rng(seed);
  PnpProblem p;
  p.intrinsics = CameraIntrinsics{500.0, 480.0, 320.0, 240.0, 0.0, 0.0};
  if (distortion) {
    p.intrinsics.k1 = -0.05;
    p.intrinsics.k2 = 0.01;
  }
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const Eigen::Vector3d center(5.0 * unit(rng), 5.0 * unit(rng), 5.0 * unit(rng));
  p.truth = pose_from_center(random_rotation(angle(rng), rng), center);
  std::normal_distribution<double> noise(0.0, noise_px);
  std::uniform_real_distribution<double> depth(4.0, 12.0);
  std::uniform_real_distribution<double> u(0.0, 640.0), v(0.0, 480.0);
  while (p.matches.size() < inliers) {
    const Eigen::Vector3d xc(0.5 * unit(rng), 0.4 * unit(rng), 1.0);
    const Eigen::Vector3d cam = xc * depth(rng);
    const Eigen::Vector3d world = p.truth.rotation.transpose() * (cam - p.truth.translation);
    Eigen::Vector2d px = project(p.truth, p.intrinsics, world);
    px += Eigen::Vector2d(noise(rng), noise(rng));
    p.matches.push_back(PointMatch{px, world});
    p.is_inlier.push_back(true);
  }
  for (std::size_t i = 0; i < outliers; ++i) {
    const Eigen::Vector3d xc(0.5 * unit(rng), 0.4 * unit(rng), 1.0);
    const Eigen::Vector3d world = p.truth.rotation.transpose() * (xc * depth(rng) - p.truth.translation);
    p.matches.push_back(PointMatch{Eigen::Vector2d(u(rng), v(rng)), world});
    p.is_inlier.push_back(false);
  }
  // Interleave so inliers are not a prefix.
  std::vector<std::size_t> order(p.matches.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  PnpProblem shuffled = p;
  for (std::size_t i = 0; i < order.size(); ++i) {
    shuffled.matches[i] = p.matches[order[i]];
    shuffled.is_inlier[i] = p.is_inlier[order[i]];
  }
  return shuffled;
}

// --- localization scenes -----------------------------------------------------------------------

/// Places laid out along the x axis, each with one database frame looking
/// down +z at its own cluster of landmarks.
struct SceneParams {
  std::size_t places = 20;
  std::size_t landmarks_per_place = 40;
  std::size_t descriptors_per_landmark = 2;
  std::size_t local_dim = 256;
  std::size_t global_dim = 64;
  double database_noise = 0.015;  // between copies of a landmark's descriptor
  double place_spacing_m = 12.0;
  CameraIntrinsics intrinsics{500.0, 500.0, 320.0, 240.0, -0.02, 0.001};
  std::uint64_t seed = 1;
};

struct Scene {
  SceneParams params;
  std::vector<LandmarkRecord> landmarks;
  std::vector<FrameRecord> frames;
  std::vector<RealDescriptor> true_descriptors;  // per landmark, noise-free

  MapDatabase database() const { return MapDatabase::build(landmarks, frames); }
  Eigen::Vector3d place_center(std::size_t place) const {
    return Eigen::Vector3d(params.place_spacing_m * static_cast<double>(place), 0.0, 0.0);
  }
};

inline LandmarkId scene_landmark_id(std::size_t place, std::size_t k, std::size_t per_place) {
  return static_cast<LandmarkId>(place * per_place + k + 1);
}

inline FrameId scene_frame_id(std::size_t place) { return static_cast<FrameId>(place + 1); }

inline Scene make_scene(const SceneParams& params) {
  Rng rng(params.seed);
  Scene s;
  s.params = params;
  std::uniform_real_distribution<double> ux(-3.0, 3.0), uy(-2.0, 2.0), uz(6.0, 14.0);
  for (std::size_t p = 0; p < params.places; ++p) {
    const Eigen::Vector3d c = s.place_center(p);
    FrameRecord f;
    f.id = scene_frame_id(p);
    f.global_descriptor = random_unit<GlobalDescriptor>(params.global_dim, rng);
    for (std::size_t k = 0; k < params.landmarks_per_place; ++k) {
      LandmarkRecord lm;
      lm.id = scene_landmark_id(p, k, params.landmarks_per_place);
      lm.position = Vec3{c.x() + ux(rng), c.y() + uy(rng), c.z() + uz(rng)};
      const RealDescriptor truth = random_unit(params.local_dim, rng);
      for (std::size_t d = 0; d < params.descriptors_per_landmark; ++d) {
        lm.descriptors.push_back(DescriptorPair::from_real(perturb(truth, params.database_noise, rng)));
      }
      s.true_descriptors.push_back(truth);
      f.visible_landmarks.push_back(lm.id);
      s.landmarks.push_back(std::move(lm));
    }
    s.frames.push_back(std::move(f));
  }
  return s;
}

struct QuerySpec {
  std::uint64_t id = 0;
  std::size_t place = 0;
  std::size_t keypoints = 40;
  double local_noise = 0.015;    // per-element sigma before renormalization
  double flip_below = 0.0;       // negate descriptor elements with |x| below this
  double global_noise = 0.02;
  std::size_t global_place = 0;  // place whose frame supplies the global descriptor
  double pixel_noise = 0.5;
  double position_jitter_m = 0.3;
  double rotation_jitter_rad = 0.03;
};

/// A query camera near a place, observing a random subset of its landmarks.
inline QueryImage make_query(const Scene& scene, const QuerySpec& spec, Rng& rng,
                             CameraPose* truth = nullptr) {
  std::normal_distribution<double> jitter(0.0, spec.position_jitter_m);
  const Eigen::Vector3d center =
      scene.place_center(spec.place) + Eigen::Vector3d(jitter(rng), jitter(rng), jitter(rng));
  const CameraPose pose = pose_from_center(random_rotation(spec.rotation_jitter_rad, rng), center);
  if (truth) *truth = pose;

  QueryImage q;
  q.id = spec.id;
  q.intrinsics = scene.params.intrinsics;
  q.global = perturb(scene.frames[spec.global_place].global_descriptor, spec.global_noise, rng);

  const std::size_t per = scene.params.landmarks_per_place;
  std::vector<std::size_t> order(per);
  for (std::size_t k = 0; k < per; ++k) order[k] = k;
  std::shuffle(order.begin(), order.end(), rng);
  std::normal_distribution<double> px_noise(0.0, spec.pixel_noise);
  std::uniform_real_distribution<double> orient(-std::numbers::pi, std::numbers::pi);
  for (std::size_t k : order) {
    if (q.keypoints.size() >= spec.keypoints) break;
    const std::size_t index = spec.place * per + k;
    const auto& lm = scene.landmarks[index];
    const Eigen::Vector3d xw(lm.position.x, lm.position.y, lm.position.z);
    if (!(pose.to_camera(xw).z() > 0.5)) continue;
    const Eigen::Vector2d px = project(pose, q.intrinsics, xw);
    if (px.x() < 0.0 || px.y() < 0.0 || px.x() > 2.0 * q.intrinsics.cx ||
        px.y() > 2.0 * q.intrinsics.cy) {
      continue;
    }
    QueryKeypoint kp;
    kp.pixel = Pixel{px.x() + px_noise(rng), px.y() + px_noise(rng)};
    kp.orientation = orient(rng);
    kp.scale = 2.0;
    std::vector<double> v(scene.true_descriptors[index].values().begin(),
                          scene.true_descriptors[index].values().end());
    for (double& x : v) {
      if (std::abs(x) < spec.flip_below) x = -x;
    }
    kp.descriptor = DescriptorPair::from_real(perturb(RealDescriptor::normalize(std::move(v)), spec.local_noise, rng));
    q.keypoints.push_back(std::move(kp));
  }
  return q;
}

struct QuerySet {
  std::vector<QueryImage> queries;
  std::map<std::uint64_t, CameraPose> truth;
};

/// One well-conditioned query per place (cycling), ids starting at 1.
inline QuerySet make_easy_queries(const Scene& scene, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  QuerySet out;
  for (std::size_t i = 0; i < count; ++i) {
    QuerySpec spec;
    spec.id = i + 1;
    spec.place = i % scene.params.places;
    spec.global_place = spec.place;
    CameraPose pose;
    out.queries.push_back(make_query(scene, spec, rng, &pose));
    out.truth[spec.id] = pose;
  }
  return out;
}

struct BimodalParams {
  std::size_t per_group = 100;
  double flip_below = 0.06;  // group A: sign-unstable elements flipped
  double local_noise = 0.015;
};

/// Two query groups over disjoint halves of the places (ids 1..n, n+1..2n):
///   A: near-zero descriptor elements have flipped signs, which scrambles the
///      binary codes while keeping real descriptors close; global descriptor correct.
///   B: mild descriptor noise, but the global descriptor of a different place.
inline QuerySet make_bimodal_queries(const Scene& scene, const BimodalParams& bp, std::uint64_t seed) {
  if (scene.params.places < 2 * bp.per_group) {
    fail(ErrorKind::kInvalidArgument, "bimodal queries need at least 2 * per_group places");
  }
  Rng rng(seed);
  QuerySet out;
  const std::size_t places = scene.params.places;
  for (std::size_t i = 0; i < 2 * bp.per_group; ++i) {
    QuerySpec spec;
    spec.id = i + 1;
    spec.place = i;
    spec.local_noise = bp.local_noise;
    if (i < bp.per_group) {
      spec.flip_below = bp.flip_below;
      spec.global_place = spec.place;
    } else {
      spec.global_place = (spec.place + places / 2) % places;
    }
    CameraPose pose;
    out.queries.push_back(make_query(scene, spec, rng, &pose));
    out.truth[spec.id] = pose;
  }
  return out;
}

// --- textured plane images ----------------------------------------------------------------------

/// Multi-octave value noise over the plane, in [0, 1].
class PlaneTexture {
 public:
  explicit PlaneTexture(std::uint64_t seed, double base_wavelength_m = 1.2, int octaves = 4)
      : seed_(seed), base_wavelength_(base_wavelength_m), octaves_(octaves) {}

  double operator()(double x, double y) const {
    double value = 0.0;
    double amplitude = 1.0;
    double total = 0.0;
    double freq = 1.0 / base_wavelength_;
    for (int o = 0; o < octaves_; ++o) {
      value += amplitude * lattice_noise(x * freq, y * freq, static_cast<std::uint64_t>(o));
      total += amplitude;
      amplitude *= 0.55;
      freq *= 2.0;
    }
    return std::clamp(0.5 + 0.5 * value / total * 1.6, 0.0, 1.0);
  }

 private:
  double lattice(std::int64_t ix, std::int64_t iy, std::uint64_t octave) const {
    std::uint64_t h = splitmix64(seed_ ^ splitmix64(static_cast<std::uint64_t>(ix) * 0x9E3779B97F4A7C15ULL ^
                                                    splitmix64(static_cast<std::uint64_t>(iy) + (octave << 40))));
    return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  }

  static double smooth(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

  double lattice_noise(double x, double y, std::uint64_t octave) const {
    const double fx = std::floor(x), fy = std::floor(y);
    const auto ix = static_cast<std::int64_t>(fx);
    const auto iy = static_cast<std::int64_t>(fy);
    const double tx = smooth(x - fx), ty = smooth(y - fy);
    const double a = lattice(ix, iy, octave), b = lattice(ix + 1, iy, octave);
    const double c = lattice(ix, iy + 1, octave), d = lattice(ix + 1, iy + 1, octave);
    return (a + (b - a) * tx) * (1.0 - ty) + (c + (d - c) * tx) * ty;
  }

  std::uint64_t seed_;
  double base_wavelength_;
  int octaves_;
};

/// Renders the plane z = plane_z (world) into a camera, with additive pixel
/// noise. Rays missing the plane render as mid-gray.
inline GrayImage render_plane(const PlaneTexture& texture, double plane_z, const CameraPose& pose,
                              const CameraIntrinsics& k, std::size_t width, std::size_t height,
                              double noise_sigma, Rng& rng) {
  GrayImage img(width, height);
  std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
  const Eigen::Vector3d center = pose.center();
  const Eigen::Matrix3d rt = pose.rotation.transpose();
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const Eigen::Vector3d ray =
          rt * bearing(k, Eigen::Vector2d(static_cast<double>(x), static_cast<double>(y)));
      double v = 0.5;
      if (std::abs(ray.z()) > 1e-12) {
        const double t = (plane_z - center.z()) / ray.z();
        if (t > 0.0) {
          const Eigen::Vector3d hit = center + t * ray;
          v = texture(hit.x(), hit.y());
        }
      }
      if (noise_sigma > 0.0) v += noise(rng);
      img.at(x, y) = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

struct PlaneLandmark {
  LandmarkId id = 0;
  Eigen::Vector3d position;
  double orientation = 0.0;  // in the database image
  double world_size_m = 0.0;
};

struct SweepFixtureParams {
  std::size_t width = 320;
  std::size_t height = 240;
  double focal = 300.0;
  double plane_z = 5.0;
  std::size_t landmarks = 50;
  std::size_t queries = 20;
  double keypoint_size_min_m = 0.025;  // keypoint scale = world size * focal / depth
  double keypoint_size_max_m = 0.1;
  double image_noise = 0.05;
  double query_shift_m = 0.4;
  double query_roll_rad = 0.4;
  double query_tilt_rad = 0.15;
  std::uint64_t seed = 7;
};

/// A database image and query images of one textured plane.
struct SweepFixture {
  SweepFixtureParams params;
  CameraIntrinsics intrinsics;
  CameraPose database_pose;
  GrayImage database_image;
  std::vector<PlaneLandmark> landmarks;
  std::vector<GrayImage> query_images;
  std::vector<CameraPose> query_poses;
  GlobalDescriptor global;

  double keypoint_scale(const CameraPose& pose, const PlaneLandmark& lm) const {
    return lm.world_size_m * params.focal / pose.to_camera(lm.position).z();
  }

  /// Database keypoint geometry of each landmark.
  KeypointGeometry database_keypoint(const PlaneLandmark& lm) const {
    const Eigen::Vector2d px = project(database_pose, intrinsics, lm.position);
    return KeypointGeometry{Pixel{px.x(), px.y()}, lm.orientation,
                            keypoint_scale(database_pose, lm)};
  }

  /// Map whose descriptors come from database patches at `coefficient`;
  /// landmarks whose patch leaves the image are dropped.
  SweepMap map_at(double coefficient, std::size_t trees = kDefaultTreeCount,
                  const TreeParams& tree_params = {}) const {
    std::vector<LandmarkRecord> lms;
    FrameRecord frame;
    frame.id = 1;
    frame.global_descriptor = global;
    for (const auto& lm : landmarks) {
      const auto patch = try_extract_patch(database_image, database_keypoint(lm), coefficient);
      if (!patch) continue;
      auto desc = patch_descriptor(*patch);
      if (!desc) continue;
      LandmarkRecord rec;
      rec.id = lm.id;
      rec.position = Vec3{lm.position.x(), lm.position.y(), lm.position.z()};
      rec.descriptors.push_back(DescriptorPair::from_real(*std::move(desc)));
      frame.visible_landmarks.push_back(lm.id);
      lms.push_back(std::move(rec));
    }
    SweepMap out;
    if (lms.empty()) return out;
    out.db = MapDatabase::build(std::move(lms), {std::move(frame)});
    const auto entries = out.db.index_entries();
    out.forest = build_forest(entries, trees, tree_params, params.seed);
    out.model = PerturbationModel{0.0, 0.05, false};
    return out;
  }

  std::vector<ImageQuery> image_queries() const {
    std::vector<ImageQuery> out;
    for (std::size_t i = 0; i < query_images.size(); ++i) {
      ImageQuery q;
      q.id = i + 1;
      q.intrinsics = intrinsics;
      q.global = global;
      q.image = &query_images[i];
      const CameraPose& pose = query_poses[i];
      // Roll of the query about its optical axis relative to the database.
      const Eigen::Matrix3d rel = pose.rotation * database_pose.rotation.transpose();
      const double roll = std::atan2(rel(1, 0), rel(0, 0));
      for (const auto& lm : landmarks) {
        if (!(pose.to_camera(lm.position).z() > 0.0)) continue;
        const Eigen::Vector2d px = project(pose, intrinsics, lm.position);
        if (px.x() < 0.0 || px.y() < 0.0 || px.x() > static_cast<double>(params.width - 1) ||
            px.y() > static_cast<double>(params.height - 1)) {
          continue;
        }
        q.keypoints.push_back(
            KeypointGeometry{Pixel{px.x(), px.y()}, lm.orientation + roll, keypoint_scale(pose, lm)});
      }
      out.push_back(std::move(q));
    }
    return out;
  }
};

inline SweepFixture make_sweep_fixture(const SweepFixtureParams& params) {
  Rng rng(params.seed);
  SweepFixture f;
  f.params = params;
  f.intrinsics = CameraIntrinsics{params.focal, params.focal, 0.5 * static_cast<double>(params.width - 1),
                                  0.5 * static_cast<double>(params.height - 1), 0.0, 0.0};
  f.database_pose = CameraPose{};
  const PlaneTexture texture(splitmix64(params.seed));
  f.database_image = render_plane(texture, params.plane_z, f.database_pose, f.intrinsics,
                                  params.width, params.height, params.image_noise, rng);
  f.global = random_unit<GlobalDescriptor>(16, rng);

  std::uniform_real_distribution<double> ux(0.0, static_cast<double>(params.width - 1));
  std::uniform_real_distribution<double> uy(0.0, static_cast<double>(params.height - 1));
  std::uniform_real_distribution<double> orient(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> size(params.keypoint_size_min_m, params.keypoint_size_max_m);
  for (std::size_t i = 0; i < params.landmarks; ++i) {
    const Eigen::Vector3d ray = bearing(f.intrinsics, Eigen::Vector2d(ux(rng), uy(rng)));
    PlaneLandmark lm;
    lm.id = i + 1;
    lm.position = ray * (params.plane_z / ray.z());
    lm.orientation = orient(rng);
    lm.world_size_m = size(rng);
    f.landmarks.push_back(lm);
  }

  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::size_t i = 0; i < params.queries; ++i) {
    const Eigen::Vector3d center(params.query_shift_m * unit(rng), params.query_shift_m * unit(rng),
                                 params.query_shift_m * 0.5 * unit(rng));
    const Eigen::Matrix3d rot =
        (Eigen::AngleAxisd(params.query_roll_rad * unit(rng), Eigen::Vector3d::UnitZ()) *
         Eigen::AngleAxisd(params.query_tilt_rad * unit(rng), Eigen::Vector3d::UnitX()) *
         Eigen::AngleAxisd(params.query_tilt_rad * unit(rng), Eigen::Vector3d::UnitY()))
            .toRotationMatrix();
    const CameraPose pose = pose_from_center(rot, center);
    f.query_poses.push_back(pose);
    f.query_images.push_back(render_plane(texture, params.plane_z, pose, f.intrinsics, params.width,
                                          params.height, params.image_noise, rng));
  }
  return f;
}

}  // namespace parloc::synth
