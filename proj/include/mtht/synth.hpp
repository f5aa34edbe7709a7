#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>  // cross, unitOrthogonal

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "mtht/image.hpp"
#include "mtht/random.hpp"

namespace mtht {

/// Geometry and degradation recipe of a synthetic phantom. Intensities and
/// the noise variance follow the 8-bit [0,255] convention. Everything is
/// deterministic in `seed`.
template <int Dim>
struct PhantomSpec {
  using IndexVector = Eigen::Matrix<Eigen::Index, Dim, 1>;

  IndexVector dims;
  int n_branches = 1;
  double radius_min = 1.0;
  double radius_max = 3.0;
  double intensity = 200.0;
  double noise_variance = 0.0;
  double smooth_std = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    Eigen::Index min_dim = dims[0];
    for (int a = 0; a < Dim; ++a) {
      if (dims[a] < 16) throw std::invalid_argument("PhantomSpec: dims must each be >= 16");
      min_dim = std::min(min_dim, dims[a]);
    }
    if (n_branches < 1) throw std::invalid_argument("PhantomSpec: n_branches must be >= 1");
    if (!(radius_min >= 1.0)) throw std::invalid_argument("PhantomSpec: radius_min must be >= 1");
    if (!(radius_max >= radius_min))
      throw std::invalid_argument("PhantomSpec: radius_max must be >= radius_min");
    if (!(radius_max <= double(min_dim) / 4.0))
      throw std::invalid_argument("PhantomSpec: radius_max too large for the grid");
    if (!(intensity > 0.0)) throw std::invalid_argument("PhantomSpec: intensity must be positive");
    if (noise_variance < 0.0)
      throw std::invalid_argument("PhantomSpec: noise_variance must be >= 0");
    if (smooth_std < 0.0) throw std::invalid_argument("PhantomSpec: smooth_std must be >= 0");
  }
};

/// Degraded image plus the exact pre-noise, pre-smoothing support of the
/// curvilinear structures.
template <typename Scalar, int Dim>
struct Phantom {
  DenseImage<Scalar, Dim> image;
  DenseImage<bool, Dim> truth;
};

template <int Dim>
void to_json(nlohmann::json& j, const PhantomSpec<Dim>& spec) {
  std::vector<Eigen::Index> dims(spec.dims.data(), spec.dims.data() + Dim);
  j = nlohmann::json{{"dims", dims},
                     {"n_branches", spec.n_branches},
                     {"radius_range", {spec.radius_min, spec.radius_max}},
                     {"intensity", spec.intensity},
                     {"noise_variance", spec.noise_variance},
                     {"smooth_std", spec.smooth_std},
                     {"seed", spec.seed}};
}

template <int Dim>
void from_json(const nlohmann::json& j, PhantomSpec<Dim>& spec) {
  const auto dims = j.at("dims").get<std::vector<Eigen::Index>>();
  if (dims.size() != size_t(Dim)) throw std::invalid_argument("PhantomSpec: wrong dims count");
  for (int a = 0; a < Dim; ++a) spec.dims[a] = dims[size_t(a)];
  spec.n_branches = j.at("n_branches").get<int>();
  const auto range = j.at("radius_range").get<std::vector<double>>();
  if (range.size() != 2) throw std::invalid_argument("PhantomSpec: radius_range needs two values");
  spec.radius_min = range[0];
  spec.radius_max = range[1];
  spec.intensity = j.at("intensity").get<double>();
  spec.noise_variance = j.at("noise_variance").get<double>();
  spec.smooth_std = j.at("smooth_std").get<double>();
  spec.seed = j.at("seed").get<std::uint64_t>();
}

namespace detail {

inline void stamp_disk(Mask2& truth, const Eigen::Vector2d& center, double radius) {
  const double r2 = radius * radius;
  const Eigen::Index x0 = std::max<Eigen::Index>(0, Eigen::Index(std::ceil(center.x() - radius)));
  const Eigen::Index x1 =
      std::min<Eigen::Index>(truth.dim(0) - 1, Eigen::Index(std::floor(center.x() + radius)));
  const Eigen::Index y0 = std::max<Eigen::Index>(0, Eigen::Index(std::ceil(center.y() - radius)));
  const Eigen::Index y1 =
      std::min<Eigen::Index>(truth.dim(1) - 1, Eigen::Index(std::floor(center.y() + radius)));
  for (Eigen::Index y = y0; y <= y1; ++y)
    for (Eigen::Index x = x0; x <= x1; ++x) {
      const double dx = double(x) - center.x();
      const double dy = double(y) - center.y();
      if (dx * dx + dy * dy <= r2) truth(x, y) = true;
    }
}

inline void stamp_ball(Mask3& truth, const Eigen::Vector3d& center, double radius) {
  const double r2 = radius * radius;
  Eigen::Index lo[3], hi[3];
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::max<Eigen::Index>(0, Eigen::Index(std::ceil(center[a] - radius)));
    hi[a] = std::min<Eigen::Index>(truth.dim(a) - 1, Eigen::Index(std::floor(center[a] + radius)));
  }
  for (Eigen::Index z = lo[2]; z <= hi[2]; ++z)
    for (Eigen::Index y = lo[1]; y <= hi[1]; ++y)
      for (Eigen::Index x = lo[0]; x <= hi[0]; ++x) {
        const double dx = double(x) - center.x();
        const double dy = double(y) - center.y();
        const double dz = double(z) - center.z();
        if (dx * dx + dy * dy + dz * dz <= r2) truth(x, y, z) = true;
      }
}

inline Eigen::Vector2d bezier_point(const Eigen::Vector2d& p0, const Eigen::Vector2d& p1,
                                    const Eigen::Vector2d& p2, const Eigen::Vector2d& p3,
                                    double t) {
  const double s = 1.0 - t;
  return s * s * s * p0 + 3.0 * s * s * t * p1 + 3.0 * s * t * t * p2 + t * t * t * p3;
}

// Applies the shared degradation recipe: intensity on the truth support,
// then noise, then smoothing. The truth mask is left untouched.
template <typename Scalar, int Dim>
Phantom<Scalar, Dim> finalize_phantom(const PhantomSpec<Dim>& spec, DenseImage<bool, Dim> truth) {
  Phantom<Scalar, Dim> phantom;
  phantom.image = DenseImage<Scalar, Dim>(spec.dims);
  for (Eigen::Index i = 0; i < truth.size(); ++i)
    phantom.image[i] = truth[i] ? Scalar(spec.intensity) : Scalar(0);
  if (spec.noise_variance > 0.0)
    phantom.image =
        add_gaussian_noise(phantom.image, spec.noise_variance, mix_seed(spec.seed, 2));
  if (spec.smooth_std > 0.0) phantom.image = gaussian_smooth(phantom.image, spec.smooth_std);
  phantom.truth = std::move(truth);
  return phantom;
}

}  // namespace detail

/// Random smooth strokes on a 2D grid: one cubic Bezier per branch, stamped
/// as disks of a per-branch width. Control points are kept inside a margin
/// so no stroke touches the border.
template <typename Scalar = double>
Phantom<Scalar, 2> generate_2d(const PhantomSpec<2>& spec) {
  spec.validate();
  RandomStream stream(mix_seed(spec.seed, 1));

  const double margin = spec.radius_max + 2.0;
  const double x_hi = double(spec.dims[0] - 1) - margin;
  const double y_hi = double(spec.dims[1] - 1) - margin;
  const double span = double(std::min(spec.dims[0], spec.dims[1]));
  auto clamp_box = [&](Eigen::Vector2d p) {
    p.x() = std::clamp(p.x(), margin, x_hi);
    p.y() = std::clamp(p.y(), margin, y_hi);
    return p;
  };

  Mask2 truth(spec.dims);
  for (int b = 0; b < spec.n_branches; ++b) {
    const double radius = stream.uniform(spec.radius_min, spec.radius_max);
    const Eigen::Vector2d p0(stream.uniform(margin, x_hi), stream.uniform(margin, y_hi));
    const double angle = stream.uniform(0.0, 2.0 * 3.14159265358979323846);
    const double length = stream.uniform(0.35, 0.75) * span;
    const Eigen::Vector2d p3 =
        clamp_box(p0 + length * Eigen::Vector2d(std::cos(angle), std::sin(angle)));
    const Eigen::Vector2d chord = p3 - p0;
    const double wobble = 0.18 * chord.norm();
    const Eigen::Vector2d p1 = clamp_box(
        p0 + chord / 3.0 + wobble * Eigen::Vector2d(stream.normal(), stream.normal()));
    const Eigen::Vector2d p2 = clamp_box(
        p0 + 2.0 * chord / 3.0 + wobble * Eigen::Vector2d(stream.normal(), stream.normal()));

    double approx_len = 0.0;
    Eigen::Vector2d prev = p0;
    for (int s = 1; s <= 32; ++s) {
      const Eigen::Vector2d q = detail::bezier_point(p0, p1, p2, p3, double(s) / 32.0);
      approx_len += (q - prev).norm();
      prev = q;
    }
    const int steps = std::max(2, int(std::ceil(approx_len / 0.25)));
    for (int s = 0; s <= steps; ++s)
      detail::stamp_disk(truth, detail::bezier_point(p0, p1, p2, p3, double(s) / double(steps)),
                         radius);
  }
  return detail::finalize_phantom<Scalar, 2>(spec, std::move(truth));
}

/// Branching tube tree in a 3D volume. The trunk and each side branch are
/// grown as jittered polylines swept with spheres; branch i attaches to a
/// random centerline sample of the earlier branches and its radius never
/// exceeds the parent's. Branch streams are seeded independently, so for a
/// fixed seed the first k branches are identical for every n_branches >= k.
template <typename Scalar = double>
Phantom<Scalar, 3> generate_3d_tree(const PhantomSpec<3>& spec) {
  spec.validate();

  struct Sample {
    Eigen::Vector3d pos;
    Eigen::Vector3d dir;
    double radius;
  };
  std::vector<Sample> samples;
  Mask3 truth(spec.dims);

  const double step = 0.5;
  auto margin_lo = [&](double radius) { return radius + 2.0; };
  auto margin_hi = [&](int axis, double radius) {
    return double(spec.dims[axis] - 1) - (radius + 2.0);
  };

  auto grow = [&](Eigen::Vector3d pos, Eigen::Vector3d dir, double radius, int budget,
                  RandomStream& stream) {
    for (int s = 0; s < budget; ++s) {
      detail::stamp_ball(truth, pos, radius);
      samples.push_back({pos, dir, radius});
      dir += 0.07 * Eigen::Vector3d(stream.normal(), stream.normal(), stream.normal());
      dir.normalize();
      Eigen::Vector3d next = pos + step * dir;
      // bounce off the margin instead of dying at the wall
      for (int a = 0; a < 3; ++a)
        if (next[a] < margin_lo(radius) || next[a] > margin_hi(a, radius)) dir[a] = -dir[a];
      next = pos + step * dir;
      bool inside = true;
      for (int a = 0; a < 3; ++a)
        inside = inside && next[a] >= margin_lo(radius) && next[a] <= margin_hi(a, radius);
      if (!inside) break;
      pos = next;
    }
  };

  for (int b = 0; b < spec.n_branches; ++b) {
    RandomStream stream(mix_seed(spec.seed, 100 + std::uint64_t(b)));
    if (b == 0) {
      const double radius = spec.radius_max;
      Eigen::Vector3d pos(margin_lo(radius) + 1.0,
                          0.5 * double(spec.dims[1]) +
                              stream.uniform(-0.125, 0.125) * double(spec.dims[1]),
                          0.5 * double(spec.dims[2]) +
                              stream.uniform(-0.125, 0.125) * double(spec.dims[2]));
      Eigen::Vector3d dir(1.0, stream.uniform(-0.25, 0.25), stream.uniform(-0.25, 0.25));
      dir.normalize();
      const int budget = int(std::ceil(1.6 * double(spec.dims[0]) / step));
      grow(pos, dir, radius, budget, stream);
      continue;
    }
    // copy: grow() appends to samples and may reallocate
    const Sample attach = samples[stream.uniform_index(samples.size())];
    const double radius =
        std::clamp(attach.radius * stream.uniform(0.7, 0.9), spec.radius_min, attach.radius);
    // rotate the parent direction by a random angle about a random
    // perpendicular axis
    Eigen::Vector3d e1 = attach.dir.unitOrthogonal();
    Eigen::Vector3d e2 = attach.dir.cross(e1);
    const double polar = stream.uniform(0.45, 1.0);
    const double azimuth = stream.uniform(0.0, 2.0 * 3.14159265358979323846);
    Eigen::Vector3d dir = std::cos(polar) * attach.dir +
                          std::sin(polar) * (std::cos(azimuth) * e1 + std::sin(azimuth) * e2);
    dir.normalize();
    const int budget =
        int(std::ceil(stream.uniform(0.35, 0.9) * double(spec.dims[0]) / step));
    grow(attach.pos, dir, radius, budget, stream);
  }
  return detail::finalize_phantom<Scalar, 3>(spec, std::move(truth));
}

}  // namespace mtht
