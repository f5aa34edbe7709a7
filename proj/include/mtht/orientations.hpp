#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace mtht {

template <int Dim>
using Direction = Eigen::Matrix<double, Dim, 1>;

using Direction2 = Direction<2>;
using Direction3 = Direction<3>;

namespace detail {
// Components at or below this magnitude are snapped to exact zero before the
// hemisphere sign is fixed; cos(pi/2) and friends land here.
constexpr double kDirectionSnapTol = 1e-14;
constexpr double kPi = 3.14159265358979323846;
}  // namespace detail

/// Canonical hemisphere representative of a unit direction: near-zero
/// components are snapped, then the sign is flipped if needed so the last
/// nonzero component is positive. Line structuring elements are invariant
/// under u -> -u, so one representative per axis is enough.
template <int Dim>
Direction<Dim> canonicalize(Direction<Dim> u) {
  if (std::abs(u.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("canonicalize: direction must be unit length");
  for (int a = 0; a < Dim; ++a)
    if (std::abs(u[a]) <= detail::kDirectionSnapTol) u[a] = 0.0;
  u.normalize();
  int last = -1;
  for (int a = 0; a < Dim; ++a)
    if (u[a] != 0.0) last = a;
  if (last < 0) throw std::invalid_argument("canonicalize: zero direction");
  if (u[last] < 0.0) u = -u;
  return u;
}

/// Ordered set of distinct canonical unit directions.
template <int Dim>
class OrientationSet {
 public:
  explicit OrientationSet(std::vector<Direction<Dim>> directions)
      : directions_(std::move(directions)) {
    if (directions_.empty())
      throw std::invalid_argument("OrientationSet: at least one direction required");
    for (auto& u : directions_) u = canonicalize<Dim>(u);
    for (size_t i = 0; i < directions_.size(); ++i)
      for (size_t j = i + 1; j < directions_.size(); ++j)
        if ((directions_[i] - directions_[j]).norm() <= 1e-12)
          throw std::invalid_argument("OrientationSet: duplicate direction");
  }

  int count() const { return int(directions_.size()); }
  const Direction<Dim>& operator[](int j) const { return directions_[size_t(j)]; }

  auto begin() const { return directions_.begin(); }
  auto end() const { return directions_.end(); }

 private:
  std::vector<Direction<Dim>> directions_;
};

/// n in-plane directions at angles j*180/n degrees, j = 0..n-1.
inline OrientationSet<2> make_orientations_2d(int n) {
  if (n < 1) throw std::invalid_argument("make_orientations_2d: n must be >= 1");
  std::vector<Direction2> dirs;
  dirs.reserve(size_t(n));
  for (int j = 0; j < n; ++j) {
    const double theta = detail::kPi * double(j) / double(n);
    dirs.push_back(Direction2(std::cos(theta), std::sin(theta)));
  }
  return OrientationSet<2>(std::move(dirs));
}

/// n directions spread over the unit hemisphere (z > 0) on a golden-angle
/// Fibonacci lattice. Deterministic in n.
inline OrientationSet<3> make_orientations_3d(int n) {
  if (n < 1) throw std::invalid_argument("make_orientations_3d: n must be >= 1");
  const double golden_angle = detail::kPi * (3.0 - std::sqrt(5.0));
  std::vector<Direction3> dirs;
  dirs.reserve(size_t(n));
  for (int j = 0; j < n; ++j) {
    const double z = (double(j) + 0.5) / double(n);
    const double r = std::sqrt(1.0 - z * z);
    const double phi = golden_angle * double(j);
    dirs.push_back(Direction3(r * std::cos(phi), r * std::sin(phi), z));
  }
  return OrientationSet<3>(std::move(dirs));
}

}  // namespace mtht
