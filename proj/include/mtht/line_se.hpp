#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mtht/orientations.hpp"

namespace mtht {

/// Strictly increasing list of structuring-element lengths in pixels, each >= 1.
class ScaleSet {
 public:
  explicit ScaleSet(std::vector<double> scales) : scales_(std::move(scales)) {
    if (scales_.empty()) throw std::invalid_argument("ScaleSet: at least one scale required");
    for (size_t i = 0; i < scales_.size(); ++i) {
      if (!(scales_[i] >= 1.0)) throw std::invalid_argument("ScaleSet: scales must be >= 1");
      if (i > 0 && !(scales_[i] > scales_[i - 1]))
        throw std::invalid_argument("ScaleSet: scales must be strictly increasing");
    }
  }

  size_t count() const { return scales_.size(); }
  double operator[](size_t i) const { return scales_[i]; }
  const std::vector<double>& values() const { return scales_; }

  auto begin() const { return scales_.begin(); }
  auto end() const { return scales_.end(); }

 private:
  std::vector<double> scales_;
};

/// Flat line structuring element: a set of integer offsets, point-symmetric
/// about the origin and always covering the center pixel.
template <int Dim>
struct LineSE {
  using Offset = Eigen::Matrix<int, Dim, 1>;

  std::vector<Offset> offsets;
  double scale = 1.0;
  Direction<Dim> orientation = Direction<Dim>::Zero();
};

namespace detail {

template <int Dim>
bool offset_less(const Eigen::Matrix<int, Dim, 1>& a, const Eigen::Matrix<int, Dim, 1>& b) {
  for (int axis = Dim - 1; axis >= 0; --axis) {
    if (a[axis] != b[axis]) return a[axis] < b[axis];
  }
  return false;
}

/// Integer Bresenham segment from the origin to target, inclusive, stepping
/// along the dominant axis.
template <int Dim>
std::vector<Eigen::Matrix<int, Dim, 1>> bresenham_from_origin(
    const Eigen::Matrix<int, Dim, 1>& target) {
  using Offset = Eigen::Matrix<int, Dim, 1>;
  std::vector<Offset> points;
  Offset d = target.cwiseAbs();
  Offset s;
  for (int a = 0; a < Dim; ++a) s[a] = target[a] >= 0 ? 1 : -1;

  int major = 0;
  for (int a = 1; a < Dim; ++a)
    if (d[a] > d[major]) major = a;

  Offset p = Offset::Zero();
  points.push_back(p);
  Offset err;
  for (int a = 0; a < Dim; ++a) err[a] = 2 * d[a] - d[major];
  for (int step = 0; step < d[major]; ++step) {
    p[major] += s[major];
    for (int a = 0; a < Dim; ++a) {
      if (a == major) continue;
      if (err[a] > 0) {
        p[a] += s[a];
        err[a] -= 2 * d[major];
      }
      err[a] += 2 * d[a];
    }
    points.push_back(p);
  }
  return points;
}

}  // namespace detail

/// Centered line SE of roughly `scale` pixels along `orientation`. The pixel
/// count round(scale) is bumped to the next odd value so the mirrored segment
/// stays point-symmetric; each half is Bresenham-rasterized from the center
/// to round(half_length * u).
template <int Dim>
LineSE<Dim> make_line_se(double scale, const Direction<Dim>& orientation) {
  if (!(scale >= 1.0)) throw std::invalid_argument("make_line_se: scale must be >= 1");
  using Offset = typename LineSE<Dim>::Offset;

  LineSE<Dim> se;
  se.scale = scale;
  se.orientation = canonicalize<Dim>(orientation);

  long length = std::lround(scale);
  if (length % 2 == 0) ++length;
  const long half = (length - 1) / 2;

  Offset target;
  for (int a = 0; a < Dim; ++a) target[a] = int(std::lround(double(half) * se.orientation[a]));

  std::vector<Offset> points = detail::bresenham_from_origin<Dim>(target);
  const size_t forward = points.size();
  for (size_t i = 0; i < forward; ++i) points.push_back(Offset(-points[i]));

  std::sort(points.begin(), points.end(), detail::offset_less<Dim>);
  points.erase(std::unique(points.begin(), points.end(),
                           [](const Offset& a, const Offset& b) {
                             return (a.array() == b.array()).all();
                           }),
               points.end());
  se.offsets = std::move(points);
  return se;
}

}  // namespace mtht
