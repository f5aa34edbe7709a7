#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mtht/random.hpp"

namespace mtht {

/// Dense grayscale grid over 2 or 3 axes. Storage is one flat Eigen array in
/// x-fastest order; intensities are unitless reals (8-bit sources are widened
/// to [0,255] on load). The rest of the library treats images as immutable
/// values: every operation returns a new image, so sharing read-only copies
/// across workers is safe.
template <typename Scalar, int Dim>
class DenseImage {
  static_assert(Dim == 2 || Dim == 3, "DenseImage supports 2D and 3D grids only");

 public:
  using ScalarType = Scalar;
  using IndexVector = Eigen::Matrix<Eigen::Index, Dim, 1>;
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  static constexpr int kDim = Dim;

  DenseImage() : dims_(IndexVector::Zero()) {}

  explicit DenseImage(const IndexVector& dims, Scalar fill = Scalar(0)) : dims_(dims) {
    for (int a = 0; a < Dim; ++a)
      if (dims_[a] < 1) throw std::invalid_argument("DenseImage: every extent must be >= 1");
    data_ = Storage::Constant(dims_.prod(), fill);
  }

  DenseImage(Eigen::Index nx, Eigen::Index ny, Scalar fill = Scalar(0))
    requires(Dim == 2)
      : DenseImage(IndexVector(nx, ny), fill) {}

  DenseImage(Eigen::Index nx, Eigen::Index ny, Eigen::Index nz, Scalar fill = Scalar(0))
    requires(Dim == 3)
      : DenseImage(IndexVector(nx, ny, nz), fill) {}

  const IndexVector& dims() const { return dims_; }
  Eigen::Index dim(int axis) const { return dims_[axis]; }
  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  /// Linear index of a grid point, x varying fastest.
  Eigen::Index index(const IndexVector& p) const {
    Eigen::Index idx = p[Dim - 1];
    for (int a = Dim - 2; a >= 0; --a) idx = idx * dims_[a] + p[a];
    return idx;
  }

  bool contains(const IndexVector& p) const {
    for (int a = 0; a < Dim; ++a)
      if (p[a] < 0 || p[a] >= dims_[a]) return false;
    return true;
  }

  Scalar operator[](Eigen::Index i) const { return data_[i]; }
  Scalar& operator[](Eigen::Index i) { return data_[i]; }

  Scalar operator()(const IndexVector& p) const { return data_[index(p)]; }
  Scalar& operator()(const IndexVector& p) { return data_[index(p)]; }

  Scalar operator()(Eigen::Index x, Eigen::Index y) const
    requires(Dim == 2)
  {
    return data_[y * dims_[0] + x];
  }
  Scalar& operator()(Eigen::Index x, Eigen::Index y)
    requires(Dim == 2)
  {
    return data_[y * dims_[0] + x];
  }
  Scalar operator()(Eigen::Index x, Eigen::Index y, Eigen::Index z) const
    requires(Dim == 3)
  {
    return data_[(z * dims_[1] + y) * dims_[0] + x];
  }
  Scalar& operator()(Eigen::Index x, Eigen::Index y, Eigen::Index z)
    requires(Dim == 3)
  {
    return data_[(z * dims_[1] + y) * dims_[0] + x];
  }

  Storage& array() { return data_; }
  const Storage& array() const { return data_; }

  template <typename OtherScalar>
  bool same_dims(const DenseImage<OtherScalar, Dim>& other) const {
    for (int a = 0; a < Dim; ++a)
      if (dims_[a] != other.dims()[a]) return false;
    return true;
  }

  bool operator==(const DenseImage& other) const {
    return same_dims(other) && (data_ == other.data_).all();
  }

 private:
  IndexVector dims_;
  Storage data_;
};

template <typename Scalar>
using Image2 = DenseImage<Scalar, 2>;
template <typename Scalar>
using Image3 = DenseImage<Scalar, 3>;

using Image2d = Image2<double>;
using Image3d = Image3<double>;
using Mask2 = DenseImage<bool, 2>;
using Mask3 = DenseImage<bool, 3>;

template <typename Scalar, int Dim>
bool all_finite(const DenseImage<Scalar, Dim>& img) {
  return img.array().isFinite().all();
}

/// Affine remap of the intensity range to [0,1] (min -> 0, max -> 1). A
/// constant image maps to all zeros. Idempotent: a second application leaves
/// the data bit-identical.
template <typename Scalar, int Dim>
DenseImage<Scalar, Dim> normalize(const DenseImage<Scalar, Dim>& img) {
  if (img.empty()) throw std::invalid_argument("normalize: empty image");
  const Scalar lo = img.array().minCoeff();
  const Scalar hi = img.array().maxCoeff();
  DenseImage<Scalar, Dim> out(img.dims());
  if (hi > lo) out.array() = (img.array() - lo) / (hi - lo);
  return out;
}

namespace detail {

/// Symmetric sampled-Gaussian kernel, truncated at radius ceil(3*std) and
/// renormalized to unit sum.
inline std::vector<double> gaussian_kernel(double stddev) {
  const int radius = int(std::ceil(3.0 * stddev));
  std::vector<double> weights(size_t(2 * radius + 1));
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double w = std::exp(-double(k) * double(k) / (2.0 * stddev * stddev));
    weights[size_t(k + radius)] = w;
    sum += w;
  }
  for (double& w : weights) w /= sum;
  return weights;
}

}  // namespace detail

/// Separable Gaussian convolution along every axis. Borders replicate the
/// edge sample, so constant images are fixed points.
template <typename Scalar, int Dim>
DenseImage<Scalar, Dim> gaussian_smooth(const DenseImage<Scalar, Dim>& img, double stddev) {
  if (!(stddev > 0.0)) throw std::invalid_argument("gaussian_smooth: std must be positive");
  if (img.empty()) throw std::invalid_argument("gaussian_smooth: empty image");
  using Image = DenseImage<Scalar, Dim>;
  using IndexVector = typename Image::IndexVector;

  const std::vector<double> kernel = detail::gaussian_kernel(stddev);
  const int radius = int(kernel.size() / 2);

  Image current = img;
  for (int axis = 0; axis < Dim; ++axis) {
    Image next(img.dims());
    const Eigen::Index extent = img.dim(axis);
    Eigen::Index stride = 1;
    for (int a = 0; a < axis; ++a) stride *= img.dim(a);

    IndexVector p = IndexVector::Zero();
    const Eigen::Index n = current.size();
    for (Eigen::Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const Eigen::Index q = std::clamp<Eigen::Index>(p[axis] + k, 0, extent - 1);
        acc += kernel[size_t(k + radius)] * double(current[i + (q - p[axis]) * stride]);
      }
      next[i] = Scalar(acc);
      for (int a = 0; a < Dim; ++a) {
        if (++p[a] < img.dim(a)) break;
        p[a] = 0;
      }
    }
    current = std::move(next);
  }
  return current;
}

/// Adds i.i.d. zero-mean Gaussian samples of the given variance. The variance
/// follows the 8-bit intensity convention: 10 means std sqrt(10) on a [0,255]
/// image; callers working on [0,1] data rescale it by (1/255)^2 themselves.
/// Deterministic for a fixed seed.
template <typename Scalar, int Dim>
DenseImage<Scalar, Dim> add_gaussian_noise(const DenseImage<Scalar, Dim>& img, double variance,
                                           std::uint64_t seed) {
  if (variance < 0.0) throw std::invalid_argument("add_gaussian_noise: variance must be >= 0");
  DenseImage<Scalar, Dim> out = img;
  if (variance == 0.0) return out;
  RandomStream stream(seed);
  const double sigma = std::sqrt(variance);
  const Eigen::Index n = out.size();
  for (Eigen::Index i = 0; i < n; ++i) out[i] += Scalar(sigma * stream.normal());
  return out;
}

}  // namespace mtht
