#pragma once

#include <Eigen/Dense>

#include <array>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mtht/image.hpp"
#include "mtht/orientations.hpp"
#include "mtht/parallel.hpp"

namespace mtht {

/// Per-pixel symmetric matrix grid. Only the unique entries are stored, in
/// row-major upper-triangle order: (xx, xy, yy) in 2D and
/// (xx, xy, xz, yy, yz, zz) in 3D, so symmetry holds by construction.
template <typename Scalar, int Dim>
class TensorField {
 public:
  static constexpr int kUnique = Dim * (Dim + 1) / 2;

  using IndexVector = Eigen::Matrix<Eigen::Index, Dim, 1>;
  using Matrix = Eigen::Matrix<Scalar, Dim, Dim>;
  using Components = Eigen::Array<Scalar, Eigen::Dynamic, kUnique>;

  TensorField() : dims_(IndexVector::Zero()) {}

  explicit TensorField(const IndexVector& dims) : dims_(dims) {
    for (int a = 0; a < Dim; ++a)
      if (dims_[a] < 1) throw std::invalid_argument("TensorField: every extent must be >= 1");
    components_ = Components::Zero(dims_.prod(), kUnique);
  }

  const IndexVector& dims() const { return dims_; }
  Eigen::Index size() const { return components_.rows(); }

  Components& components() { return components_; }
  const Components& components() const { return components_; }

  Matrix tensor_at(Eigen::Index i) const {
    Matrix t;
    int c = 0;
    for (int r = 0; r < Dim; ++r)
      for (int col = r; col < Dim; ++col) {
        t(r, col) = components_(i, c);
        t(col, r) = components_(i, c);
        ++c;
      }
    return t;
  }

  void set_tensor(Eigen::Index i, const Matrix& t) {
    int c = 0;
    for (int r = 0; r < Dim; ++r)
      for (int col = r; col < Dim; ++col) components_(i, c++) = t(r, col);
  }

 private:
  IndexVector dims_;
  Components components_;
};

/// Sorted eigensystem of a TensorField. Eigenvalues are ascending per pixel;
/// eigenvector frames are optional (the enhancement measures only consume
/// eigenvalues) and stored column-major, column k matching eigenvalue k.
template <typename Scalar, int Dim>
struct EigenDecomposition {
  using IndexVector = Eigen::Matrix<Eigen::Index, Dim, 1>;
  using Matrix = Eigen::Matrix<Scalar, Dim, Dim>;

  IndexVector dims = IndexVector::Zero();
  Eigen::Array<Scalar, Eigen::Dynamic, Dim> eigenvalues;
  Eigen::Array<Scalar, Eigen::Dynamic, Dim * Dim> eigenvectors;

  Eigen::Index size() const { return eigenvalues.rows(); }
  bool has_eigenvectors() const { return eigenvectors.rows() == eigenvalues.rows(); }

  Eigen::Matrix<Scalar, Dim, 1> eigenvalues_at(Eigen::Index i) const {
    return eigenvalues.row(i).matrix().transpose();
  }

  Matrix frame_at(Eigen::Index i) const {
    Matrix f;
    for (int col = 0; col < Dim; ++col)
      for (int r = 0; r < Dim; ++r) f(r, col) = eigenvectors(i, col * Dim + r);
    return f;
  }
};

/// Sums w_j * u_j u_j^T over the oriented top-hat bank, pixel by pixel. With
/// non-negative bank values every pixel tensor is symmetric PSD.
template <typename Scalar, int Dim>
TensorField<Scalar, Dim> accumulate_tensor(const std::vector<DenseImage<Scalar, Dim>>& bank,
                                           const OrientationSet<Dim>& orientations) {
  constexpr int kUnique = TensorField<Scalar, Dim>::kUnique;
  if (bank.size() != size_t(orientations.count()))
    throw std::invalid_argument("accumulate_tensor: bank size must match orientation count");
  for (const auto& img : bank)
    if (!img.same_dims(bank.front()))
      throw std::invalid_argument("accumulate_tensor: bank images must share dims");

  // Unique entries of u u^T per orientation, in storage order.
  const int n = orientations.count();
  const size_t n_outer = size_t(n);
  std::vector<std::array<Scalar, kUnique>> outer(n_outer);
  for (int j = 0; j < n; ++j) {
    const Direction<Dim>& u = orientations[j];
    int c = 0;
    for (int r = 0; r < Dim; ++r)
      for (int col = r; col < Dim; ++col) outer[size_t(j)][size_t(c++)] = Scalar(u[r] * u[col]);
  }

  TensorField<Scalar, Dim> field(bank.front().dims());
  auto& comps = field.components();
  parallel_for(field.size(), [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      std::array<Scalar, kUnique> acc{};
      for (int j = 0; j < n; ++j) {
        const Scalar w = bank[size_t(j)][i];
        for (int c = 0; c < kUnique; ++c) acc[size_t(c)] += w * outer[size_t(j)][size_t(c)];
      }
      for (int c = 0; c < kUnique; ++c) comps(i, c) = acc[size_t(c)];
    }
  });
  return field;
}

namespace detail {

// Eigen's closed-form symmetric solver is accurate enough for almost every
// tensor, but its 3x3 path can lose ~1e-8 of relative accuracy near repeated
// eigenvalues. When the reconstruction residual is above tol we redo the
// pixel with the iterative solver.
template <typename Scalar, int Dim>
void sym_eigen(const Eigen::Matrix<Scalar, Dim, Dim>& t, Eigen::Matrix<Scalar, Dim, 1>& values,
               Eigen::Matrix<Scalar, Dim, Dim>& vectors) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, Dim, Dim>> solver;
  solver.computeDirect(t);
  values = solver.eigenvalues();
  vectors = solver.eigenvectors();
  if constexpr (Dim == 3) {
    const Scalar tol =
        std::max(Scalar(1e-11), Scalar(50) * std::numeric_limits<Scalar>::epsilon());
    const Scalar scale = t.norm();
    const Scalar residual = (vectors * values.asDiagonal() * vectors.transpose() - t).norm();
    // fully relative, and negated so a NaN residual also takes the
    // iterative path; near-rank-1 tensors of small norm otherwise keep
    // computeDirect's absolute eigenvalue error
    if (!(residual <= tol * scale)) {
      solver.compute(t);
      values = solver.eigenvalues();
      vectors = solver.eigenvectors();
    }
  }
}

}  // namespace detail

/// Per-pixel eigendecomposition, ascending eigenvalue order. Eigenvalues in
/// [-1e-9 * spectral scale, 0) are clamped to zero so PSD tensors stay PSD
/// after rounding.
template <typename Scalar, int Dim>
EigenDecomposition<Scalar, Dim> eigen_decompose(const TensorField<Scalar, Dim>& field,
                                                bool with_eigenvectors = true) {
  if (!field.components().isFinite().all())
    throw std::invalid_argument("eigen_decompose: non-finite tensor entries");

  EigenDecomposition<Scalar, Dim> out;
  out.dims = field.dims();
  out.eigenvalues.resize(field.size(), Dim);
  if (with_eigenvectors) out.eigenvectors.resize(field.size(), Dim * Dim);

  parallel_for(field.size(), [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      Eigen::Matrix<Scalar, Dim, 1> values;
      Eigen::Matrix<Scalar, Dim, Dim> vectors;
      detail::sym_eigen<Scalar, Dim>(field.tensor_at(i), values, vectors);

      const Scalar scale = values.cwiseAbs().maxCoeff();
      const Scalar clamp_below = Scalar(-1e-9) * scale;
      for (int k = 0; k < Dim; ++k)
        if (values[k] < Scalar(0) && values[k] >= clamp_below) values[k] = Scalar(0);

      for (int k = 0; k < Dim; ++k) out.eigenvalues(i, k) = values[k];
      if (with_eigenvectors)
        for (int col = 0; col < Dim; ++col)
          for (int r = 0; r < Dim; ++r) out.eigenvectors(i, col * Dim + r) = vectors(r, col);
    }
  });
  return out;
}

}  // namespace mtht
