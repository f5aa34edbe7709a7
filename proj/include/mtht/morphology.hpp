#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "mtht/image.hpp"
#include "mtht/line_se.hpp"
#include "mtht/parallel.hpp"

namespace mtht {

namespace detail {

// Grayscale erosion/dilation with a flat SE. Offsets falling outside the
// image are skipped, which matches padding with +inf (erosion) / -inf
// (dilation); the SE always contains the origin, so the neighborhood is
// never empty. Interior pixels take a branch-free path over precomputed
// linear deltas.
template <typename Scalar, int Dim, bool TakeMin>
DenseImage<Scalar, Dim> flat_morph(const DenseImage<Scalar, Dim>& img, const LineSE<Dim>& se) {
  using Image = DenseImage<Scalar, Dim>;
  using IndexVector = typename Image::IndexVector;
  using Offset = typename LineSE<Dim>::Offset;

  if (se.offsets.empty()) throw std::invalid_argument("flat_morph: empty structuring element");

  Image out(img.dims());
  const size_t n_off = se.offsets.size();

  // Per-axis support of the SE and linear deltas for interior pixels.
  IndexVector neg = IndexVector::Zero(), pos = IndexVector::Zero();
  std::vector<Eigen::Index> deltas(n_off);
  for (size_t k = 0; k < n_off; ++k) {
    const Offset& off = se.offsets[k];
    IndexVector o;
    for (int a = 0; a < Dim; ++a) {
      o[a] = off[a];
      neg[a] = std::max<Eigen::Index>(neg[a], -off[a]);
      pos[a] = std::max<Eigen::Index>(pos[a], off[a]);
    }
    Eigen::Index d = o[Dim - 1];
    for (int a = Dim - 2; a >= 0; --a) d = d * img.dim(a) + o[a];
    deltas[k] = d;
  }

  const Eigen::Index width = img.dim(0);
  const Eigen::Index x_lo = std::min(neg[0], width);
  const Eigen::Index x_hi = std::max(x_lo, width - pos[0]);

  auto checked_pixel = [&](const IndexVector& p) {
    Scalar acc = img(p);
    for (size_t k = 0; k < n_off; ++k) {
      IndexVector q = p;
      bool inside = true;
      for (int a = 0; a < Dim; ++a) {
        q[a] += se.offsets[k][a];
        if (q[a] < 0 || q[a] >= img.dim(a)) {
          inside = false;
          break;
        }
      }
      if (!inside) continue;
      const Scalar v = img(q);
      if constexpr (TakeMin) {
        if (v < acc) acc = v;
      } else {
        if (v > acc) acc = v;
      }
    }
    return acc;
  };

  const Eigen::Index n_rows = img.size() / width;
  parallel_for(n_rows, [&](std::int64_t row_begin, std::int64_t row_end) {
    for (std::int64_t row = row_begin; row < row_end; ++row) {
      IndexVector p;
      p[0] = 0;
      if constexpr (Dim == 2) {
        p[1] = row;
      } else {
        p[1] = row % img.dim(1);
        p[2] = row / img.dim(1);
      }
      bool outer_interior = true;
      for (int a = 1; a < Dim; ++a)
        outer_interior = outer_interior && p[a] >= neg[a] && p[a] < img.dim(a) - pos[a];

      const Eigen::Index base = row * width;
      if (!outer_interior) {
        for (Eigen::Index x = 0; x < width; ++x) {
          p[0] = x;
          out[base + x] = checked_pixel(p);
        }
        continue;
      }
      for (Eigen::Index x = 0; x < x_lo; ++x) {
        p[0] = x;
        out[base + x] = checked_pixel(p);
      }
      for (Eigen::Index x = x_lo; x < x_hi; ++x) {
        const Eigen::Index i = base + x;
        Scalar acc = img[i];
        for (size_t k = 0; k < n_off; ++k) {
          const Scalar v = img[i + deltas[k]];
          if constexpr (TakeMin) {
            if (v < acc) acc = v;
          } else {
            if (v > acc) acc = v;
          }
        }
        out[i] = acc;
      }
      for (Eigen::Index x = x_hi; x < width; ++x) {
        p[0] = x;
        out[base + x] = checked_pixel(p);
      }
    }
  });
  return out;
}

}  // namespace detail

/// Minimum over the SE neighborhood.
template <typename Scalar, int Dim>
DenseImage<Scalar, Dim> erode(const DenseImage<Scalar, Dim>& img, const LineSE<Dim>& se) {
  return detail::flat_morph<Scalar, Dim, true>(img, se);
}

/// Maximum over the SE neighborhood.
template <typename Scalar, int Dim>
DenseImage<Scalar, Dim> dilate(const DenseImage<Scalar, Dim>& img, const LineSE<Dim>& se) {
  return detail::flat_morph<Scalar, Dim, false>(img, se);
}

template <typename Scalar, int Dim>
DenseImage<Scalar, Dim> open(const DenseImage<Scalar, Dim>& img, const LineSE<Dim>& se) {
  return dilate(erode(img, se), se);
}

template <typename Scalar, int Dim>
DenseImage<Scalar, Dim> close(const DenseImage<Scalar, Dim>& img, const LineSE<Dim>& se) {
  return erode(dilate(img, se), se);
}

/// White top-hat: image minus its opening. Non-negative everywhere; keeps
/// bright structures narrower than the SE.
template <typename Scalar, int Dim>
DenseImage<Scalar, Dim> top_hat(const DenseImage<Scalar, Dim>& img, const LineSE<Dim>& se) {
  DenseImage<Scalar, Dim> out = open(img, se);
  out.array() = img.array() - out.array();
  return out;
}

/// Black bottom-hat: closing minus the image. Non-negative everywhere.
template <typename Scalar, int Dim>
DenseImage<Scalar, Dim> bottom_hat(const DenseImage<Scalar, Dim>& img, const LineSE<Dim>& se) {
  DenseImage<Scalar, Dim> out = close(img, se);
  out.array() -= img.array();
  return out;
}

/// One white top-hat per orientation at a fixed scale, in orientation order.
/// Members are independent, so they are evaluated in parallel.
template <typename Scalar, int Dim>
std::vector<DenseImage<Scalar, Dim>> top_hat_bank(const DenseImage<Scalar, Dim>& img, double scale,
                                                  const OrientationSet<Dim>& orientations) {
  std::vector<DenseImage<Scalar, Dim>> bank(size_t(orientations.count()));
  parallel_for(orientations.count(), [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t j = begin; j < end; ++j)
      bank[size_t(j)] = top_hat(img, make_line_se<Dim>(scale, orientations[int(j)]));
  });
  return bank;
}

}  // namespace mtht
