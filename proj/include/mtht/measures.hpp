#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mtht/image.hpp"
#include "mtht/morphology.hpp"
#include "mtht/parallel.hpp"
#include "mtht/tensor.hpp"

namespace mtht {

enum class MeasureKind { kVesselness, kNeuriteness };

namespace detail {
// Eigenvalues this close to zero count as zero in the measure ratios; they
// have already been clamped relative to the spectral scale.
constexpr double kMeasureZeroTol = 1e-12;
}  // namespace detail

/// User parameters of the enhancement measures.
///
/// beta weighs the blob/line eigenvalue ratio, c the structureness term, and
/// alpha (3D only) the plate/line ratio. When c is left unset it is chosen
/// adaptively per scale as half of the largest structureness S observed in
/// the image.
template <typename Scalar>
struct MeasureParams {
  MeasureKind kind = MeasureKind::kVesselness;
  Scalar beta = Scalar(0.5);
  Scalar alpha = Scalar(0.5);
  std::optional<Scalar> c;
  ScaleSet scales{{3.0, 5.0, 7.0, 9.0}};
  int n_orientations = 12;

  static MeasureParams defaults_2d() { return MeasureParams{}; }

  static MeasureParams defaults_3d() {
    MeasureParams p;
    p.scales = ScaleSet({3.0, 5.0, 7.0});
    p.n_orientations = 40;
    return p;
  }

  void validate() const {
    if (!(beta > Scalar(0))) throw std::invalid_argument("MeasureParams: beta must be positive");
    if (!(alpha > Scalar(0))) throw std::invalid_argument("MeasureParams: alpha must be positive");
    if (c && !(*c > Scalar(0))) throw std::invalid_argument("MeasureParams: c must be positive");
    if (n_orientations < 1)
      throw std::invalid_argument("MeasureParams: n_orientations must be >= 1");
  }
};

/// Line-likeness from the two tensor eigenvalues sorted by magnitude
/// |ls| <= |ll|:
///
///   exp(-(ls/ll)^2 / 2 beta^2) * (1 - exp(-(ls^2+ll^2) / 2 c^2))
///
/// and 0 where ll vanishes. The tensors here are PSD, so the Hessian-style
/// sign gate does not apply; bright-structure selectivity comes from the
/// white top-hat itself.
template <typename Scalar>
Image2<Scalar> vesselness_2d(const EigenDecomposition<Scalar, 2>& eig, Scalar beta, Scalar c) {
  if (!(beta > Scalar(0)) || !(c > Scalar(0)))
    throw std::invalid_argument("vesselness_2d: beta and c must be positive");
  Image2<Scalar> out(eig.dims);
  const Scalar two_beta2 = Scalar(2) * beta * beta;
  const Scalar two_c2 = Scalar(2) * c * c;
  const Scalar zero_tol = Scalar(detail::kMeasureZeroTol);
  parallel_for(eig.size(), [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      Scalar ls = eig.eigenvalues(i, 0);
      Scalar ll = eig.eigenvalues(i, 1);
      if (std::abs(ls) > std::abs(ll)) std::swap(ls, ll);
      if (std::abs(ll) <= zero_tol) {
        out[i] = Scalar(0);
        continue;
      }
      const Scalar ratio = ls / ll;
      const Scalar s2 = ls * ls + ll * ll;
      out[i] = std::exp(-ratio * ratio / two_beta2) * (Scalar(1) - std::exp(-s2 / two_c2));
    }
  });
  return out;
}

/// 3D extension over magnitude-sorted |l1| <= |l2| <= |l3| with the
/// line/plate ratio l2/l3 weighted by alpha. Zero where l3 or l2 vanishes.
template <typename Scalar>
Image3<Scalar> vesselness_3d(const EigenDecomposition<Scalar, 3>& eig, Scalar alpha, Scalar beta,
                             Scalar c) {
  if (!(alpha > Scalar(0)) || !(beta > Scalar(0)) || !(c > Scalar(0)))
    throw std::invalid_argument("vesselness_3d: alpha, beta and c must be positive");
  Image3<Scalar> out(eig.dims);
  const Scalar two_alpha2 = Scalar(2) * alpha * alpha;
  const Scalar two_beta2 = Scalar(2) * beta * beta;
  const Scalar two_c2 = Scalar(2) * c * c;
  const Scalar zero_tol = Scalar(detail::kMeasureZeroTol);
  parallel_for(eig.size(), [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      Scalar l[3] = {eig.eigenvalues(i, 0), eig.eigenvalues(i, 1), eig.eigenvalues(i, 2)};
      // sort by magnitude, 3 elements
      if (std::abs(l[0]) > std::abs(l[1])) std::swap(l[0], l[1]);
      if (std::abs(l[1]) > std::abs(l[2])) std::swap(l[1], l[2]);
      if (std::abs(l[0]) > std::abs(l[1])) std::swap(l[0], l[1]);
      if (std::abs(l[2]) <= zero_tol || std::abs(l[1]) <= zero_tol) {
        out[i] = Scalar(0);
        continue;
      }
      const Scalar prod = l[1] * l[2];
      if (!(prod > Scalar(0))) {  // a negative eigenvalue: not a bright line
        out[i] = Scalar(0);
        continue;
      }
      const Scalar r_beta = l[0] / std::sqrt(prod);
      const Scalar r_alpha = l[1] / l[2];
      const Scalar s2 = l[0] * l[0] + l[1] * l[1] + l[2] * l[2];
      out[i] = std::exp(-r_beta * r_beta / two_beta2) *
               (Scalar(1) - std::exp(-r_alpha * r_alpha / two_alpha2)) *
               (Scalar(1) - std::exp(-s2 / two_c2));
    }
  });
  return out;
}

/// Neuriteness for PSD tensors: the per-pixel dominant eigenvalue divided by
/// its image-wide maximum, 0 where the pixel eigenvalue vanishes. A blank
/// field maps to all zeros.
template <typename Scalar, int Dim>
DenseImage<Scalar, Dim> neuriteness_mtht(const EigenDecomposition<Scalar, Dim>& eig) {
  DenseImage<Scalar, Dim> out(eig.dims);
  const Scalar zero_tol = Scalar(detail::kMeasureZeroTol);

  // dominant = eigenvalue of largest magnitude, kept with its sign
  Eigen::Array<Scalar, Eigen::Dynamic, 1> dominant(eig.size());
  parallel_for(eig.size(), [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      Scalar best = eig.eigenvalues(i, 0);
      for (int k = 1; k < Dim; ++k) {
        const Scalar v = eig.eigenvalues(i, k);
        if (std::abs(v) > std::abs(best)) best = v;
      }
      dominant[i] = best;
    }
  });

  const Scalar global_max = dominant.maxCoeff();
  if (!(global_max > zero_tol)) return out;  // blank image: all zeros

  parallel_for(eig.size(), [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i)
      out[i] = dominant[i] > zero_tol ? dominant[i] / global_max : Scalar(0);
  });
  return out;
}

/// Pointwise maximum across the per-scale responses.
template <typename Scalar, int Dim>
DenseImage<Scalar, Dim> combine_multiscale(const std::vector<DenseImage<Scalar, Dim>>& per_scale) {
  if (per_scale.empty()) throw std::invalid_argument("combine_multiscale: empty scale list");
  DenseImage<Scalar, Dim> out = per_scale.front();
  for (size_t i = 1; i < per_scale.size(); ++i) {
    if (!per_scale[i].same_dims(out))
      throw std::invalid_argument("combine_multiscale: dims mismatch");
    out.array() = out.array().max(per_scale[i].array());
  }
  return out;
}

/// Full enhancement output: the [0,1] response plus the parameters that
/// produced it. resolved_c echoes the structureness weight actually used per
/// scale (meaningful for vesselness only). per_scale is filled on request.
template <typename Scalar, int Dim>
struct EnhancementResult {
  DenseImage<Scalar, Dim> response;
  MeasureParams<Scalar> params;
  std::vector<Scalar> resolved_c;
  std::vector<DenseImage<Scalar, Dim>> per_scale;
};

/// Whole pipeline for one image: per scale, oriented top-hat bank ->
/// tensor -> eigenvalues -> measure; scales combined via pointwise max and
/// the result min-max normalized to [0,1]. Deterministic for fixed inputs
/// regardless of the parallel schedule.
template <typename Scalar, int Dim>
EnhancementResult<Scalar, Dim> enhance(const DenseImage<Scalar, Dim>& img,
                                       const MeasureParams<Scalar>& params,
                                       bool keep_per_scale = false) {
  params.validate();
  if (img.empty()) throw std::invalid_argument("enhance: empty image");

  const auto orientations = [&] {
    if constexpr (Dim == 2)
      return make_orientations_2d(params.n_orientations);
    else
      return make_orientations_3d(params.n_orientations);
  }();

  EnhancementResult<Scalar, Dim> result;
  result.params = params;

  std::vector<DenseImage<Scalar, Dim>> responses;
  responses.reserve(params.scales.count());
  for (double sigma : params.scales) {
    const auto bank = top_hat_bank(img, sigma, orientations);
    const auto field = accumulate_tensor(bank, orientations);
    const auto eig = eigen_decompose(field, /*with_eigenvectors=*/false);

    if (params.kind == MeasureKind::kNeuriteness) {
      responses.push_back(neuriteness_mtht(eig));
      continue;
    }

    Scalar c;
    if (params.c) {
      c = *params.c;
    } else {
      // adaptive: half of the largest structureness S at this scale
      const Scalar max_s2 = eig.eigenvalues.square().rowwise().sum().maxCoeff();
      c = Scalar(0.5) * std::sqrt(max_s2);
    }
    result.resolved_c.push_back(c);
    if (!(c > Scalar(detail::kMeasureZeroTol))) {
      responses.emplace_back(img.dims());  // blank scale: no structure at all
      continue;
    }
    if constexpr (Dim == 2)
      responses.push_back(vesselness_2d(eig, params.beta, c));
    else
      responses.push_back(vesselness_3d(eig, params.alpha, params.beta, c));
  }

  result.response = normalize(combine_multiscale(responses));
  if (keep_per_scale) result.per_scale = std::move(responses);
  return result;
}

}  // namespace mtht
