#pragma once

#include "vidmatch/rng.hpp"
#include "vidmatch/sequence.hpp"

#include <cmath>

namespace vidmatch::testing {

/// Random walk in R^dim with steps of length at most max_step.
inline FrameSequence<double> random_walk(Rng& rng, Index length, Index dim, double max_step,
                                         SequenceKind kind) {
  Matrix<double> x(dim, length);
  x.col(0).setZero();
  for (Index i = 1; i < length; ++i) {
    Vector<double> step(dim);
    for (Index d = 0; d < dim; ++d) step(d) = rng.uniform(-1.0, 1.0);
    const double norm = step.norm();
    if (norm > 0) step *= rng.uniform(0.0, max_step) / norm;
    x.col(i) = x.col(i - 1) + step;
  }
  return FrameSequence<double>(std::move(x), kind);
}

/// Copy of `seq` resampled to `length` frames with every entry jittered by up to `noise`.
inline FrameSequence<double> jittered(Rng& rng, const FrameSequence<double>& seq, Index length,
                                      double noise, SequenceKind kind) {
  Matrix<double> x(seq.dim(), length);
  for (Index i = 0; i < length; ++i) {
    const double t = length == 1 ? 0.0
                                 : static_cast<double>(i) * static_cast<double>(seq.size() - 1) /
                                       static_cast<double>(length - 1);
    const auto lo = static_cast<Index>(std::floor(t));
    const Index hi = std::min<Index>(lo + 1, seq.size() - 1);
    const double w = t - static_cast<double>(lo);
    x.col(i) = (1 - w) * seq.features().col(lo) + w * seq.features().col(hi);
    for (Index d = 0; d < seq.dim(); ++d) x(d, i) += rng.uniform(-noise, noise);
  }
  return FrameSequence<double>(std::move(x), kind);
}

inline FrameSequence<double> from_rows(std::initializer_list<std::initializer_list<double>> frames,
                                       SequenceKind kind) {
  const auto n = static_cast<Index>(frames.size());
  const auto dim = static_cast<Index>(frames.begin()->size());
  Matrix<double> x(dim, n);
  Index i = 0;
  for (const auto& f : frames) {
    Index d = 0;
    for (double v : f) x(d++, i) = v;
    ++i;
  }
  return FrameSequence<double>(std::move(x), kind);
}

}  // namespace vidmatch::testing
