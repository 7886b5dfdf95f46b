#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace vidmatch {

using Index = Eigen::Index;

enum class SequenceKind { foreground, background };

inline const char* to_string(SequenceKind kind) {
  return kind == SequenceKind::foreground ? "foreground" : "background";
}

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Owning copy of one frame: 1-based id plus its feature vector.
template <typename Scalar>
struct FrameDescriptor {
  Index id = 0;
  Vector<Scalar> features;
};

/// Non-owning view of frame `id` inside a sequence.
template <typename Scalar>
struct FrameView {
  SequenceKind kind;
  Index id;
  Eigen::Ref<const Vector<Scalar>> features;

  FrameDescriptor<Scalar> descriptor() const { return {id, features}; }
};

/// Ordered frames of one capture. Features are stored column-per-frame
/// (dim x length) so whole-sequence expressions stay in Eigen.
///
/// Frame ids are 1-based and contiguous. A zero-dimensional sequence is a
/// placeholder for inputs that only come with a precomputed distance matrix.
template <typename Scalar>
class FrameSequence {
public:
  FrameSequence() = default;

  FrameSequence(Matrix<Scalar> features, SequenceKind kind)
      : features_(std::move(features)), kind_(kind) {
    if (features_.cols() < 1)
      throw std::invalid_argument("FrameSequence: at least one frame required");
    if (!features_.allFinite())
      throw std::invalid_argument("FrameSequence: non-finite feature value");
  }

  static FrameSequence placeholder(Index length, SequenceKind kind) {
    return FrameSequence(Matrix<Scalar>(0, length), kind);
  }

  Index size() const { return features_.cols(); }
  Index dim() const { return features_.rows(); }
  SequenceKind kind() const { return kind_; }
  const Matrix<Scalar>& features() const { return features_; }

  FrameView<Scalar> frame(Index id) const {
    check_id(id);
    return {kind_, id, features_.col(id - 1)};
  }

  FrameDescriptor<Scalar> descriptor(Index id) const {
    return frame(id).descriptor();
  }

  /// Same frames in reverse order, ids renumbered 1..n.
  FrameSequence reversed() const {
    return FrameSequence(features_.rowwise().reverse(), kind_);
  }

  template <typename Other>
  FrameSequence<Other> cast() const {
    return FrameSequence<Other>(features_.template cast<Other>(), kind_);
  }

private:
  void check_id(Index id) const {
    if (id < 1 || id > size())
      throw std::out_of_range("frame id " + std::to_string(id) +
                              " outside [1," + std::to_string(size()) + "]");
  }

  Matrix<Scalar> features_;
  SequenceKind kind_ = SequenceKind::foreground;
};

/// Frame distance d(x, y).
///
/// The Euclidean variant works on descriptors and is a true metric. The
/// precomputed variant looks frames up by id in an n x m foreground/background
/// table; within-sequence distances (needed by the smoothness audit) come from
/// optional n x n and m x m tables. Precomputed input is not required to be a
/// metric; see audit_triangle_inequality.
template <typename Scalar>
class DistanceMetric {
public:
  enum class Variant { euclidean, precomputed };

  DistanceMetric() = default;

  static DistanceMetric euclidean() { return DistanceMetric(); }

  static DistanceMetric precomputed(Matrix<Scalar> cross,
                                    std::optional<Matrix<Scalar>> fg_self = {},
                                    std::optional<Matrix<Scalar>> bg_self = {}) {
    check_table(cross, "cross");
    if (fg_self) {
      check_table(*fg_self, "foreground self");
      if (fg_self->rows() != cross.rows() || fg_self->cols() != cross.rows())
        throw std::invalid_argument("foreground self table must be n x n");
    }
    if (bg_self) {
      check_table(*bg_self, "background self");
      if (bg_self->rows() != cross.cols() || bg_self->cols() != cross.cols())
        throw std::invalid_argument("background self table must be m x m");
    }
    DistanceMetric m;
    m.variant_ = Variant::precomputed;
    m.cross_ = std::move(cross);
    m.fg_self_ = std::move(fg_self);
    m.bg_self_ = std::move(bg_self);
    return m;
  }

  Variant variant() const { return variant_; }
  bool is_metric() const { return variant_ == Variant::euclidean; }
  const Matrix<Scalar>& table() const { return cross_; }

  Scalar operator()(const FrameView<Scalar>& a, const FrameView<Scalar>& b) const {
    if (variant_ == Variant::euclidean) {
      if (a.features.size() != b.features.size())
        throw std::invalid_argument("descriptor dimension mismatch: " +
                                    std::to_string(a.features.size()) + " vs " +
                                    std::to_string(b.features.size()));
      return (a.features - b.features).norm();
    }
    if (a.kind == SequenceKind::foreground && b.kind == SequenceKind::background)
      return lookup(cross_, a.id, b.id);
    if (a.kind == SequenceKind::background && b.kind == SequenceKind::foreground)
      return lookup(cross_, b.id, a.id);
    const auto& self = a.kind == SequenceKind::foreground ? fg_self_ : bg_self_;
    if (!self)
      throw std::invalid_argument(std::string("no ") + to_string(a.kind) +
                                  " self-distance table supplied");
    return lookup(*self, a.id, b.id);
  }

  /// Checks that a precomputed table covers the given sequences.
  void check_shape(const FrameSequence<Scalar>& fg, const FrameSequence<Scalar>& bg) const {
    if (variant_ == Variant::euclidean) {
      if (fg.dim() != bg.dim())
        throw std::invalid_argument("descriptor dimension mismatch between sequences");
      if (fg.dim() < 1)
        throw std::invalid_argument("euclidean metric needs descriptors");
      return;
    }
    if (cross_.rows() != fg.size() || cross_.cols() != bg.size())
      throw std::invalid_argument("distance table is " + std::to_string(cross_.rows()) +
                                  "x" + std::to_string(cross_.cols()) +
                                  " but sequences are " + std::to_string(fg.size()) +
                                  "x" + std::to_string(bg.size()));
  }

private:
  static void check_table(const Matrix<Scalar>& t, const char* what) {
    if (t.size() == 0) throw std::invalid_argument(std::string(what) + " table is empty");
    if (!t.allFinite()) throw std::invalid_argument(std::string(what) + " table not finite");
    if ((t.array() < Scalar(0)).any())
      throw std::invalid_argument(std::string(what) + " table has negative distances");
  }

  static Scalar lookup(const Matrix<Scalar>& t, Index i, Index j) {
    if (i < 1 || i > t.rows() || j < 1 || j > t.cols())
      throw std::out_of_range("frame pair (" + std::to_string(i) + "," +
                              std::to_string(j) + ") outside distance table");
    return t(i - 1, j - 1);
  }

  Variant variant_ = Variant::euclidean;
  Matrix<Scalar> cross_;
  std::optional<Matrix<Scalar>> fg_self_;
  std::optional<Matrix<Scalar>> bg_self_;
};

template <typename Scalar>
Scalar distance(const FrameView<Scalar>& f, const FrameView<Scalar>& b,
                const DistanceMetric<Scalar>& metric) {
  return metric(f, b);
}

/// Convenience for owning descriptors. Only meaningful for the Euclidean
/// variant, or for a precomputed table when f is foreground and b background.
template <typename Scalar>
Scalar distance(const FrameDescriptor<Scalar>& f, const FrameDescriptor<Scalar>& b,
                const DistanceMetric<Scalar>& metric) {
  return metric(FrameView<Scalar>{SequenceKind::foreground, f.id, f.features},
                FrameView<Scalar>{SequenceKind::background, b.id, b.features});
}

/// Full n x m table of d(f_i, b_j). Used by oracles and reports, never by the
/// matching algorithms themselves.
template <typename Scalar>
Matrix<Scalar> distance_table(const FrameSequence<Scalar>& fg, const FrameSequence<Scalar>& bg,
                              const DistanceMetric<Scalar>& metric) {
  metric.check_shape(fg, bg);
  if (metric.variant() == DistanceMetric<Scalar>::Variant::precomputed) return metric.table();
  Matrix<Scalar> out(fg.size(), bg.size());
  for (Index j = 0; j < bg.size(); ++j)
    out.col(j) = (fg.features().colwise() - bg.features().col(j)).colwise().norm().transpose();
  return out;
}

}  // namespace vidmatch
