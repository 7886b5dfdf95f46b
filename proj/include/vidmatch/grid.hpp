#pragma once

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <vector>

namespace vidmatch {

using Index = Eigen::Index;

/// One observation channel, rows = height, cols = width.
template <typename Scalar>
using Channel = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Label grid. true = foreground.
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

using VoteGrid = Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic>;

/// Multi-channel pixel grid. All channels share one size.
template <typename Scalar>
class PixelGrid {
public:
  PixelGrid() = default;

  explicit PixelGrid(Channel<Scalar> single) { channels_.push_back(std::move(single)); check(); }

  explicit PixelGrid(std::vector<Channel<Scalar>> channels) : channels_(std::move(channels)) {
    check();
  }

  Eigen::Index width() const { return channels_.front().cols(); }
  Eigen::Index height() const { return channels_.front().rows(); }
  std::size_t channel_count() const { return channels_.size(); }
  const Channel<Scalar>& channel(std::size_t c) const { return channels_.at(c); }
  const std::vector<Channel<Scalar>>& channels() const { return channels_; }

private:
  void check() const {
    if (channels_.empty()) throw std::invalid_argument("PixelGrid: no channels");
    const auto& first = channels_.front();
    if (first.rows() < 1 || first.cols() < 1)
      throw std::invalid_argument("PixelGrid: dimensions must be >= 1");
    for (const auto& c : channels_) {
      if (c.rows() != first.rows() || c.cols() != first.cols())
        throw std::invalid_argument("PixelGrid: channel sizes differ");
      if (!c.allFinite()) throw std::invalid_argument("PixelGrid: non-finite value");
    }
  }

  std::vector<Channel<Scalar>> channels_;
};

inline Mask empty_mask(Eigen::Index height, Eigen::Index width) {
  return Mask::Constant(height, width, false);
}

/// Pixel-centre centroid (x, y) of a mask; nullopt when the mask is empty.
struct Centroid {
  double x = 0.0;
  double y = 0.0;
};

inline std::optional<Centroid> centroid(const Mask& mask) {
  double sx = 0.0, sy = 0.0;
  long count = 0;
  for (Eigen::Index r = 0; r < mask.rows(); ++r)
    for (Eigen::Index c = 0; c < mask.cols(); ++c)
      if (mask(r, c)) {
        sx += static_cast<double>(c);
        sy += static_cast<double>(r);
        ++count;
      }
  if (count == 0) return std::nullopt;
  return Centroid{sx / static_cast<double>(count), sy / static_cast<double>(count)};
}

/// Integer translation by (dx, dy) with empty fill.
inline Mask shift_mask(const Mask& mask, long dx, long dy) {
  Mask out = empty_mask(mask.rows(), mask.cols());
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    const Eigen::Index sr = r - dy;
    if (sr < 0 || sr >= mask.rows()) continue;
    for (Eigen::Index c = 0; c < mask.cols(); ++c) {
      const Eigen::Index sc = c - dx;
      if (sc >= 0 && sc < mask.cols()) out(r, c) = mask(sr, sc);
    }
  }
  return out;
}

}  // namespace vidmatch
