#include "vidmatch/tracking.hpp"

#include <cmath>
#include <stdexcept>

namespace vidmatch {

std::vector<GapSegment> detect_gaps(const std::vector<bool>& has_matches) {
  std::vector<GapSegment> out;
  const auto n = static_cast<Index>(has_matches.size());
  Index i = 1;
  while (i <= n) {
    if (has_matches[static_cast<std::size_t>(i - 1)]) {
      ++i;
      continue;
    }
    GapSegment g;
    g.start = i;
    while (i <= n && !has_matches[static_cast<std::size_t>(i - 1)]) ++i;
    g.end = i - 1;
    if (g.start > 1) g.left_anchor = g.start - 1;
    if (g.end < n) g.right_anchor = g.end + 1;
    out.push_back(g);
  }
  return out;
}

std::vector<GapSegment> detect_gaps(const std::vector<StrongMatchSet>& strong) {
  std::vector<bool> has(strong.size());
  for (std::size_t i = 0; i < strong.size(); ++i) has[i] = !strong[i].empty();
  return detect_gaps(has);
}

namespace {

const Mask* mask_at(const MaskSequence& masks, Index id) {
  if (id < 1 || id > static_cast<Index>(masks.size())) return nullptr;
  const auto& m = masks[static_cast<std::size_t>(id - 1)];
  return m ? &*m : nullptr;
}

}  // namespace

MaskSequence propagate(const MaskSequence& masks, const std::vector<GapSegment>& gaps,
                       TrackDirection direction) {
  MaskSequence out(masks.size());
  const bool fwd = direction == TrackDirection::forward;
  for (const auto& gap : gaps) {
    const auto anchor = fwd ? gap.left_anchor : gap.right_anchor;
    if (!anchor) continue;
    const Mask* base = mask_at(masks, *anchor);
    if (!base) continue;
    // Velocity per frame in the direction of travel, from the anchor and the
    // frame beyond it.
    const Index beyond = fwd ? *anchor - 1 : *anchor + 1;
    double vx = 0.0, vy = 0.0;
    const auto c_anchor = centroid(*base);
    if (const Mask* prev = mask_at(masks, beyond); prev && c_anchor) {
      if (const auto c_prev = centroid(*prev)) {
        vx = c_anchor->x - c_prev->x;
        vy = c_anchor->y - c_prev->y;
      }
    }
    for (Index step = 1; step <= gap.length(); ++step) {
      const Index id = fwd ? *anchor + step : *anchor - step;
      const auto dx = std::lround(vx * static_cast<double>(step));
      const auto dy = std::lround(vy * static_cast<double>(step));
      out[static_cast<std::size_t>(id - 1)] = shift_mask(*base, dx, dy);
    }
  }
  return out;
}

MaskSequence fuse_passes(const MaskSequence& fwd, const MaskSequence& rev, PassFusion op) {
  if (fwd.size() != rev.size()) throw std::invalid_argument("fuse_passes: length mismatch");
  MaskSequence out(fwd.size());
  for (std::size_t i = 0; i < fwd.size(); ++i) {
    if (fwd[i] && rev[i]) {
      if (fwd[i]->rows() != rev[i]->rows() || fwd[i]->cols() != rev[i]->cols())
        throw std::invalid_argument("fuse_passes: mask dimensions differ");
      out[i] = op == PassFusion::intersection ? Mask(*fwd[i] && *rev[i]) : Mask(*fwd[i] || *rev[i]);
    } else if (fwd[i]) {
      out[i] = fwd[i];
    } else if (rev[i]) {
      out[i] = rev[i];
    }
  }
  return out;
}

MaskSequence fill_gaps(const MaskSequence& masks, const MaskSequence& hypotheses) {
  if (masks.size() != hypotheses.size()) throw std::invalid_argument("fill_gaps: length mismatch");
  MaskSequence out = masks;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!out[i] && hypotheses[i]) out[i] = hypotheses[i];
  return out;
}

}  // namespace vidmatch
