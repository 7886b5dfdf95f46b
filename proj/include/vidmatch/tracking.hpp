#pragma once

#include "vidmatch/assumptions.hpp"
#include "vidmatch/grid.hpp"

#include <optional>
#include <vector>

namespace vidmatch {

/// Maximal run [start, end] of foreground frames without strong matches.
/// Anchors are the neighbouring frames that do have matches, when they exist.
struct GapSegment {
  Index start = 0;
  Index end = 0;
  std::optional<Index> left_anchor;
  std::optional<Index> right_anchor;

  Index length() const { return end - start + 1; }
};

enum class TrackDirection { forward, reverse };

enum class PassFusion { intersection, union_ };

/// Per-frame masks, indexed by frame id - 1. Empty optional = no mask.
using MaskSequence = std::vector<std::optional<Mask>>;

std::vector<GapSegment> detect_gaps(const std::vector<StrongMatchSet>& strong);

/// Same, from per-frame "has strong matches" flags.
std::vector<GapSegment> detect_gaps(const std::vector<bool>& has_matches);

/// Fills each gap from its anchor in the given direction: the anchor mask is
/// translated by the centroid velocity of the two frames next to the gap on
/// that side (zero when either centroid is unavailable). Frames outside gaps
/// get no hypothesis.
MaskSequence propagate(const MaskSequence& masks, const std::vector<GapSegment>& gaps,
                       TrackDirection direction);

/// Combines forward and reverse hypotheses frame by frame. Where only one
/// pass produced a mask it is passed through.
MaskSequence fuse_passes(const MaskSequence& fwd, const MaskSequence& rev,
                         PassFusion op = PassFusion::intersection);

/// Copies every hypothesis into frames that have no mask yet; frames that
/// already have masks are untouched.
MaskSequence fill_gaps(const MaskSequence& masks, const MaskSequence& hypotheses);

}  // namespace vidmatch
