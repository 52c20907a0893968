#pragma once

#include <utility>
#include <vector>

#include "freenoise/array.hpp"

namespace freenoise {

struct Window {
  int start = 0;
  int end = 0;       // exclusive
  float center = 0;  // start + (U-1)/2, fractional for even U
};

/// Overlapping temporal windows plus the per-frame fusion weights used to
/// blend their outputs. Raw weight of window j at a frame i it covers is
/// U/2 - floor(|i - center_j|), normalized per frame over covering windows.
struct WindowPlan {
  int total = 0;
  int window = 0;
  int stride = 0;
  std::vector<Window> windows;
  // frame -> (window index, normalized weight), window indices ascending
  std::vector<std::vector<std::pair<int, float>>> frame_weights;
};

/// Builds the plan for `total` frames. Strict alignment: (total - window)
/// must be a multiple of stride, and 1 <= stride <= window <= total.
WindowPlan plan_windows(int total, int window, int stride);

/// Blends per-window outputs (each [C,U,H,W]) into [C,total,H,W] using the
/// plan's weights. A frame covered by exactly one window passes through
/// bitwise.
Array fuse_windows(const std::vector<Array>& outputs, const WindowPlan& plan);

}  // namespace freenoise
