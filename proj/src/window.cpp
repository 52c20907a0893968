#include "freenoise/window.hpp"

#include <cmath>
#include <cstring>

namespace freenoise {

WindowPlan plan_windows(int total, int window, int stride) {
  if (window < 1 || total < window) {
    throw ConfigError("window size " + std::to_string(window) + " must be in [1, total=" +
                      std::to_string(total) + "]");
  }
  if (stride < 1 || stride > window) {
    throw ConfigError("stride " + std::to_string(stride) + " must be in [1, window=" +
                      std::to_string(window) + "]");
  }
  if ((total - window) % stride != 0) {
    throw ConfigError("(total - window) must be a multiple of stride: (" + std::to_string(total) +
                      " - " + std::to_string(window) + ") % " + std::to_string(stride) + " != 0");
  }
  WindowPlan plan{total, window, stride, {}, {}};
  for (int start = 0; start + window <= total; start += stride) {
    plan.windows.push_back({start, start + window, start + (window - 1) * 0.5f});
  }
  plan.frame_weights.resize(static_cast<size_t>(total));
  const float half = window * 0.5f;
  for (int i = 0; i < total; ++i) {
    auto& entries = plan.frame_weights[static_cast<size_t>(i)];
    float sum = 0.0f;
    for (int j = 0; j < static_cast<int>(plan.windows.size()); ++j) {
      const Window& wj = plan.windows[static_cast<size_t>(j)];
      if (i < wj.start || i >= wj.end) continue;
      const float raw = half - std::floor(std::fabs(static_cast<float>(i) - wj.center));
      entries.emplace_back(j, raw);
      sum += raw;
    }
    for (auto& [j, w] : entries) w /= sum;
  }
  return plan;
}

Array fuse_windows(const std::vector<Array>& outputs, const WindowPlan& plan) {
  if (static_cast<int>(outputs.size()) != static_cast<int>(plan.windows.size())) {
    throw ShapeError("fuse_windows got " + std::to_string(outputs.size()) + " outputs for " +
                     std::to_string(plan.windows.size()) + " windows");
  }
  if (outputs.empty()) throw ShapeError("fuse_windows needs at least one window");
  const Array& first = outputs[0];
  if (first.ndim() != 4 || first.extent(1) != plan.window) {
    throw ShapeError("window output must be [C," + std::to_string(plan.window) + ",H,W], got " +
                     first.shape_str());
  }
  for (const Array& o : outputs) {
    if (!o.same_shape(first)) {
      throw ShapeError("window outputs disagree in shape: " + o.shape_str() + " vs " +
                       first.shape_str());
    }
  }
  const int c = first.extent(0), h = first.extent(2), w = first.extent(3);
  const size_t plane = static_cast<size_t>(h) * w;
  Array fused({c, plan.total, h, w});
  for (int i = 0; i < plan.total; ++i) {
    const auto& entries = plan.frame_weights[static_cast<size_t>(i)];
    for (int ci = 0; ci < c; ++ci) {
      float* dst = fused.data() + ci * fused.stride(0) + static_cast<size_t>(i) * plane;
      bool wrote = false;
      for (const auto& [j, weight] : entries) {
        const Array& src = outputs[static_cast<size_t>(j)];
        const int local = i - plan.windows[static_cast<size_t>(j)].start;
        const float* sp = src.data() + ci * src.stride(0) + static_cast<size_t>(local) * plane;
        if (!wrote) {
          // first contribution is written, not accumulated, so a weight of
          // exactly 1 passes the window output through bitwise
          for (size_t p = 0; p < plane; ++p) dst[p] = weight * sp[p];
          wrote = true;
        } else {
          for (size_t p = 0; p < plane; ++p) dst[p] += weight * sp[p];
        }
      }
    }
  }
  return fused;
}

}  // namespace freenoise
