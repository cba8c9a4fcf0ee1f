#pragma once

#include <vector>

#include "shadex/raster.hpp"

namespace shadex {

/// 4-connected labeling. Labels are 0..count-1 in raster-scan order of each
/// component's first pixel; unset pixels are -1.
struct Labeling {
  Grid<int> labels;
  int count = 0;
  std::vector<std::size_t> sizes;
};

inline Labeling connected_components(const Mask& valid) {
  const int w = valid.width();
  const int h = valid.height();
  Labeling out{Grid<int>(w, h, -1), 0, {}};
  std::vector<std::size_t> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t seed = valid.index(x, y);
      if (!valid[seed] || out.labels[seed] >= 0) continue;
      const int label = out.count++;
      std::size_t size = 0;
      out.labels[seed] = label;
      stack.push_back(seed);
      while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        ++size;
        const int px = static_cast<int>(i % w);
        const int py = static_cast<int>(i / w);
        const int nx[4] = {px - 1, px + 1, px, px};
        const int ny[4] = {py, py, py - 1, py + 1};
        for (int k = 0; k < 4; ++k) {
          if (!valid.contains(nx[k], ny[k])) continue;
          const std::size_t j = valid.index(nx[k], ny[k]);
          if (valid[j] && out.labels[j] < 0) {
            out.labels[j] = label;
            stack.push_back(j);
          }
        }
      }
      out.sizes.push_back(size);
    }
  }
  return out;
}

}  // namespace shadex
