#pragma once

#include <vector>

namespace fedism {

/// One labelled example. `quality` is the imaging-quality attribute:
/// 0 = clean, 1 = corrupted.
struct Sample {
  std::vector<double> x;
  int y = 0;
  int quality = 0;

  bool operator==(const Sample&) const = default;
};

}  // namespace fedism
