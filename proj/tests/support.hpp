#pragma once

// Shared helpers for the test binaries.

#include <string>
#include <vector>

#include "msnn/data.hpp"
#include "msnn/network.hpp"
#include "msnn/rng.hpp"

namespace testsupport {

#ifndef MSNN_TEST_DATA_DIR
#define MSNN_TEST_DATA_DIR "tests/data"
#endif

inline std::string data_dir() { return MSNN_TEST_DATA_DIR; }

/// 40-sample two-class set: class 0 is bright on the left half, class 1 on
/// the right, with per-pixel jitter. Linearly separable by construction.
inline msnn::data::ImageDataset make_toy_two_class(int n = 40, int side = 4,
                                                   uint64_t seed = 7) {
  msnn::data::ImageDataset ds;
  ds.n = n;
  ds.h = side;
  ds.w = side;
  ds.num_classes = 2;
  ds.intensities.resize(static_cast<size_t>(n) * side * side);
  ds.labels.resize(static_cast<size_t>(n));
  msnn::Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    ds.labels[static_cast<size_t>(i)] = label;
    for (int r = 0; r < side; ++r) {
      for (int c = 0; c < side; ++c) {
        const bool bright = (label == 0) ? (c < side / 2) : (c >= side / 2);
        const double base = bright ? 0.85 : 0.05;
        ds.intensities[(static_cast<size_t>(i) * side + r) * side + c] =
            static_cast<float>(base + 0.1 * rng.uniform());
      }
    }
  }
  return ds;
}

inline msnn::network::SampleView image_view(const msnn::data::ImageDataset& ds, int i) {
  msnn::network::SampleView v;
  v.image = {ds.image(i), static_cast<size_t>(ds.features())};
  return v;
}

}  // namespace testsupport
