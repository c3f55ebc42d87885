#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msnn/errors.hpp"

namespace msnn::data {

/// Raw IDX container: unsigned-byte payload plus dimensions, big-endian on
/// disk. Round-trips bit-exactly through save_idx/load_idx.
struct IdxTensor {
  std::vector<int> dims;
  std::vector<uint8_t> payload;
  long size() const {
    long n = 1;
    for (int d : dims) n *= d;
    return n;
  }
};

IdxTensor load_idx(const std::string& path);
void save_idx(const std::string& path, const IdxTensor& t);

struct ImageDataset {
  int n = 0, h = 0, w = 0;
  std::vector<float> intensities;  // n*h*w, scaled to [0,1]
  std::vector<int> labels;
  int num_classes = 10;

  int features() const { return h * w; }
  const float* image(int i) const { return intensities.data() + static_cast<size_t>(i) * h * w; }
};

ImageDataset load_image_dataset(const std::string& images_path, const std::string& labels_path);

/// Preprocessed event tensor: T x C x H x W event counts, t-major bytes.
struct EventSample {
  int t = 0, c = 0, h = 0, w = 0;
  std::vector<uint8_t> counts;
  int features() const { return c * h * w; }
};

EventSample load_event_sample(const std::string& path);
void save_event_sample(const std::string& path, const EventSample& s);

struct EventDataset {
  std::vector<EventSample> samples;
  std::vector<int> labels;
  int num_classes = 11;
  int features() const { return samples.empty() ? 0 : samples.front().features(); }
};

/// Directory with EVT0 sample files plus a labels manifest ("filename,label"
/// lines in labels.csv). Order follows the manifest, not the filesystem.
EventDataset load_event_dataset(const std::string& dir, int expected_c = 2, int expected_h = 32,
                                int expected_w = 32);

struct Batch {
  std::vector<int> indices;
  int size() const { return static_cast<int>(indices.size()); }
};

/// Deterministic batches: a seeded permutation when shuffling, identity
/// order otherwise. The final partial batch is kept.
std::vector<Batch> make_batches(int n, int batch_size, uint64_t seed, bool shuffle);

}  // namespace msnn::data
