#include "msnn/data.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "msnn/rng.hpp"

namespace msnn::data {

namespace {

uint32_t read_u32_be(std::istream& in, const std::string& path) {
  uint8_t b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw TruncatedFileError("truncated header in " + path);
  return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

void write_u32_be(std::ostream& out, uint32_t v) {
  const uint8_t b[4] = {uint8_t(v >> 24), uint8_t(v >> 16), uint8_t(v >> 8), uint8_t(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32_le(std::istream& in, const std::string& path) {
  uint8_t b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw TruncatedFileError("truncated header in " + path);
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

void write_u32_le(std::ostream& out, uint32_t v) {
  const uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

IdxTensor load_idx(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);

  uint8_t magic[4];
  if (!in.read(reinterpret_cast<char*>(magic), 4))
    throw TruncatedFileError("truncated header in " + path);
  if (magic[0] != 0 || magic[1] != 0) throw BadMagicError("bad IDX magic in " + path);
  if (magic[2] != 0x08)
    throw UnsupportedDtypeError("IDX dtype 0x" + std::to_string(magic[2]) +
                                " unsupported (only unsigned byte) in " + path);
  const int rank = magic[3];
  if (rank < 1 || rank > 4) throw BadMagicError("implausible IDX rank in " + path);

  IdxTensor t;
  long total = 1;
  for (int i = 0; i < rank; ++i) {
    const uint32_t d = read_u32_be(in, path);
    if (d > (1u << 30)) throw ShapeMismatchError("implausible IDX dimension in " + path);
    t.dims.push_back(static_cast<int>(d));
    total *= static_cast<long>(d);
    if (total > (1L << 31)) throw ShapeMismatchError("implausible IDX size in " + path);
  }
  t.payload.resize(static_cast<size_t>(t.size()));
  if (!in.read(reinterpret_cast<char*>(t.payload.data()),
               static_cast<std::streamsize>(t.payload.size())))
    throw TruncatedFileError("truncated payload in " + path);
  return t;
}

void save_idx(const std::string& path, const IdxTensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  const uint8_t magic[4] = {0, 0, 0x08, static_cast<uint8_t>(t.dims.size())};
  out.write(reinterpret_cast<const char*>(magic), 4);
  for (int d : t.dims) write_u32_be(out, static_cast<uint32_t>(d));
  out.write(reinterpret_cast<const char*>(t.payload.data()),
            static_cast<std::streamsize>(t.payload.size()));
  if (!out) throw DataError("write failed: " + path);
}

ImageDataset load_image_dataset(const std::string& images_path, const std::string& labels_path) {
  IdxTensor images = load_idx(images_path);
  IdxTensor labels = load_idx(labels_path);
  if (images.dims.size() != 3)
    throw ShapeMismatchError("expected rank-3 image tensor in " + images_path);
  if (labels.dims.size() != 1)
    throw ShapeMismatchError("expected rank-1 label vector in " + labels_path);
  if (images.dims[0] != labels.dims[0])
    throw ShapeMismatchError("image/label counts differ (" + std::to_string(images.dims[0]) +
                             " vs " + std::to_string(labels.dims[0]) + ")");

  ImageDataset ds;
  ds.n = images.dims[0];
  ds.h = images.dims[1];
  ds.w = images.dims[2];
  ds.intensities.resize(images.payload.size());
  for (size_t i = 0; i < images.payload.size(); ++i)
    ds.intensities[i] = static_cast<float>(images.payload[i]) * (1.0f / 255.0f);
  ds.labels.resize(labels.payload.size());
  int max_label = 0;
  for (size_t i = 0; i < labels.payload.size(); ++i) {
    ds.labels[i] = labels.payload[i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = std::max(10, max_label + 1);
  return ds;
}

EventSample load_event_sample(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4)) throw TruncatedFileError("truncated header in " + path);
  if (std::memcmp(magic, "EVT0", 4) != 0) throw BadMagicError("bad EVT0 magic in " + path);

  EventSample s;
  s.t = static_cast<int>(read_u32_le(in, path));
  s.c = static_cast<int>(read_u32_le(in, path));
  s.h = static_cast<int>(read_u32_le(in, path));
  s.w = static_cast<int>(read_u32_le(in, path));
  const long n = static_cast<long>(s.t) * s.c * s.h * s.w;
  if (n < 0 || n > (1L << 31)) throw ShapeMismatchError("implausible EVT0 dims in " + path);
  s.counts.resize(static_cast<size_t>(n));
  if (!in.read(reinterpret_cast<char*>(s.counts.data()), static_cast<std::streamsize>(n)))
    throw TruncatedFileError("truncated payload in " + path);
  return s;
}

void save_event_sample(const std::string& path, const EventSample& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out.write("EVT0", 4);
  write_u32_le(out, static_cast<uint32_t>(s.t));
  write_u32_le(out, static_cast<uint32_t>(s.c));
  write_u32_le(out, static_cast<uint32_t>(s.h));
  write_u32_le(out, static_cast<uint32_t>(s.w));
  out.write(reinterpret_cast<const char*>(s.counts.data()),
            static_cast<std::streamsize>(s.counts.size()));
  if (!out) throw DataError("write failed: " + path);
}

EventDataset load_event_dataset(const std::string& dir, int expected_c, int expected_h,
                                int expected_w) {
  const std::string manifest = dir + "/labels.csv";
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open labels manifest " + manifest);

  EventDataset ds;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw MissingLabelError(manifest + ":" + std::to_string(lineno) +
                              ": expected 'filename,label'");
    const std::string fname = line.substr(0, comma);
    int label;
    try {
      size_t idx = 0;
      label = std::stoi(line.substr(comma + 1), &idx);
    } catch (const std::exception&) {
      throw MissingLabelError(manifest + ":" + std::to_string(lineno) + ": bad label value");
    }
    if (label < 0 || label >= ds.num_classes)
      throw MissingLabelError(manifest + ":" + std::to_string(lineno) + ": label " +
                              std::to_string(label) + " outside 0.." +
                              std::to_string(ds.num_classes - 1));

    EventSample s = load_event_sample(dir + "/" + fname);
    if (s.c != expected_c || s.h != expected_h || s.w != expected_w)
      throw ShapeMismatchError(fname + ": expected " + std::to_string(expected_c) + "x" +
                               std::to_string(expected_h) + "x" + std::to_string(expected_w) +
                               " channels, got " + std::to_string(s.c) + "x" +
                               std::to_string(s.h) + "x" + std::to_string(s.w));
    ds.samples.push_back(std::move(s));
    ds.labels.push_back(label);
  }
  return ds;
}

std::vector<Batch> make_batches(int n, int batch_size, uint64_t seed, bool shuffle) {
  if (batch_size < 1) throw ConfigError("make_batches: batch_size must be >= 1");
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  if (shuffle) {
    Rng rng(seed);
    rng.shuffle(order);
  }
  std::vector<Batch> out;
  for (int at = 0; at < n; at += batch_size) {
    Batch b;
    const int end = std::min(n, at + batch_size);
    b.indices.assign(order.begin() + at, order.begin() + end);
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace msnn::data
