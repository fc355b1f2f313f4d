// Labeled image datasets: synthetic Gaussian-blob generation plus two file
// formats — standard IDX (big-endian, magic 0x803/0x801) and the project's
// own FlatBinary container:
//
//   FlatBinary dataset ("ADDS"):
//     bytes 0..3   magic "ADDS"
//     u32 LE       format version (1)
//     u64 LE       image count N
//     u32 LE x3    C, H, W
//     u32 LE       numClasses
//     u32 LE x N   labels
//     f64 LE x N*C*H*W  images, row-major per image

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace adaea {

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LabeledDataset {
  std::vector<Image> images;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return images.size(); }

  void validate() const {
    if (images.size() != labels.size())
      throw DataError("dataset: image/label count mismatch");
    for (std::size_t l : labels)
      if (l >= num_classes) throw DataError("dataset: label out of range");
    for (std::size_t i = 1; i < images.size(); ++i)
      if (!images[i].same_shape(images[0]))
        throw DataError("dataset: inconsistent image shapes");
  }
};

struct SyntheticSpec {
  std::size_t num_classes = 4;
  std::size_t count = 512;
  std::size_t channels = 3;
  std::size_t height = 16;
  std::size_t width = 16;
  double amplitude = 0.02;      // class-template contrast around 0.5
  double noise_sigma = 0.1;     // per-pixel Gaussian noise
  double channel_shift = 0.022; // class-dependent per-channel mean offset
  std::uint64_t seed = 7;
};

// Sign pattern giving each class a distinct per-channel mean offset. Rows of
// a 4x4 Hadamard matrix (first column dropped) keep any two classes apart in
// at least two channels; classes past four reuse rows with a flipped sign.
inline double class_channel_sign(std::size_t label, std::size_t channel) {
  static const int kPattern[4][3] = {
      {+1, +1, +1}, {-1, +1, -1}, {+1, -1, -1}, {-1, -1, +1}};
  const double flip = (label / 4) % 2 ? -1.0 : 1.0;
  return flip * kPattern[label % 4][channel % 3];
}

// Class templates are fixed random patterns around mid-gray plus a class
// channel-mean offset (so pooling architectures see the class too); samples
// add per-pixel Gaussian noise and clamp to [0,1]. Deterministic under seed.
inline LabeledDataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.num_classes < 2) throw std::invalid_argument("synthetic: num_classes < 2");
  if (spec.count == 0) throw std::invalid_argument("synthetic: count == 0");
  const std::vector<std::size_t> shape{spec.channels, spec.height, spec.width};

  std::vector<Image> templates;
  RngStream tmpl_rng(derive_seed(spec.seed, 0));
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    Image t(shape);
    for (std::size_t ch = 0; ch < spec.channels; ++ch) {
      const double shift = spec.channel_shift * class_channel_sign(c, ch);
      for (std::size_t p = 0; p < spec.height * spec.width; ++p)
        t[ch * spec.height * spec.width + p] =
            0.5 + shift + spec.amplitude * tmpl_rng.uniform(-1.0, 1.0);
    }
    templates.push_back(std::move(t));
  }

  LabeledDataset ds;
  ds.num_classes = spec.num_classes;
  RngStream rng(derive_seed(spec.seed, 1));
  for (std::size_t n = 0; n < spec.count; ++n) {
    std::size_t label = n % spec.num_classes;
    Image img = templates[label];
    for (std::size_t i = 0; i < img.size(); ++i)
      img[i] = std::clamp(img[i] + spec.noise_sigma * rng.normal(), 0.0, 1.0);
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }
  ds.validate();
  return ds;
}

// ---- little-endian primitives --------------------------------------------

namespace detail {

template <typename T>
inline void write_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

inline void write_le_double(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  write_le<std::uint64_t>(os, bits);
}

template <typename T>
inline T read_le(std::istream& is, const char* what) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T)))
    throw FormatError(std::string("truncated read: ") + what);
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<T>(v);
}

inline double read_le_double(std::istream& is, const char* what) {
  std::uint64_t bits = read_le<std::uint64_t>(is, what);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

inline std::uint32_t read_be_u32(std::istream& is, const char* what) {
  unsigned char buf[4];
  if (!is.read(reinterpret_cast<char*>(buf), 4))
    throw FormatError(std::string("truncated read: ") + what);
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace detail

// ---- FlatBinary container -------------------------------------------------

inline void save_flat_binary(const LabeledDataset& ds, const std::string& path) {
  ds.validate();
  if (ds.images.empty()) throw DataError("save_flat_binary: empty dataset");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  os.write("ADDS", 4);
  detail::write_le<std::uint32_t>(os, 1);
  detail::write_le<std::uint64_t>(os, ds.images.size());
  const auto& sh = ds.images[0].shape();
  for (std::size_t d : sh) detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.num_classes));
  for (std::size_t l : ds.labels)
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(l));
  for (const Image& img : ds.images)
    for (double v : img.data()) detail::write_le_double(os, v);
  if (!os) throw IoError("write failed: " + path);
}

inline LabeledDataset load_flat_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "ADDS", 4) != 0)
    throw FormatError("bad FlatBinary magic at offset 0: " + path);
  std::uint32_t version = detail::read_le<std::uint32_t>(is, "version");
  if (version != 1) throw FormatError("unsupported FlatBinary version");
  std::uint64_t count = detail::read_le<std::uint64_t>(is, "count");
  std::size_t C = detail::read_le<std::uint32_t>(is, "channels");
  std::size_t H = detail::read_le<std::uint32_t>(is, "height");
  std::size_t W = detail::read_le<std::uint32_t>(is, "width");
  std::size_t num_classes = detail::read_le<std::uint32_t>(is, "numClasses");
  LabeledDataset ds;
  ds.num_classes = num_classes;
  for (std::uint64_t i = 0; i < count; ++i)
    ds.labels.push_back(detail::read_le<std::uint32_t>(is, "label"));
  for (std::uint64_t i = 0; i < count; ++i) {
    Image img({C, H, W});
    for (std::size_t j = 0; j < img.size(); ++j)
      img[j] = detail::read_le_double(is, "pixel");
    ds.images.push_back(std::move(img));
  }
  ds.validate();
  return ds;
}

// ---- IDX ------------------------------------------------------------------

// Standard IDX pair: an image file (magic 0x00000803, u8 pixels, shape
// N x H x W) and a label file (magic 0x00000801). Pixels normalize to [0,1];
// single-channel images load as (1,H,W).
inline LabeledDataset load_idx(const std::string& image_path,
                               const std::string& label_path,
                               std::size_t num_classes) {
  std::ifstream imgs(image_path, std::ios::binary);
  if (!imgs) throw IoError("cannot open: " + image_path);
  std::uint32_t magic = detail::read_be_u32(imgs, "image magic");
  if (magic != 0x00000803)
    throw FormatError("bad IDX image magic at offset 0: " + image_path);
  std::uint32_t n = detail::read_be_u32(imgs, "image count");
  std::uint32_t h = detail::read_be_u32(imgs, "rows");
  std::uint32_t w = detail::read_be_u32(imgs, "cols");

  std::ifstream labs(label_path, std::ios::binary);
  if (!labs) throw IoError("cannot open: " + label_path);
  std::uint32_t lmagic = detail::read_be_u32(labs, "label magic");
  if (lmagic != 0x00000801)
    throw FormatError("bad IDX label magic at offset 0: " + label_path);
  std::uint32_t ln = detail::read_be_u32(labs, "label count");
  if (ln != n) throw FormatError("IDX image/label count mismatch");

  LabeledDataset ds;
  ds.num_classes = num_classes;
  std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!imgs.read(reinterpret_cast<char*>(buf.data()),
                   static_cast<std::streamsize>(buf.size())))
      throw FormatError("truncated IDX image data");
    Image img({1, h, w});
    for (std::size_t j = 0; j < buf.size(); ++j) img[j] = buf[j] / 255.0;
    ds.images.push_back(std::move(img));
    char lb;
    if (!labs.read(&lb, 1)) throw FormatError("truncated IDX label data");
    ds.labels.push_back(static_cast<unsigned char>(lb));
  }
  ds.validate();
  return ds;
}

}  // namespace adaea
