// Model checkpoint container ("ADEA"):
//
//   bytes 0..3   magic "ADEA"
//   u32 LE       format version (1)
//   u32 LE       architecture id
//   u32 LE x3    input shape C, H, W
//   u32 LE       numClasses
//   u32 LE       model name length, then name bytes
//   u32 LE       parameter count
//   per parameter:
//     u32 LE     name length, then name bytes
//     u32 LE     rank
//     u64 LE x rank  extents
//     f64 LE x n     values, row-major

#pragma once

#include <fstream>
#include <string>

#include "dataset.hpp"
#include "models.hpp"

namespace adaea {

inline void write_tensor_blob(std::ostream& os, const Tensor& t) {
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) detail::write_le<std::uint64_t>(os, d);
  for (double v : t.data()) detail::write_le_double(os, v);
}

inline Tensor read_tensor_blob(std::istream& is) {
  std::uint32_t rank = detail::read_le<std::uint32_t>(is, "tensor rank");
  if (rank == 0 || rank > 4) throw FormatError("tensor rank out of range");
  std::vector<std::size_t> shape;
  for (std::uint32_t i = 0; i < rank; ++i)
    shape.push_back(static_cast<std::size_t>(
        detail::read_le<std::uint64_t>(is, "tensor extent")));
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = detail::read_le_double(is, "tensor value");
  return t;
}

inline void save_checkpoint(const Classifier& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  os.write("ADEA", 4);
  detail::write_le<std::uint32_t>(os, 1);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.arch()));
  const Shape3 in = model.input_shape();
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(in.c));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(in.h));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(in.w));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.num_classes()));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.name().size()));
  os.write(model.name().data(), static_cast<std::streamsize>(model.name().size()));
  const auto& params = model.params();
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_tensor_blob(os, p.value);
  }
  if (!os) throw IoError("write failed: " + path);
}

inline std::unique_ptr<Classifier> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "ADEA", 4) != 0)
    throw FormatError("bad checkpoint magic at offset 0: " + path);
  std::uint32_t version = detail::read_le<std::uint32_t>(is, "version");
  if (version != 1) throw FormatError("unsupported checkpoint version");
  std::uint32_t arch = detail::read_le<std::uint32_t>(is, "arch");
  if (arch > 3) throw FormatError("unknown architecture id in checkpoint");
  Shape3 in;
  in.c = detail::read_le<std::uint32_t>(is, "C");
  in.h = detail::read_le<std::uint32_t>(is, "H");
  in.w = detail::read_le<std::uint32_t>(is, "W");
  std::uint32_t classes = detail::read_le<std::uint32_t>(is, "numClasses");
  std::uint32_t name_len = detail::read_le<std::uint32_t>(is, "name length");
  std::string name(name_len, '\0');
  if (name_len && !is.read(name.data(), name_len))
    throw FormatError("truncated model name");

  auto model = make_classifier(static_cast<ArchId>(arch), in, classes, 0, name);
  auto& params = model->params();
  std::uint32_t count = detail::read_le<std::uint32_t>(is, "param count");
  if (count != params.size())
    throw FormatError("checkpoint parameter count mismatch");
  for (auto& p : params) {
    std::uint32_t plen = detail::read_le<std::uint32_t>(is, "param name length");
    std::string pname(plen, '\0');
    if (plen && !is.read(pname.data(), plen))
      throw FormatError("truncated parameter name");
    if (pname != p.name)
      throw FormatError("checkpoint parameter name mismatch: " + pname);
    Tensor t = read_tensor_blob(is);
    if (!t.same_shape(p.value))
      throw FormatError("checkpoint parameter shape mismatch: " + pname);
    p.value = std::move(t);
  }
  return model;
}

}  // namespace adaea
