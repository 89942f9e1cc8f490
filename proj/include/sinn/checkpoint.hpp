// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sinn/error.hpp"
#include "sinn/model.hpp"

namespace sinn {

namespace detail {

// Checkpoint container, version "sinn-ckpt-1". All integers little-endian:
//   magic      12 bytes "sinn-ckpt-1\0"
//   u32        variant tag (0 logistic, 1 topdown, 2 binn, 3 sinn)
//   u32        feature dim
//   u64        graph hash
//   u32        layer count T, then T x u32 layer sizes
//   u32        tensor count, then per tensor in canonical tensor_refs order:
//     u16      name length, name bytes
//     u8       kind (0 matrix, 1 vector)
//     u32,u32  rows, cols (len, 1 for vectors)
//     f64[]    row-major payload, IEEE-754 bit pattern little-endian
inline constexpr char ckpt_magic[12] = {'s', 'i', 'n', 'n', '-', 'c',
                                        'k', 'p', 't', '-', '1', '\0'};

struct ByteWriter {
  std::string bytes;

  void u8(std::uint8_t v) { bytes.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
};

struct ByteReader {
  const std::string& bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > bytes.size()) throw ParseError("checkpoint truncated");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes[pos++]);
  }
  std::uint16_t u16() {
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(u8()) << (8 * i);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace detail

/// Serializes every tensor in canonical order; load(save(p)) == p bitwise.
inline std::string save_checkpoint(const ModelParams& p) {
  detail::ByteWriter w;
  w.bytes.append(detail::ckpt_magic, sizeof detail::ckpt_magic);
  w.u32(static_cast<std::uint32_t>(p.variant));
  w.u32(static_cast<std::uint32_t>(p.feature_dim));
  w.u64(p.graph_hash);
  w.u32(static_cast<std::uint32_t>(p.layer_sizes.size()));
  for (int n : p.layer_sizes) w.u32(static_cast<std::uint32_t>(n));

  std::vector<TensorRef> refs = tensor_refs(const_cast<ModelParams&>(p));
  w.u32(static_cast<std::uint32_t>(refs.size()));
  for (const TensorRef& r : refs) {
    w.u16(static_cast<std::uint16_t>(r.name.size()));
    w.bytes += r.name;
    w.u8(r.mat ? 0 : 1);
    if (r.mat) {
      w.u32(static_cast<std::uint32_t>(r.mat->rows));
      w.u32(static_cast<std::uint32_t>(r.mat->cols));
    } else {
      w.u32(static_cast<std::uint32_t>(r.vec->size()));
      w.u32(1);
    }
    const double* data = r.data();
    for (std::size_t i = 0; i < r.size(); ++i) w.f64(data[i]);
  }
  return w.bytes;
}

inline void save_checkpoint(const ModelParams& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  const std::string bytes = save_checkpoint(p);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint to '" + path + "'");
}

/// Rebuilds the parameter set and verifies every tensor's name and shape
/// against the canonical layout before accepting the payload.
inline ModelParams load_checkpoint(const std::string& bytes) {
  detail::ByteReader r{bytes};
  const std::string magic = r.str(sizeof detail::ckpt_magic);
  if (std::memcmp(magic.data(), detail::ckpt_magic, sizeof detail::ckpt_magic) != 0)
    throw ParseError("not a checkpoint file (bad magic)");

  const std::uint32_t variant_tag = r.u32();
  if (variant_tag > 3) throw ParseError("checkpoint names an unknown variant");
  const int feature_dim = static_cast<int>(r.u32());
  const std::uint64_t hash = r.u64();
  const std::uint32_t T = r.u32();
  if (T == 0 || T > 1024) throw ParseError("checkpoint layer count out of range");
  std::vector<int> sizes;
  sizes.reserve(T);
  for (std::uint32_t t = 0; t < T; ++t) {
    const std::uint32_t n = r.u32();
    if (n == 0 || n > 1u << 20) throw ParseError("checkpoint layer size out of range");
    sizes.push_back(static_cast<int>(n));
  }

  ModelParams p = make_params(static_cast<Variant>(variant_tag), std::move(sizes), feature_dim,
                              hash);
  std::vector<TensorRef> refs = tensor_refs(p);
  const std::uint32_t count = r.u32();
  if (count != refs.size())
    throw ParseError("checkpoint holds " + std::to_string(count) + " tensors, expected " +
                     std::to_string(refs.size()));
  for (TensorRef& ref : refs) {
    const std::string name = r.str(r.u16());
    if (name != ref.name)
      throw ParseError("checkpoint tensor '" + name + "' out of order, expected '" + ref.name +
                       "'");
    const std::uint8_t kind = r.u8();
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    const std::uint32_t want_rows =
        static_cast<std::uint32_t>(ref.mat ? ref.mat->rows : static_cast<int>(ref.vec->size()));
    const std::uint32_t want_cols = static_cast<std::uint32_t>(ref.mat ? ref.mat->cols : 1);
    if (kind != (ref.mat ? 0 : 1) || rows != want_rows || cols != want_cols)
      throw ParseError("checkpoint tensor '" + name + "' has unexpected shape");
    double* data = ref.data();
    for (std::size_t i = 0; i < ref.size(); ++i) data[i] = r.f64();
  }
  if (r.pos != bytes.size()) throw ParseError("checkpoint has trailing bytes");
  return p;
}

inline ModelParams load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_checkpoint(buf.str());
}

}  // namespace sinn
