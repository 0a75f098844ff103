#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "proxyevent/diffcore/adam.hpp"
#include "proxyevent/diffcore/params.hpp"

namespace proxyevent::diffcore {

// Binary checkpoint layout (all integers little-endian):
//
//   magic   8 bytes  "PXEVCKPT"
//   u32     format version
//   u32     metadata entry count, then per entry: u32 len, key, u64 len, value
//   u32     tensor count, then per tensor:
//             u32 len, name, u32 rank, u64 dims[rank], f64 payload[numel]
//
// Doubles are stored as raw IEEE-754 bits, so save/load is bitwise exact.

inline constexpr char kCheckpointMagic[8] = {'P', 'X', 'E', 'V', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::istream& is, const std::string& what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ValidationError("truncated checkpoint while reading " + what);
  return v;
}

inline std::string take_string(std::istream& is, std::uint64_t len, const std::string& what) {
  if (len > (1ull << 32)) throw ValidationError("implausible string length in checkpoint (" + what + ")");
  std::string s(len, '\0');
  if (len && !is.read(s.data(), static_cast<std::streamsize>(len))) throw ValidationError("truncated checkpoint while reading " + what);
  return s;
}

}  // namespace detail

inline void write_checkpoint(const Checkpoint& ckpt, std::ostream& os) {
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put<std::uint32_t>(os, kCheckpointVersion);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(k.size()));
    os.write(k.data(), static_cast<std::streamsize>(k.size()));
    detail::put<std::uint64_t>(os, v.size());
    os.write(v.data(), static_cast<std::streamsize>(v.size()));
  }
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape().size()));
    for (auto d : t.shape()) detail::put<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
}

inline Checkpoint read_checkpoint(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw ValidationError("not a checkpoint file (bad magic)");
  const auto version = detail::take<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion)
    throw ValidationError("unsupported checkpoint format version " + std::to_string(version));
  Checkpoint ckpt;
  const auto nmeta = detail::take<std::uint32_t>(is, "metadata count");
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    auto key = detail::take_string(is, detail::take<std::uint32_t>(is, "key length"), "metadata key");
    auto val = detail::take_string(is, detail::take<std::uint64_t>(is, "value length"), "metadata value");
    ckpt.meta.emplace(std::move(key), std::move(val));
  }
  const auto ntensors = detail::take<std::uint32_t>(is, "tensor count");
  for (std::uint32_t i = 0; i < ntensors; ++i) {
    auto name = detail::take_string(is, detail::take<std::uint32_t>(is, "name length"), "tensor name");
    const auto rank = detail::take<std::uint32_t>(is, "rank of " + name);
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(detail::take<std::uint64_t>(is, "shape of " + name));
    std::vector<double> values(numel_of(shape));
    if (!values.empty() &&
        !is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double))))
      throw ValidationError("truncated checkpoint payload for '" + name + "'");
    ckpt.tensors.emplace_back(std::move(name), Tensor::from(std::move(shape), std::move(values)));
  }
  return ckpt;
}

/// Writes to a sibling temp file and renames, so an interrupted save never
/// leaves a half-written checkpoint behind.
inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + tmp.string() + "' for writing");
    write_checkpoint(ckpt, os);
    if (!os) throw IoError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at '" + path.string() + "': " + ec.message());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(is);
}

inline void store_params(Checkpoint& ckpt, const ParamStore& params) {
  for (const auto& p : params.all()) ckpt.tensors.emplace_back(p.name, p.value.detach());
}

/// Copies payloads into existing parameters; names and shapes must match.
inline void restore_params(const Checkpoint& ckpt, ParamStore& params) {
  for (auto& p : params.all()) {
    const Tensor* t = ckpt.find(p.name);
    if (t == nullptr) throw ValidationError("checkpoint lacks parameter '" + p.name + "'");
    if (t->shape() != p.value.shape())
      throw ValidationError("parameter '" + p.name + "' has shape " + shape_str(p.value.shape()) + " but checkpoint stores " +
                            shape_str(t->shape()));
    p.value.data() = t->data();
  }
}

inline void store_adam(Checkpoint& ckpt, const Adam& adam) {
  ckpt.meta["adam.step"] = std::to_string(adam.step_count());
  for (const auto& [name, mom] : adam.moments()) {
    ckpt.tensors.emplace_back("adam.m." + name, Tensor::from({mom.m.size()}, mom.m));
    ckpt.tensors.emplace_back("adam.v." + name, Tensor::from({mom.v.size()}, mom.v));
  }
}

inline void restore_adam(const Checkpoint& ckpt, Adam& adam) {
  auto it = ckpt.meta.find("adam.step");
  if (it == ckpt.meta.end()) throw ValidationError("checkpoint has no optimizer state");
  adam.set_step_count(std::stol(it->second));
  adam.moments().clear();
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.rfind("adam.m.", 0) == 0) adam.moments()[name.substr(7)].m = t.data();
    if (name.rfind("adam.v.", 0) == 0) adam.moments()[name.substr(7)].v = t.data();
  }
}

}  // namespace proxyevent::diffcore
