#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "docmt/error.hpp"
#include "docmt/params.hpp"

namespace docmt {

// Checkpoints are a little-endian binary container of named matrices:
//   magic "DMCK" | u32 version | u32 scalar width in bytes | u64 count
//   then per entry: u32 name length | name | u64 rows | u64 cols | raw data
// Row-major scalars follow each header immediately.
static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace detail {

constexpr char kCheckpointMagic[4] = {'D', 'M', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointError("truncated checkpoint: " + path);
  return v;
}

}  // namespace detail

template <typename S>
void save_params(const ParamStore<S>& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path);
  out.write(detail::kCheckpointMagic, 4);
  detail::write_raw(out, detail::kCheckpointVersion);
  detail::write_raw(out, static_cast<std::uint32_t>(sizeof(S)));
  detail::write_raw(out, static_cast<std::uint64_t>(store.count()));
  for (const auto& [name, p] : store.entries()) {
    detail::write_raw(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_raw(out, static_cast<std::uint64_t>(p.value.rows()));
    detail::write_raw(out, static_cast<std::uint64_t>(p.value.cols()));
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(sizeof(S) * p.value.size()));
  }
  if (!out) throw CheckpointError("failed writing checkpoint: " + path);
}

/// Scalar width recorded in a checkpoint header (4 or 8).
inline std::uint32_t checkpoint_precision(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != std::string(detail::kCheckpointMagic, 4))
    throw CheckpointError("not a checkpoint file: " + path);
  auto version = detail::read_raw<std::uint32_t>(in, path);
  if (version != detail::kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version) + ": " + path);
  return detail::read_raw<std::uint32_t>(in, path);
}

template <typename S>
ParamStore<S> load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != std::string(detail::kCheckpointMagic, 4))
    throw CheckpointError("not a checkpoint file: " + path);
  auto version = detail::read_raw<std::uint32_t>(in, path);
  if (version != detail::kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version) + ": " + path);
  auto width = detail::read_raw<std::uint32_t>(in, path);
  if (width != sizeof(S))
    throw CheckpointError("precision mismatch: checkpoint holds " +
                          std::to_string(width * 8) + "-bit scalars, expected " +
                          std::to_string(sizeof(S) * 8) + "-bit: " + path);
  auto count = detail::read_raw<std::uint64_t>(in, path);
  ParamStore<S> store;
  for (std::uint64_t i = 0; i < count; ++i) {
    auto name_len = detail::read_raw<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw CheckpointError("truncated checkpoint: " + path);
    auto rows = detail::read_raw<std::uint64_t>(in, path);
    auto cols = detail::read_raw<std::uint64_t>(in, path);
    MatrixOf<S> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(S) * m.size()));
    if (!in) throw CheckpointError("truncated checkpoint: " + path);
    store.add(name, std::move(m));
  }
  return store;
}

}  // namespace docmt
