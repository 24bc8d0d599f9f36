/*
 * Copyright 2026 The MHKA Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "mhka/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace mhka {
namespace {

constexpr char kMagic[8] = {'M', 'H', 'K', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename U>
void put(std::ostream& out, U value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(U));
}

template <typename U>
U get(std::istream& in, const std::filesystem::path& path) {
  U value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(U));
  if (!in) fail(ErrorKind::kCheckpoint, "truncated checkpoint " + path.string());
  return value;
}

std::string get_string(std::istream& in, std::size_t n,
                       const std::filesystem::path& path) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) fail(ErrorKind::kCheckpoint, "truncated checkpoint " + path.string());
  return s;
}

}  // namespace

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path,
                     const ParameterStore<T>& params, nlohmann::json header) {
  header["precision"] = precision_name<T>();
  const std::string header_text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kFile, "cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, header_text.size());
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  put<std::uint64_t>(out, params.size());
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t extent : p.value.shape()) put<std::uint64_t>(out, extent);
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(T)));
  }
  if (!out) fail(ErrorKind::kFile, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kFile, "cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    fail(ErrorKind::kCheckpoint, path.string() + " is not a checkpoint");
  }
  if (get<std::uint32_t>(in, path) != kVersion) {
    fail(ErrorKind::kCheckpoint, "unsupported checkpoint version in " + path.string());
  }
  Checkpoint ckpt;
  const auto header_bytes = get<std::uint64_t>(in, path);
  try {
    ckpt.header = nlohmann::json::parse(get_string(in, header_bytes, path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kCheckpoint, "bad checkpoint header: " + std::string(e.what()));
  }
  const std::string precision = ckpt.header.value("precision", "");
  if (precision != "f32" && precision != "f64") {
    fail(ErrorKind::kCheckpoint, "unknown precision '" + precision + "'");
  }
  const bool f32 = precision == "f32";
  const auto count = get<std::uint64_t>(in, path);
  for (std::uint64_t e = 0; e < count; ++e) {
    CheckpointEntry entry;
    entry.name = get_string(in, get<std::uint32_t>(in, path), path);
    const auto rank = get<std::uint32_t>(in, path);
    for (std::uint32_t r = 0; r < rank; ++r) {
      entry.shape.push_back(get<std::uint64_t>(in, path));
    }
    const std::size_t n = shape_size(entry.shape);
    entry.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      entry.values[i] = f32 ? static_cast<double>(get<float>(in, path))
                            : get<double>(in, path);
    }
    ckpt.entries.push_back(std::move(entry));
  }
  return ckpt;
}

template <typename T>
void restore_parameters(const Checkpoint& checkpoint, ParameterStore<T>& params,
                        const std::function<bool(const std::string&)>& skip) {
  for (auto& p : params) {
    if (skip && skip(p.name)) continue;
    const CheckpointEntry* e = checkpoint.find(p.name);
    if (!e) fail(ErrorKind::kCheckpoint, "checkpoint lacks parameter " + p.name);
    if (e->shape != p.value.shape()) {
      fail(ErrorKind::kCheckpoint, "parameter " + p.name + " has shape " +
                                       shape_to_string(p.value.shape()) +
                                       " but checkpoint stores " +
                                       shape_to_string(e->shape));
    }
    for (std::size_t i = 0; i < e->values.size(); ++i) {
      p.value[i] = static_cast<T>(e->values[i]);
    }
  }
}

template void save_checkpoint<float>(const std::filesystem::path&,
                                     const ParameterStore<float>&, nlohmann::json);
template void save_checkpoint<double>(const std::filesystem::path&,
                                      const ParameterStore<double>&, nlohmann::json);
template void restore_parameters<float>(
    const Checkpoint&, ParameterStore<float>&,
    const std::function<bool(const std::string&)>&);
template void restore_parameters<double>(
    const Checkpoint&, ParameterStore<double>&,
    const std::function<bool(const std::string&)>&);

}  // namespace mhka
