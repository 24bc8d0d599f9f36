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

// Checkpoint archive.
//
// Layout (all integers little-endian):
//   "MHKACKPT"            8-byte magic
//   u32 version           currently 1
//   u64 header_bytes      followed by a UTF-8 JSON object; it always holds
//                         "precision" ("f32" or "f64") and whatever the
//                         writer adds (seed, model config, vocabulary, ...)
//   u64 entry_count
//   entry_count times:
//     u32 name_bytes, name
//     u32 rank, rank x u64 extents
//     product(extents) values in the header's precision
//
// Values are stored at the precision of the store that wrote them, so a
// save/load cycle at the same precision is bit-exact.

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mhka/parameters.hpp"

namespace mhka {

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  nlohmann::json header;
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& name) const;
};

template <typename T>
constexpr const char* precision_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path,
                     const ParameterStore<T>& params, nlohmann::json header);

Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies entries into same-named parameters. Shapes must match. Parameters
// rejected by `skip` are left untouched; every other parameter must be
// present in the checkpoint.
template <typename T>
void restore_parameters(const Checkpoint& checkpoint, ParameterStore<T>& params,
                        const std::function<bool(const std::string&)>& skip = {});

}  // namespace mhka
