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

// Command implementations. Every command reads a fully resolved option
// object (the one stored in the run manifest) and writes its reports under
// options["out"].

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "mhka/synth.hpp"

namespace mhka::cli {

SynthConfig synth_from_json(const nlohmann::json& j);
nlohmann::json synth_to_json(const SynthConfig& c);

// Returns the process exit status (non-zero only for a failed gradcheck).
int run_command(const nlohmann::json& options);

// Writes manifest.json into options["out"], hashing every other file there.
nlohmann::json write_manifest(const nlohmann::json& options);

// Hex FNV-1a of a file's bytes.
std::string file_digest(const std::filesystem::path& path);

}  // namespace mhka::cli
