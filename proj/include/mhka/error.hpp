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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mhka {

// Every failure raised by the library carries a category. The CLI maps the
// category onto a message prefix and an exit status.
enum class ErrorKind {
  kDimension,
  kParameter,
  kLabel,
  kContract,
  kCorpus,
  kEncoding,
  kParse,
  kData,
  kConfig,
  kRelation,
  kSpec,
  kCheckpoint,
  kTraining,
  kUsage,
  kFile,
  kReplay,
};

std::string_view error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + " error: " +
                           message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kParameter: return "parameter";
    case ErrorKind::kLabel: return "label";
    case ErrorKind::kContract: return "contract";
    case ErrorKind::kCorpus: return "corpus";
    case ErrorKind::kEncoding: return "encoding";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kData: return "data";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kRelation: return "relation";
    case ErrorKind::kSpec: return "spec";
    case ErrorKind::kCheckpoint: return "checkpoint";
    case ErrorKind::kTraining: return "training";
    case ErrorKind::kUsage: return "usage";
    case ErrorKind::kFile: return "file";
    case ErrorKind::kReplay: return "replay";
  }
  return "unknown";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace mhka
