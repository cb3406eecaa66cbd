// Copyright 2026 The eqseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EQSEG_ERROR_HPP_
#define EQSEG_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace eqseg {

// Stable numeric codes; mirrored by eqseg_status in the C API.
enum class ErrorCode : int {
  kValidation = 1,
  kGeometry = 2,
  kIndex = 3,
  kLookup = 4,
  kIntegrity = 5,
  kIo = 6,
  kFormat = 7,
  kConfig = 8,
  kNumeric = 9,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define EQSEG_DEFINE_ERROR(Name, Code)                           \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& what) : Error(Code, what) {} \
  };

EQSEG_DEFINE_ERROR(ValidationError, ErrorCode::kValidation)
EQSEG_DEFINE_ERROR(GeometryError, ErrorCode::kGeometry)
EQSEG_DEFINE_ERROR(IndexError, ErrorCode::kIndex)
EQSEG_DEFINE_ERROR(LookupError, ErrorCode::kLookup)
EQSEG_DEFINE_ERROR(IntegrityError, ErrorCode::kIntegrity)
EQSEG_DEFINE_ERROR(IoError, ErrorCode::kIo)
EQSEG_DEFINE_ERROR(FormatError, ErrorCode::kFormat)
EQSEG_DEFINE_ERROR(ConfigError, ErrorCode::kConfig)
EQSEG_DEFINE_ERROR(NumericError, ErrorCode::kNumeric)

#undef EQSEG_DEFINE_ERROR

}  // namespace eqseg

#endif  // EQSEG_ERROR_HPP_
