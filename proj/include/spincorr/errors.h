// Copyright 2026 The spincorr Authors
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

#ifndef SPINCORR_ERRORS_H
#define SPINCORR_ERRORS_H

#include <stdexcept>
#include <string>

namespace spincorr {

/// Malformed or inconsistent configuration. `path` names the offending key.
class ConfigError : public std::runtime_error {
   public:
    ConfigError(std::string path, const std::string &what)
        : std::runtime_error(path + ": " + what), path_(std::move(path)) {
    }
    const std::string &path() const {
        return path_;
    }

   private:
    std::string path_;
};

/// Input data that does not satisfy a stage's preconditions (length, cadence, schema).
class DataError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// A numerical routine failed in a way that indicates a bug or unusable input.
class NumericalError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

}  // namespace spincorr

#endif
