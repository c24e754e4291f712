// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FLOCK_ERROR_HPP
#define FLOCK_ERROR_HPP

#include <stdexcept>
#include <string>

namespace flock {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Raised when ingestion yields nothing usable.
class EmptyInputError : public Error {
public:
    using Error::Error;
};

/// A view feature outside the feasible triangle, or a zero-length broadcast.
class FeatureError : public Error {
public:
    using Error::Error;
};

class EmptyDistributionError : public Error {
public:
    using Error::Error;
};

/// KL divergence is undefined: the model has zero mass where the observation has support.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Pruning would empty the broadcast, or the oracle was asked for too many instances.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Persisted bracket models do not match the requested configuration.
class ModelMismatchError : public Error {
public:
    using Error::Error;
};

}  // namespace flock

#endif  // FLOCK_ERROR_HPP
