// Copyright 2026 The ddpsgd Authors
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

#ifndef DDPSGD_TYPES_HPP_
#define DDPSGD_TYPES_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace ddpsgd {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Index = Eigen::Index;
using Seed = std::uint64_t;

// Lifecycle of a model-sized gradient inside one training iteration.
enum class Stage { kRaw, kEncoded, kAggregated, kPrivatized, kDenoised };

const char* stage_name(Stage stage);

// A dense gradient of model dimension tagged with its pipeline stage. Stage
// transitions never change the dimension.
template <typename Scalar>
struct BasicGradient {
  Vector<Scalar> values;
  Stage stage = Stage::kRaw;

  Index dim() const { return values.size(); }
};

using GradientVector = BasicGradient<double>;

// Raised for precondition violations on user-supplied inputs.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a numerical routine cannot produce a trustworthy value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised for malformed files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ddpsgd

#endif  // DDPSGD_TYPES_HPP_
