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

#include "ddpsgd/types.hpp"

namespace ddpsgd {

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::kRaw:
      return "raw";
    case Stage::kEncoded:
      return "encoded";
    case Stage::kAggregated:
      return "aggregated";
    case Stage::kPrivatized:
      return "privatized";
    case Stage::kDenoised:
      return "denoised";
  }
  return "unknown";
}

}  // namespace ddpsgd
