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

// Run configuration as a flat `key = value` document.
//
// Lines starting with '#' and blank lines are ignored. Every key has a
// documented default (see RunConfig::keys()); unknown keys are an error.
// Lists are comma separated.

#ifndef DDPSGD_CONFIG_HPP_
#define DDPSGD_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ddpsgd/noise.hpp"
#include "ddpsgd/trainer.hpp"

namespace ddpsgd {

inline constexpr const char* kVersion = "0.1.0";

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string doc;
};

class RunConfig {
 public:
  // All keys at their defaults.
  RunConfig();

  static const std::vector<ConfigKey>& keys();

  // Parses `text`; `source` names it in error messages.
  static RunConfig parse(const std::string& text,
                         const std::string& source = "<config>");
  static RunConfig load(const std::string& path);

  // Throws InvalidArgument for unknown keys.
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;

  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& key) const;

  // Every key in sorted order, one `key = value` per line.
  std::string resolved() const;
  // FNV-1a of resolved() without output.dir, hex. Reruns into another
  // directory keep the same hash.
  std::string hash() const;

  // The noise schedule: `noise.schedule` if set, else the single spec from
  // noise.family / noise.variance / noise.shape.
  std::vector<NoiseSpec> noise_schedule() const;
  TrainingConfig training() const;

 private:
  std::map<std::string, std::string> values_;
};

// "family:variance[:shape]".
NoiseSpec parse_noise_entry(const std::string& entry);

}  // namespace ddpsgd

#endif  // DDPSGD_CONFIG_HPP_
