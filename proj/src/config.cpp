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

#include "ddpsgd/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ddpsgd/hash.hpp"

namespace ddpsgd {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) {
    throw InvalidArgument("config key " + key + ": '" + v +
                          "' is not a number");
  }
  return out;
}

}  // namespace

const std::vector<ConfigKey>& RunConfig::keys() {
  static const std::vector<ConfigKey> k = {
      {"experiment", "run", "free-form run name"},
      {"output.dir", "out", "directory for CSV, JSON and the resolved config"},
      {"data.images", "data/mnist/images-idx3-ubyte", "IDX3 image file"},
      {"data.labels", "data/mnist/labels-idx1-ubyte", "IDX1 label file"},
      {"data.train_size", "8000", "records in the training split"},
      {"data.test_size", "2000", "records in the test split (0 = the rest)"},
      {"data.split_seed", "7", "seed of the train/test split"},
      {"codebook.path", "", "codebook file; empty generates in memory"},
      {"codebook.size", "1000", "codewords when generating"},
      {"codebook.seed", "1", "generation seed"},
      {"train.seed", "0", "seed for init, sampling and noise"},
      {"train.q", "0.01", "per-record inclusion probability"},
      {"train.micro_batch_size", "1", "records per encoded micro-batch"},
      {"train.iterations", "2000", "iterations T"},
      {"train.eta", "0.05", "learning rate"},
      {"train.eval_every", "100", "accuracy checkpoint interval"},
      {"train.hidden", "32", "hidden units"},
      {"train.baseline", "false", "clip-and-Gaussian baseline instead of "
                                  "codebook encoding"},
      {"train.clip_bound", "1", "baseline clip bound"},
      {"noise.family", "gaussian",
       "gaussian|student_t|laplace|cauchy|variance_gamma|hyperbolic_secant"},
      {"noise.variance", "1.21", "noise variance"},
      {"noise.shape", "0", "dof (student_t) or lambda (variance_gamma)"},
      {"noise.schedule", "",
       "optional per-iteration list of family:variance[:shape]"},
      {"denoise.enabled", "true", "KS rescaling of privatized gradients"},
      {"denoise.threshold", "0", "skip updates with KS <= threshold"},
      {"privacy.delta", "1e-05", "delta for the (eps, delta) conversion"},
      {"privacy.alpha_max", "64", "largest integer Renyi order"},
      {"sweep.family", "gaussian", "noise family swept by `sweep`"},
      {"sweep.variances", "0.8,1.0,1.2,1.4", "variances swept by `sweep`"},
      {"sweep.shape", "0", "shape parameter for the swept family"},
      {"l1.families", "student_t,gaussian,laplace", "families compared"},
      {"l1.dof", "9", "Student-t degrees of freedom"},
      {"l1.targets", "0.1,0.18,0.26,0.34,0.42,0.5", "alpha=2 RDP targets"},
      {"l1.dim", "10", "synthetic gradient dimension"},
      {"l1.codebook_size", "16", "codewords in the synthetic codebook"},
      {"l1.q", "1", "sampling rate used in the alpha=2 calibration"},
      {"l1.trials", "200000", "Monte-Carlo trials per grid point"},
      {"histogram.bins", "100", "histogram bins"},
      {"histogram.records", "1000", "training records pooled (0 = all)"},
  };
  return k;
}

RunConfig::RunConfig() {
  for (const auto& k : keys()) values_[k.name] = k.default_value;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& source) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument(source + ":" + std::to_string(lineno) +
                            ": expected key = value");
    }
    try {
      cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(source + ":" + std::to_string(lineno) + ": " +
                            e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str(), path);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw InvalidArgument("unknown config key " + key);
  it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw InvalidArgument("unknown config key " + key);
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  return to_double(key, get(key));
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  const auto& v = get(key);
  std::int64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) {
    throw InvalidArgument("config key " + key + ": '" + v +
                          "' is not an integer");
  }
  return out;
}

std::uint64_t RunConfig::get_uint(const std::string& key) const {
  const auto& v = get(key);
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) {
    throw InvalidArgument("config key " + key + ": '" + v +
                          "' is not a nonnegative integer");
  }
  return out;
}

bool RunConfig::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidArgument("config key " + key + ": '" + v + "' is not a bool");
}

std::vector<double> RunConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : split_list(get(key), ',')) out.push_back(to_double(key, s));
  return out;
}

std::vector<std::string> RunConfig::get_strings(const std::string& key) const {
  return split_list(get(key), ',');
}

std::string RunConfig::resolved() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
  return os.str();
}

std::string RunConfig::hash() const {
  RunConfig copy = *this;
  copy.values_.erase("output.dir");
  return hex64(fnv1a64(copy.resolved()));
}

NoiseSpec parse_noise_entry(const std::string& entry) {
  const auto parts = split_list(entry, ':');
  if (parts.size() < 2 || parts.size() > 3) {
    throw InvalidArgument("noise entry '" + entry +
                          "' must be family:variance[:shape]");
  }
  const double shape = parts.size() == 3 ? to_double("noise", parts[2]) : 0.0;
  return NoiseSpec::make(parse_family(parts[0]), to_double("noise", parts[1]),
                         shape);
}

std::vector<NoiseSpec> RunConfig::noise_schedule() const {
  const auto entries = get_strings("noise.schedule");
  std::vector<NoiseSpec> out;
  for (const auto& e : entries) out.push_back(parse_noise_entry(e));
  if (out.empty()) {
    out.push_back(NoiseSpec::make(parse_family(get("noise.family")),
                                  get_double("noise.variance"),
                                  get_double("noise.shape")));
  }
  return out;
}

TrainingConfig RunConfig::training() const {
  TrainingConfig c;
  c.q = get_double("train.q");
  c.micro_batch_size = get_int("train.micro_batch_size");
  c.iterations = get_int("train.iterations");
  c.eta = get_double("train.eta");
  c.noise_schedule = noise_schedule();
  c.denoise.enabled = get_bool("denoise.enabled");
  c.denoise.threshold = get_double("denoise.threshold");
  c.seed = get_uint("train.seed");
  c.eval_every = get_int("train.eval_every");
  c.baseline_mode = get_bool("train.baseline");
  c.clip_bound = get_double("train.clip_bound");
  c.hidden = get_int("train.hidden");
  c.delta = get_double("privacy.delta");
  c.alpha_max = static_cast<int>(get_int("privacy.alpha_max"));
  c.validate();
  return c;
}

}  // namespace ddpsgd
