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

// Experiment drivers shared by the command-line tool and the acceptance
// suite: data and codebook setup, noise calibration, sweeps and the L1
// distortion comparison.

#ifndef DDPSGD_EXPERIMENTS_HPP_
#define DDPSGD_EXPERIMENTS_HPP_

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ddpsgd/accountant.hpp"
#include "ddpsgd/codebook.hpp"
#include "ddpsgd/config.hpp"
#include "ddpsgd/data.hpp"

namespace ddpsgd {

// Train and test splits as configured by the data.* keys.
std::pair<Dataset, Dataset> load_splits(const RunConfig& cfg);

// Loads codebook.path when set, otherwise generates codebook.size codewords
// of dimension `dim`. Throws if a loaded codebook has another dimension.
Codebook resolve_codebook(const RunConfig& cfg, Index dim);

// Model parameter count implied by train.hidden and 784 inputs.
Index model_dim(const RunConfig& cfg);

// Variance v such that codebook_rdp(alpha, q, codebook, make(family, v,
// shape)) equals `target`, by bisection on log v. The residual is below
// `tolerance` on return; throws NumericalError otherwise.
double calibrate_variance(Family family, double shape, int alpha, double q,
                          const Codebook& codebook, double target,
                          MomentCache* cache = nullptr,
                          double tolerance = 1e-6);

struct L1Config {
  std::vector<NoiseSpec> families;  // variances are ignored
  std::vector<double> targets;
  Index dim = 10;
  Index codebook_size = 16;
  Seed codebook_seed = 1;
  double q = 1.0;
  Index trials = 200000;
  Seed seed = 0;
};

struct L1Row {
  std::string family;
  double target = 0.0;
  double variance = 0.0;
  double achieved = 0.0;
  double mean_l1 = 0.0;
  double stderr_l1 = 0.0;
};

// For each (family, target): calibrate the variance at alpha = 2, encode
// standard-normal synthetic gradients, add noise and average the L1
// distance between the privatized and the encoded gradient.
std::vector<L1Row> l1_experiment(const L1Config& config);
L1Config l1_config(const RunConfig& cfg);

struct SweepRow {
  std::string noise;
  double epsilon = 0.0;
  int achieving_alpha = 0;
  double final_accuracy = 0.0;
};

// One training run per variance in sweep.variances.
std::vector<SweepRow> run_sweep(const RunConfig& cfg);

// "# ddpsgd <version> config=<hash>" followed by a newline.
void write_csv_preamble(std::ostream& os, const RunConfig& cfg);

}  // namespace ddpsgd

#endif  // DDPSGD_EXPERIMENTS_HPP_
