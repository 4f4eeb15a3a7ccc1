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

// Private SGD over a codebook: Poisson subsampling, per-micro-batch
// gradients, encoding, summation, noise, KS denoising and the update. A
// clip-and-Gaussian baseline shares the loop.

#ifndef DDPSGD_TRAINER_HPP_
#define DDPSGD_TRAINER_HPP_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ddpsgd/accountant.hpp"
#include "ddpsgd/codebook.hpp"
#include "ddpsgd/data.hpp"
#include "ddpsgd/denoiser.hpp"
#include "ddpsgd/mlp.hpp"
#include "ddpsgd/noise.hpp"

namespace ddpsgd {

struct TrainingConfig {
  double q = 0.01;
  Index micro_batch_size = 1;
  Index iterations = 2000;
  double eta = 0.05;
  // One spec per iteration, or a single spec used throughout.
  std::vector<NoiseSpec> noise_schedule{NoiseSpec::gaussian(1.21)};
  DenoiseConfig denoise;
  Seed seed = 0;
  // Accuracy is evaluated every eval_every iterations and at the end.
  Index eval_every = 100;
  // Clip each micro-batch gradient to clip_bound and skip encoding.
  bool baseline_mode = false;
  double clip_bound = 1.0;
  Index hidden = 32;
  double delta = 1e-5;
  int alpha_max = kDefaultMaxOrder;

  // Throws InvalidArgument on any violated precondition.
  void validate() const;
  const NoiseSpec& spec_at(Index iteration) const;
};

// Poisson inclusion with probability q, grouped into micro-batches in index
// order; the last batch may be short.
std::vector<std::vector<Index>> sample_minibatch(Index n_records, double q,
                                                 Index micro_batch_size,
                                                 Rng& rng);

struct StepReport {
  Index iteration = 0;
  Index included = 0;
  Index micro_batches = 0;
  double ks_value = 1.0;
  bool update_applied = true;
  double aggregated_norm = 0.0;
  double privatized_norm = 0.0;
  double update_norm = 0.0;
};

// One iteration (1-based `iteration`) updating `params` in place. `codebook`
// may be null in baseline mode.
StepReport train_step(const Mlp& model, Eigen::VectorXd& params,
                      const Dataset& train_set, const TrainingConfig& config,
                      const Codebook* codebook, Index iteration);

struct TrajectoryRow {
  Index iteration = 0;
  std::optional<double> accuracy;
  double eps_dp_so_far = 0.0;
  double ks_value = 1.0;
  bool update_applied = true;
};

// Depends only on the mechanism: (q, codebook, schedule, T, delta).
struct PrivacyReport {
  std::string mode;
  double q = 0.0;
  Index iterations = 0;
  double delta = 0.0;
  std::vector<std::string> schedule;
  std::string codebook;
  RdpCurve curve;
  PrivacyParams dp;

  // Deterministic JSON text.
  std::string to_json() const;
};

// Per-iteration RDP curve of the mechanism for one spec.
RdpCurve per_step_curve(const TrainingConfig& config, const Codebook* codebook,
                        const NoiseSpec& spec, MomentCache* cache = nullptr);

// Privacy of the first `iterations` steps of `config`.
PrivacyReport privacy_report(const TrainingConfig& config,
                             const Codebook* codebook, Index iterations,
                             MomentCache* cache = nullptr);

struct TrainResult {
  Eigen::VectorXd params;
  std::vector<TrajectoryRow> trajectory;
  PrivacyReport privacy;
  double final_accuracy = 0.0;
};

// Runs config.iterations steps. `on_row` (optional) sees each trajectory row
// as it is produced.
TrainResult train(const Dataset& train_set, const Dataset& test_set,
                  const TrainingConfig& config, const Codebook* codebook,
                  const std::function<void(const TrajectoryRow&)>& on_row = {});

struct Histogram {
  // bins + 1 increasing edges; the last bin is closed on the right.
  std::vector<double> edges;
  std::vector<Index> counts;
};

// Equal-width histogram whose range is [min, max] of the values (widened by
// 1/2 on each side when all values coincide).
Histogram make_histogram(const Eigen::Ref<const Eigen::VectorXd>& values,
                         int bins);

// Pools every per-example gradient coordinate over `dataset`.
Histogram gradient_histogram(const Mlp& model, const Eigen::VectorXd& params,
                             const Dataset& dataset, int bins);

}  // namespace ddpsgd

#endif  // DDPSGD_TRAINER_HPP_
