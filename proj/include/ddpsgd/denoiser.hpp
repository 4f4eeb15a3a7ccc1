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

// Kolmogorov-Smirnov rescaling of privatized gradients.
//
// The coordinates of a privatized gradient are pooled as a one-dimensional
// sample and compared with the noise marginal. The KS distance D is then used
// as a multiplicative scale. Only the noise distribution enters, never the
// realized noise draw.

#ifndef DDPSGD_DENOISER_HPP_
#define DDPSGD_DENOISER_HPP_

#include "ddpsgd/noise.hpp"
#include "ddpsgd/types.hpp"

namespace ddpsgd {

struct DenoiseConfig {
  bool enabled = true;
  // Updates with D <= threshold are skipped. 0 never skips.
  double threshold = 0.0;

  // Throws InvalidArgument unless 0 <= threshold < 1.
  void validate() const;
};

// sup_x |F_emp(x) - F(x)| over the coordinates of `values`.
double ks_statistic(const Eigen::Ref<const Eigen::VectorXd>& values,
                    const NoiseSpec& spec);
inline double ks_statistic(const GradientVector& v, const NoiseSpec& spec) {
  return ks_statistic(v.values, spec);
}

struct DenoiseResult {
  GradientVector gradient;
  // False when the KS distance fell at or below the threshold and the
  // caller should skip the update.
  bool applied = true;
  // The KS distance, or 1 when denoising is disabled.
  double ks = 1.0;
};

DenoiseResult denoise(const GradientVector& privatized, const NoiseSpec& spec,
                      const DenoiseConfig& config);

}  // namespace ddpsgd

#endif  // DDPSGD_DENOISER_HPP_
