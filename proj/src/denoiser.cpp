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

#include "ddpsgd/denoiser.hpp"

#include <algorithm>
#include <vector>

namespace ddpsgd {

void DenoiseConfig::validate() const {
  if (!(threshold >= 0.0 && threshold < 1.0)) {
    throw InvalidArgument("denoise.threshold must lie in [0, 1)");
  }
}

double ks_statistic(const Eigen::Ref<const Eigen::VectorXd>& values,
                    const NoiseSpec& spec) {
  const Index n = values.size();
  if (n == 0) throw InvalidArgument("ks_statistic: empty sample");
  std::vector<double> sorted(values.data(), values.data() + n);
  for (double v : sorted) {
    if (std::isnan(v)) throw InvalidArgument("ks_statistic: NaN in sample");
  }
  std::sort(sorted.begin(), sorted.end());
  const double inv_n = 1.0 / static_cast<double>(n);
  double d = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double f = spec.cdf(sorted[static_cast<std::size_t>(i)]);
    d = std::max({d, (i + 1) * inv_n - f, f - i * inv_n});
  }
  return std::min(d, 1.0);
}

DenoiseResult denoise(const GradientVector& privatized, const NoiseSpec& spec,
                      const DenoiseConfig& config) {
  config.validate();
  if (!config.enabled) {
    return {GradientVector{privatized.values, Stage::kDenoised}, true, 1.0};
  }
  const double d = ks_statistic(privatized.values, spec);
  if (d <= config.threshold) {
    return {GradientVector{privatized.values, Stage::kDenoised}, false, d};
  }
  return {GradientVector{d * privatized.values, Stage::kDenoised}, true, d};
}

}  // namespace ddpsgd
