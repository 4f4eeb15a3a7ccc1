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

#include <cmath>

#include <gtest/gtest.h>

#include "ddpsgd/denoiser.hpp"

namespace ddpsgd {
namespace {

// Laplace quantile with scale b.
double laplace_quantile(double p, double b) {
  return p < 0.5 ? b * std::log(2 * p) : -b * std::log(2 * (1 - p));
}

TEST(Ks, SinglePointAtMedian) {
  Eigen::VectorXd v(1);
  v << 0.0;
  EXPECT_DOUBLE_EQ(ks_statistic(v, NoiseSpec::gaussian(1.0)), 0.5);
}

TEST(Ks, SampleAtMidQuantiles) {
  const auto spec = NoiseSpec::laplace(2.0);
  for (Index n : {1, 7, 100}) {
    Eigen::VectorXd v(n);
    for (Index i = 0; i < n; ++i) {
      v[n - 1 - i] = laplace_quantile((i + 0.5) / n, spec.scale());
    }
    EXPECT_NEAR(ks_statistic(v, spec), 0.5 / n, 1e-12) << "n=" << n;
  }
}

TEST(Ks, Errors) {
  EXPECT_THROW(ks_statistic(Eigen::VectorXd(), NoiseSpec::gaussian(1.0)),
               InvalidArgument);
  Eigen::VectorXd v(2);
  v << 0.1, std::nan("");
  EXPECT_THROW(ks_statistic(v, NoiseSpec::gaussian(1.0)), InvalidArgument);
}

TEST(Denoise, DisabledIsIdentity) {
  GradientVector g{Eigen::VectorXd::LinSpaced(5, -1, 1), Stage::kPrivatized};
  const auto r = denoise(g, NoiseSpec::gaussian(1.0), {false, 0.0});
  EXPECT_TRUE(r.applied);
  EXPECT_EQ(r.ks, 1.0);
  EXPECT_EQ(r.gradient.values, g.values);
}

TEST(Denoise, ScalesByKsDistance) {
  const auto spec = NoiseSpec::student_t(1.3, 9);
  GradientVector g = sample(spec, 10000, 5);
  g.values.array() += 0.3;
  g.stage = Stage::kPrivatized;
  const auto r = denoise(g, spec, {});
  EXPECT_TRUE(r.applied);
  EXPECT_DOUBLE_EQ(r.ks, ks_statistic(g, spec));
  EXPECT_EQ(r.gradient.values, (r.ks * g.values).eval());
  EXPECT_EQ(r.gradient.stage, Stage::kDenoised);
}

TEST(Denoise, ThresholdSkips) {
  const auto spec = NoiseSpec::gaussian(1.0);
  const GradientVector g = sample(spec, 10000, 6);
  const double ks = ks_statistic(g, spec);
  EXPECT_FALSE(denoise(g, spec, {true, ks}).applied);
  EXPECT_TRUE(denoise(g, spec, {true, 0.5 * ks}).applied);
  EXPECT_THROW(denoise(g, spec, {true, 1.0}), InvalidArgument);
  EXPECT_THROW(denoise(g, spec, {true, -0.1}), InvalidArgument);
}

TEST(Denoise, SignalRaisesDistance) {
  const auto spec = NoiseSpec::gaussian(1.21);
  const GradientVector noise = sample(spec, 100000, 8);
  GradientVector shifted = noise;
  shifted.values.array() += 1.0;
  const double d_noise = ks_statistic(noise, spec);
  const double d_shift = ks_statistic(shifted, spec);
  EXPECT_LT(d_noise, 0.01);
  // |F(x) - F(x - 1)| peaks at x = 1/2.
  EXPECT_NEAR(d_shift, 2 * spec.cdf(0.5) - 1, 0.01);
}

}  // namespace
}  // namespace ddpsgd
