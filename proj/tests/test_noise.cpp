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
#include <numbers>

#include <gtest/gtest.h>

#include "ddpsgd/denoiser.hpp"
#include "ddpsgd/noise.hpp"
#include "ddpsgd/quadrature.hpp"

namespace ddpsgd {
namespace {

std::vector<NoiseSpec> all_families() {
  return {NoiseSpec::gaussian(1.3),      NoiseSpec::student_t(1.3, 9),
          NoiseSpec::student_t(0.9, 3.5), NoiseSpec::laplace(1.3),
          NoiseSpec::cauchy(1.3),         NoiseSpec::variance_gamma(1.3),
          NoiseSpec::variance_gamma(1.3, 0.7),
          NoiseSpec::hyperbolic_secant(1.3)};
}

TEST(NoisePdf, GaussianAtZero) {
  EXPECT_NEAR(NoiseSpec::gaussian(1.0).pdf(0.0), 0.3989422804, 1e-10);
}

// Normalizes the Student-t kernel (1 + x^2/nu)^(-(nu+1)/2) numerically on
// x = tan(u) and rescales to unit variance.
TEST(NoisePdf, StudentTMatchesNumericalNormalization) {
  const double nu = 9.0;
  const double kernel_mass =
      adaptive_simpson(
          [&](double u) {
            if (std::abs(u) >= std::numbers::pi / 2) return 0.0;
            const double x = std::tan(u);
            const double c = std::cos(u);
            return std::pow(1 + x * x / nu, -(nu + 1) / 2) / (c * c);
          },
          -std::numbers::pi / 2, std::numbers::pi / 2, 1e-13)
          .value;
  const double scale = std::sqrt((nu - 2) / nu);
  const double oracle = 1.0 / (kernel_mass * scale);
  EXPECT_NEAR(oracle, 0.4399902295, 1e-9);
  EXPECT_NEAR(NoiseSpec::student_t(1.0, nu).pdf(0.0), oracle, 1e-10);
}

TEST(NoisePdf, SymmetricAboutLocation) {
  Rng rng = make_rng(3);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (const auto& spec : all_families()) {
    for (int i = 0; i < 50; ++i) {
      const double x = u(rng);
      const double mu = u(rng);
      // 2 mu - x itself rounds, so allow a few ulps through a steep density.
      EXPECT_NEAR(spec.pdf(x, mu), spec.pdf(2 * mu - x, mu),
                  1e-12 * spec.pdf(x, mu) + 1e-300)
          << spec.describe();
    }
  }
}

TEST(NoisePdf, LogPdfAgreesWithPdf) {
  for (const auto& spec : all_families()) {
    for (double x : {-30.0, -3.1, -0.2, 0.0, 0.7, 5.0, 17.0}) {
      const double p = spec.pdf(x, 0.4);
      if (p > 1e-300) {
        EXPECT_NEAR(spec.log_pdf(x, 0.4), std::log(p), 1e-12)
            << spec.describe() << " x=" << x;
      }
    }
  }
}

TEST(NoisePdf, UnitMassAndVariance) {
  // Cauchy has no variance; its parameter is a squared scale.
  for (const auto& spec : all_families()) {
    if (spec.family() == Family::kCauchy) continue;
    auto integrand = [&](double u, int power) {
      if (std::abs(u) >= std::numbers::pi / 2) return 0.0;
      const double x = std::tan(u);
      const double c = std::cos(u);
      return std::pow(x, power) * spec.pdf(x) / (c * c);
    };
    const double lo = -std::numbers::pi / 2;
    const double hi = std::numbers::pi / 2;
    const double mass =
        adaptive_simpson([&](double u) { return integrand(u, 0); }, lo, hi,
                         1e-11, 256)
            .value;
    const double var =
        adaptive_simpson([&](double u) { return integrand(u, 2); }, lo, hi,
                         1e-9, 256)
            .value;
    EXPECT_NEAR(mass, 1.0, 1e-8) << spec.describe();
    // Student-t with nu = 3.5 has a slowly converging second moment.
    EXPECT_NEAR(var, spec.variance(), 2e-4) << spec.describe();
  }
}

TEST(NoisePdf, LogPdfRatioMatchesDifference) {
  for (const auto& spec : all_families()) {
    for (double x : {-6.0, -0.3, 0.0, 0.25, 2.0, 40.0}) {
      for (double t : {1e-6, 0.01, 0.7}) {
        const double direct = spec.log_pdf(x, t) - spec.log_pdf(x, 0.0);
        EXPECT_NEAR(spec.log_pdf_ratio(x, t, 0.0), direct,
                    1e-12 + 1e-10 * std::abs(direct))
            << spec.describe() << " x=" << x << " t=" << t;
      }
    }
  }
}

TEST(NoiseSpec, RejectsInvalidParameters) {
  EXPECT_THROW(NoiseSpec::gaussian(0.0), InvalidArgument);
  EXPECT_THROW(NoiseSpec::gaussian(-1.0), InvalidArgument);
  EXPECT_THROW(NoiseSpec::student_t(1.0, 2.0), InvalidArgument);
  EXPECT_THROW(NoiseSpec::laplace(std::nan("")), InvalidArgument);
  EXPECT_THROW(NoiseSpec::variance_gamma(1.0, 0.0), InvalidArgument);
  EXPECT_THROW(parse_family("uniform"), InvalidArgument);
}

TEST(NoiseSpec, FamilyNamesRoundTrip) {
  for (const auto& spec : all_families()) {
    EXPECT_EQ(parse_family(family_name(spec.family())), spec.family());
  }
  EXPECT_EQ(NoiseSpec::make(Family::kVarianceGamma, 1.0, 0.0).lambda(), 2.0);
}

TEST(NoiseCdf, ClosedFormValues) {
  EXPECT_NEAR(NoiseSpec::gaussian(1.0).cdf(1.96), 0.9750021, 1e-7);
  EXPECT_NEAR(NoiseSpec::laplace(2.0).cdf(1.0), 0.8160603, 1e-7);
}

TEST(NoiseCdf, HalfAtLocationAndMonotone) {
  for (const auto& spec : all_families()) {
    EXPECT_NEAR(spec.cdf(0.3, 0.3), 0.5, 1e-12) << spec.describe();
    double prev = 0.0;
    for (double x = -25.0; x <= 25.0; x += 0.05) {
      const double c = spec.cdf(x);
      ASSERT_GE(c, prev) << spec.describe() << " x=" << x;
      ASSERT_LE(c, 1.0);
      prev = c;
    }
  }
}

TEST(NoiseCdf, TabulatedCdfMatchesIntegratedPdf) {
  for (const auto& spec :
       {NoiseSpec::variance_gamma(1.3, 0.7), NoiseSpec::student_t(0.9, 3.5)}) {
    ASSERT_TRUE(spec.tabulated_cdf()) << spec.describe();
    for (double x : {0.01, 0.4, 1.5, 4.0, 12.0}) {
      const double mass =
          adaptive_simpson([&](double y) { return spec.pdf(y); }, 0.0, x,
                           1e-13, 64)
              .value;
      EXPECT_NEAR(spec.cdf(x), 0.5 + mass, 1e-8)
          << spec.describe() << " x=" << x;
    }
  }
}

TEST(NoiseSample, Deterministic) {
  const auto spec = NoiseSpec::student_t(1.3, 9);
  EXPECT_EQ(sample(spec, 1, 42).values, sample(spec, 1, 42).values);
  EXPECT_NE(sample(spec, 8, 42).values, sample(spec, 8, 43).values);
  EXPECT_THROW(sample(spec, 0, 1), InvalidArgument);
}

TEST(NoiseSample, GaussianMoments) {
  const auto g = sample(NoiseSpec::gaussian(1.0), 1'000'000, 7).values;
  const double mean = g.mean();
  const double var = (g.array() - mean).square().sum() / (g.size() - 1);
  EXPECT_NEAR(mean, 0.0, 0.005);
  EXPECT_GE(var, 0.98);
  EXPECT_LE(var, 1.02);
}

TEST(NoiseSample, EveryFamilyPassesKs) {
  // DKW: P(D > 0.002) <= 2 exp(-2 n 0.002^2) ~ 7e-4 at n = 1e6.
  for (const auto& spec : all_families()) {
    const auto draws = sample(spec, 1'000'000, 11);
    EXPECT_LT(ks_statistic(draws, spec), 0.002) << spec.describe();
  }
}

}  // namespace
}  // namespace ddpsgd
