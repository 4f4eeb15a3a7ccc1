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
#include <vector>

#include <gtest/gtest.h>

#include "ddpsgd/accountant.hpp"

namespace ddpsgd {
namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Codebook unit_codebook() { return Codebook(1, 0, {vec({1.0})}); }

TEST(RatioMoment, GaussianClosedForm) {
  EXPECT_NEAR(ratio_moment(NoiseSpec::gaussian(1.0), 0.5, 2), 1.2840254,
              1e-7);
  for (double v : {0.8, 1.21}) {
    for (double tau : {1e-4, 0.03, 0.5, 1.0}) {
      for (int k : {2, 5, 17}) {
        const double exact = k * (k - 1) * tau * tau / (2 * v);
        EXPECT_NEAR(log_ratio_moment(NoiseSpec::gaussian(v), tau, k), exact,
                    1e-10 * exact)
            << "v=" << v << " tau=" << tau << " k=" << k;
      }
    }
  }
}

// M_k for Laplace with scale b:
//   k/(2k-1) e^{(k-1) t/b} + (k-1)/(2k-1) e^{-k t/b}.
TEST(RatioMoment, LaplaceClosedForm) {
  const auto spec = NoiseSpec::laplace(1.3);
  const double b = spec.scale();
  for (double tau : {1e-3, 0.1, 0.8}) {
    for (int k : {2, 3, 8, 20}) {
      const double m = k / (2.0 * k - 1) * std::exp((k - 1) * tau / b) +
                       (k - 1) / (2.0 * k - 1) * std::exp(-k * tau / b);
      EXPECT_NEAR(ratio_moment(spec, tau, k), m, 1e-9 * m)
          << "tau=" << tau << " k=" << k;
    }
  }
}

// For Cauchy the second moment is 1 + t^2 / (2 gamma^2).
TEST(RatioMoment, CauchySecondMoment) {
  const auto spec = NoiseSpec::cauchy(1.0);
  for (double tau : {0.01, 0.3, 2.0}) {
    const double exact = std::log1p(tau * tau / 2);
    EXPECT_NEAR(log_ratio_moment(spec, tau, 2), exact, 1e-10 * exact);
  }
}

// As t -> 0, log M_k(t) / t^2 -> k (k - 1) I / 2 with I the Fisher
// information of the location family.
TEST(RatioMoment, SmallShiftFisherLimit) {
  struct Case {
    NoiseSpec spec;
    double fisher;
  };
  const double c = std::sqrt(1.1);
  const double nu = 9.0;
  const double st = NoiseSpec::student_t(1.3, nu).scale();
  const std::vector<Case> cases{
      {NoiseSpec::hyperbolic_secant(1.1), M_PI * M_PI / (8 * c * c)},
      {NoiseSpec::student_t(1.3, nu), (nu + 1) / ((nu + 3) * st * st)},
      {NoiseSpec::cauchy(0.7), 1.0 / (2 * 0.7)},
  };
  for (const auto& [spec, fisher] : cases) {
    for (double t : {1e-6, 1e-5}) {
      for (int k : {2, 10}) {
        const double limit = 0.5 * k * (k - 1) * fisher;
        EXPECT_NEAR(log_ratio_moment(spec, t, k) / (t * t), limit,
                    1e-8 * limit)
            << spec.describe() << " t=" << t << " k=" << k;
      }
    }
  }
}

TEST(RatioMoment, TrivialOrdersAndShift) {
  for (const auto& spec :
       {NoiseSpec::gaussian(1.0), NoiseSpec::student_t(1.3, 9),
        NoiseSpec::laplace(1.0), NoiseSpec::cauchy(1.0),
        NoiseSpec::variance_gamma(1.0), NoiseSpec::hyperbolic_secant(1.0)}) {
    EXPECT_EQ(ratio_moment(spec, 0.7, 0), 1.0);
    EXPECT_EQ(ratio_moment(spec, 0.7, 1), 1.0);
    EXPECT_EQ(ratio_moment(spec, 0.0, 6), 1.0);
    // Symmetric noise: the sign of the shift does not matter.
    EXPECT_NEAR(log_ratio_moment(spec, -0.4, 4),
                log_ratio_moment(spec, 0.4, 4),
                1e-12 * log_ratio_moment(spec, 0.4, 4))
        << spec.describe();
  }
}

TEST(RatioMoment, IncreasingInShiftAndOrder) {
  for (const auto& spec :
       {NoiseSpec::student_t(1.3, 9), NoiseSpec::hyperbolic_secant(1.0),
        NoiseSpec::variance_gamma(1.0)}) {
    double prev = 0.0;
    for (double tau : {0.01, 0.05, 0.2, 0.6, 1.5}) {
      const double m = log_ratio_moment(spec, tau, 4);
      EXPECT_GT(m, prev) << spec.describe();
      prev = m;
    }
    EXPECT_LT(log_ratio_moment(spec, 0.3, 3), log_ratio_moment(spec, 0.3, 4));
  }
}

TEST(RatioMoment, RejectsNegativeOrder) {
  EXPECT_THROW(log_ratio_moment(NoiseSpec::gaussian(1), 0.1, -1),
               InvalidArgument);
}

TEST(MomentCacheTest, MemoizesAndMatches) {
  MomentCache cache;
  const auto spec = NoiseSpec::student_t(1.3, 9);
  const double a = cache.log_moment(spec, 0.2, 5);
  EXPECT_EQ(a, log_ratio_moment(spec, 0.2, 5));
  EXPECT_EQ(cache.log_moment(spec, 0.2, 5), a);
  EXPECT_EQ(cache.size(), 1u);
}

TEST(SinglePsi, ZeroSamplingRate) {
  EXPECT_EQ(single_psi_rdp(8, 0.0, vec({0.6, 0.8}),
                           NoiseSpec::student_t(1, 9)),
            0.0);
}

TEST(SinglePsi, FullSamplingGaussianClosedForm) {
  EXPECT_NEAR(single_psi_rdp(2, 1.0, vec({1.0}), NoiseSpec::gaussian(1.0)),
              1.0, 1e-10);
  for (int alpha : {3, 7, 12}) {
    const double tau = 0.7;
    const double v = 1.3;
    EXPECT_NEAR(
        single_psi_rdp(alpha, 1.0, vec({tau}), NoiseSpec::gaussian(v)),
        alpha * tau * tau / (2 * v), 1e-9);
  }
}

// D_2((1-q) N(0,1) + q N(1,1) || N(0,1)) by direct quadrature of m^2 / p.
TEST(SinglePsi, MixtureDivergenceOracle) {
  const double q = 0.01;
  auto gauss = [](double x, double mu) {
    return std::exp(-0.5 * (x - mu) * (x - mu)) / std::sqrt(2 * M_PI);
  };
  long double sum = 0;
  const double h = 1e-3;
  for (double x = -40.0; x <= 40.0; x += h) {
    const double m = (1 - q) * gauss(x, 0) + q * gauss(x, 1);
    if (gauss(x, 0) > 0) sum += (long double)m * m / gauss(x, 0) * h;
  }
  const double oracle = std::log(static_cast<double>(sum));
  EXPECT_NEAR(oracle, 1.71813422e-4, 1e-12);
  EXPECT_NEAR(single_psi_rdp(2, q, vec({1.0}), NoiseSpec::gaussian(1.0)),
              oracle, 1e-6 * oracle);
}

TEST(SinglePsi, ReferenceParity) {
  // Frozen from the long-double reference route.
  EXPECT_NEAR(reference_subsampled_gaussian(8, 0.01, 1.1),
              5.84070335520e-4, 1e-15);
  const double eps = codebook_rdp(8, 0.01, unit_codebook(),
                                  NoiseSpec::gaussian(1.1 * 1.1));
  EXPECT_NEAR(eps, 5.84070335520e-4, 1e-6 * 5.84070335520e-4);
}

TEST(SinglePsi, CurveMatchesPointwise) {
  const auto spec = NoiseSpec::laplace(1.2);
  const auto psi = vec({0.5, 0.5, 0.5, 0.5});
  const RdpCurve curve = single_psi_rdp_curve(0.05, psi, spec, 12);
  ASSERT_EQ(curve.alpha_max(), 12);
  for (int alpha = 2; alpha <= 12; ++alpha) {
    EXPECT_NEAR(curve.at(alpha), single_psi_rdp(alpha, 0.05, psi, spec),
                1e-14);
  }
}

TEST(SinglePsi, ZeroPaddingIsNeutral) {
  const auto spec = NoiseSpec::student_t(1.3, 9);
  EXPECT_EQ(single_psi_rdp(6, 0.1, vec({0.6, 0.8}), spec),
            single_psi_rdp(6, 0.1, vec({0.6, 0.8, 0.0, 0.0, 0.0}), spec));
}

TEST(RdpFromMoments, RejectsBadInput) {
  std::vector<double> L{0, 0, 0.1};
  EXPECT_THROW(rdp_from_log_moments(1, 0.1, L), InvalidArgument);
  EXPECT_THROW(rdp_from_log_moments(3, 0.1, L), InvalidArgument);
  EXPECT_THROW(rdp_from_log_moments(2, 1.5, L), InvalidArgument);
}

TEST(CodebookRdp, Examples) {
  const auto spec = NoiseSpec::gaussian(1.0);
  const Codebook two(2, 0, {vec({1.0}), vec({0.8, 0.6})});
  EXPECT_NEAR(codebook_rdp(2, 1.0, two, spec), 1.0, 1e-10);

  const Codebook with_zero(2, 0, {Eigen::VectorXd(), vec({1.0})});
  EXPECT_NEAR(codebook_rdp(4, 0.3, with_zero, spec),
              single_psi_rdp(4, 0.3, vec({1.0}), spec), 1e-15);
  const Codebook only_zero(2, 0, {Eigen::VectorXd()});
  EXPECT_EQ(codebook_rdp(4, 0.3, only_zero, spec), 0.0);

  const Codebook cb = generate_codebook(1, 20, 3);
  EXPECT_EQ(codebook_rdp(5, 0.2, cb, NoiseSpec::laplace(1.0)),
            single_psi_rdp(5, 0.2, cb.codeword(0), NoiseSpec::laplace(1.0)));
}

TEST(CodebookRdp, ExpansionRouteAgreesWithDirect) {
  const Codebook cb = generate_codebook(2, 120, 8);
  for (const auto& spec :
       {NoiseSpec::student_t(1.3, 9), NoiseSpec::gaussian(1.21),
        NoiseSpec::laplace(1.0)}) {
    MomentCache cache;
    const RdpCurve direct = codebook_rdp_curve(0.01, cb, spec, 12, &cache,
                                               MomentRoute::kDirect);
    const RdpCurve expanded = codebook_rdp_curve(0.01, cb, spec, 12, &cache,
                                                 MomentRoute::kExpansion);
    for (int alpha = 2; alpha <= 12; ++alpha) {
      EXPECT_NEAR(expanded.at(alpha), direct.at(alpha),
                  1e-8 * direct.at(alpha))
          << spec.describe() << " alpha=" << alpha;
    }
  }
}

TEST(MomentExpansionTest, FitsQuadrature) {
  const auto spec = NoiseSpec::hyperbolic_secant(1.1);
  const MomentExpansion fit(spec, 0.2, 10);
  EXPECT_LT(fit.validation_error(), 1e-9);
  for (double t : {0.0013, 0.05, 0.17}) {
    for (int k : {2, 6, 10}) {
      const double exact = log_ratio_moment(spec, t, k);
      EXPECT_NEAR(fit.eval(k, t), exact, 1e-8 * exact);
    }
  }
}

TEST(Compose, Additivity) {
  RdpCurve one = RdpCurve::zeros(10);
  one.epsilons.setConstant(0.1);
  const std::vector<RdpCurve> sixty(60, one);
  const RdpCurve total = compose(sixty);
  for (int a = 2; a <= 10; ++a) EXPECT_NEAR(total.at(a), 6.0, 1e-12);

  const RdpCurve empty = compose({});
  EXPECT_EQ(empty.alpha_max(), kDefaultMaxOrder);
  EXPECT_TRUE((empty.epsilons == 0).all());

  const Codebook cb = generate_codebook(4, 30, 1);
  const RdpCurve a =
      codebook_rdp_curve(0.02, cb, NoiseSpec::gaussian(1.2), 10);
  const RdpCurve b =
      codebook_rdp_curve(0.02, cb, NoiseSpec::student_t(1.3, 9), 10);
  const std::vector<RdpCurve> mixed{a, b};
  const RdpCurve sum = compose(mixed);
  for (int alpha = 2; alpha <= 10; ++alpha) {
    EXPECT_DOUBLE_EQ(sum.at(alpha), a.at(alpha) + b.at(alpha));
  }

  const std::vector<RdpCurve> mismatched{RdpCurve::zeros(8),
                                         RdpCurve::zeros(9)};
  EXPECT_THROW(compose(mismatched), InvalidArgument);
}

TEST(ToDp, Examples) {
  RdpCurve curve = RdpCurve::zeros(2);
  curve.epsilons[0] = 1.0;
  const PrivacyParams p = to_dp(curve, 1e-5);
  EXPECT_NEAR(p.epsilon, 12.5129255, 1e-7);
  EXPECT_EQ(p.achieving_alpha, 2);
  EXPECT_EQ(p.delta, 1e-5);

  RdpCurve two = RdpCurve::zeros(3);
  two.epsilons << 1.0, 1.0;
  EXPECT_EQ(to_dp(two, 1e-5).achieving_alpha, 3);
  EXPECT_THROW(to_dp(curve, 0.0), InvalidArgument);
  EXPECT_THROW(to_dp(curve, 1.0), InvalidArgument);
}

TEST(Reference, Trivial) {
  EXPECT_EQ(reference_subsampled_gaussian(5, 0.0, 1.0), 0.0);
  EXPECT_NEAR(reference_subsampled_gaussian(2, 1.0, 1.0), 1.0, 1e-12);
}

}  // namespace
}  // namespace ddpsgd
