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

// Symmetric univariate noise families.
//
// Every family is parameterized by its variance; the natural scale is derived
// from it so that sweeps over "comparable noise" compare like with like:
//
//   Gaussian          sigma = sqrt(v)
//   StudentT(nu)      s = sqrt(v (nu - 2) / nu)         (requires nu > 2)
//   Laplace           b = sqrt(v / 2)
//   Cauchy            gamma = sqrt(v)                   (v is a scale^2 here)
//   VarianceGamma(l)  theta = v / l, the Gamma mixing scale of X = sqrt(G) Z,
//                     G ~ Gamma(l, theta). For l = 2 the density is
//                     (1 + |x|/s) exp(-|x|/s) / (4 s) with s = sqrt(v) / 2.
//   HyperbolicSecant  density sech(pi x / (2 c)) / (2 c), c = sqrt(v)
//
// Specs are immutable and cheap to copy; copies share a lazily built CDF
// table for the families that lack a closed-form CDF.

#ifndef DDPSGD_NOISE_HPP_
#define DDPSGD_NOISE_HPP_

#include <memory>
#include <random>
#include <string>

#include "ddpsgd/types.hpp"

namespace ddpsgd {

enum class Family {
  kGaussian,
  kStudentT,
  kLaplace,
  kCauchy,
  kVarianceGamma,
  kHyperbolicSecant,
};

const char* family_name(Family family);
// Accepts the names produced by family_name (e.g. "student_t").
Family parse_family(const std::string& name);

using Rng = std::mt19937_64;

// Builds a generator from a seed and an optional stream id; distinct
// (seed, stream) pairs give independent-looking streams.
Rng make_rng(Seed seed, std::uint64_t stream = 0);

namespace detail {
struct CdfTable;
}

class NoiseSpec {
 public:
  static NoiseSpec gaussian(double variance);
  static NoiseSpec student_t(double variance, double dof);
  static NoiseSpec laplace(double variance);
  static NoiseSpec cauchy(double variance);
  static NoiseSpec variance_gamma(double variance, double lambda = 2.0);
  static NoiseSpec hyperbolic_secant(double variance);

  // Generic factory; `shape` is the degrees of freedom for StudentT, lambda
  // for VarianceGamma (0 selects 2) and ignored otherwise.
  static NoiseSpec make(Family family, double variance, double shape = 0.0);

  Family family() const { return family_; }
  double variance() const { return variance_; }
  double dof() const { return dof_; }
  double lambda() const { return lambda_; }
  // The family's natural scale (see the table at the top of this file).
  double scale() const { return scale_; }
  // True when tails decay polynomially; selects the tan-substituted quadrature.
  bool heavy_tailed() const;
  // True when the CDF is evaluated from the cached quadrature table.
  bool tabulated_cdf() const;

  double log_pdf(double x, double mu = 0.0) const;
  double pdf(double x, double mu = 0.0) const;
  double cdf(double x, double mu = 0.0) const;
  // log pdf(x, mu1) - log pdf(x, mu0) without cancelling the normalizing
  // constant, accurate to relative precision when the shifts nearly agree.
  double log_pdf_ratio(double x, double mu1, double mu0) const;

  // One zero-mean draw.
  double draw(Rng& rng) const;
  // Fills `out` with i.i.d. zero-mean draws.
  void draw_into(Eigen::Ref<Eigen::VectorXd> out, Rng& rng) const;

  // e.g. "student_t(variance=1.3,dof=9)"; stable and used as a cache key.
  std::string describe() const;

  friend bool operator==(const NoiseSpec& a, const NoiseSpec& b) {
    return a.family_ == b.family_ && a.variance_ == b.variance_ &&
           a.dof_ == b.dof_ && a.lambda_ == b.lambda_;
  }

 private:
  NoiseSpec(Family family, double variance, double dof, double lambda);

  // Standardized (unit scale, zero location) log density.
  double std_log_pdf(double z) const;
  double std_cdf_upper_half(double z) const;

  Family family_;
  double variance_;
  double dof_ = 0.0;
  double lambda_ = 0.0;
  double scale_ = 1.0;
  // Family-specific constant of the standardized log density.
  double log_norm_ = 0.0;
  std::shared_ptr<detail::CdfTable> table_;
};

// i.i.d. zero-mean noise of length `dim`, reproducible from `seed`.
GradientVector sample(const NoiseSpec& spec, Index dim, Seed seed);

}  // namespace ddpsgd

#endif  // DDPSGD_NOISE_HPP_
