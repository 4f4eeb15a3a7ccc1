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

#include "ddpsgd/noise.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <sstream>
#include <vector>

#include "ddpsgd/quadrature.hpp"

namespace ddpsgd {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLogTwo = std::numbers::ln2;
const double kLogSqrtTwoPi = 0.5 * std::log(2.0 * kPi);

// log(cosh(y)) without overflow.
double log_cosh(double y) {
  const double a = std::abs(y);
  return a + std::log1p(std::exp(-2.0 * a)) - kLogTwo;
}

// nu * log(z) + log(K_nu(z)) for z > 0, nu > 0.
double log_scaled_bessel_k(double nu, double z) {
  if (z < 1e-8) {
    // K_nu(z) ~ Gamma(nu) 2^(nu-1) z^-nu.
    return std::lgamma(nu) + (nu - 1.0) * kLogTwo;
  }
  if (z > 600.0) {
    const double mu = 4.0 * nu * nu;
    const double t = 8.0 * z;
    const double series = 1.0 + (mu - 1.0) / t +
                          (mu - 1.0) * (mu - 9.0) / (2.0 * t * t) +
                          (mu - 1.0) * (mu - 9.0) * (mu - 25.0) /
                              (6.0 * t * t * t);
    return nu * std::log(z) + 0.5 * std::log(kPi / (2.0 * z)) - z +
           std::log(series);
  }
  return nu * std::log(z) + std::log(std::cyl_bessel_k(nu, z));
}

bool is_small_integer(double v) {
  return v == std::floor(v) && v <= 400.0;
}

// CDF of the standard Student-t for integer dof via the finite
// trigonometric series.
double student_t_cdf_integer(double t, int nu) {
  const double theta = std::atan(t / std::sqrt(static_cast<double>(nu)));
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  double a;  // P(|T| < |t|) signed by t
  if (nu % 2 == 1) {
    double sum = 0.0;
    if (nu > 1) {
      double term = c;
      sum = term;
      for (int j = 3; j <= nu - 2; j += 2) {
        term *= c * c * (j - 1) / j;
        sum += term;
      }
    }
    a = 2.0 / kPi * (theta + s * sum);
  } else {
    double term = 1.0;
    double sum = term;
    for (int j = 2; j <= nu - 2; j += 2) {
      term *= c * c * (j - 1) / j;
      sum += term;
    }
    a = s * sum;
  }
  return 0.5 + 0.5 * a;
}

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    std::ostringstream msg;
    msg << what << " must be positive and finite, got " << v;
    throw InvalidArgument(msg.str());
  }
}

}  // namespace

namespace detail {

// CDF of a standardized symmetric density tabulated on z = tan(u),
// u in [0, pi/2], with exact derivatives for cubic Hermite interpolation.
struct CdfTable {
  static constexpr int kNodes = 4096;

  std::once_flag once;
  std::vector<double> value;  // F at u_i
  std::vector<double> slope;  // dF/du at u_i (monotone-limited)

  template <typename Density>
  void build(const Density& density) {
    const double h = (kPi / 2.0) / kNodes;
    auto g = [&](double u) {
      const double c = std::cos(u);
      if (c <= 0.0) return 0.0;
      const double z = std::tan(u);
      return density(z) / (c * c);
    };
    value.assign(kNodes + 1, 0.0);
    slope.assign(kNodes + 1, 0.0);
    value[0] = 0.5;
    slope[0] = g(0.0);
    for (int i = 1; i <= kNodes; ++i) {
      const double u0 = h * (i - 1);
      const double u1 = (i == kNodes) ? kPi / 2.0 : h * i;
      const auto piece = adaptive_simpson(g, u0, u1, 1e-15, 1, 30);
      value[i] = value[i - 1] + piece.value;
      slope[i] = (i == kNodes) ? 0.0 : g(u1);
    }
    const double total = value[kNodes];
    if (std::abs(total - 1.0) > 1e-9) {
      std::ostringstream msg;
      msg << "CDF table does not normalize: mass " << 2.0 * (total - 0.5);
      throw NumericalError(msg.str());
    }
    // Remove the residual so F(inf) == 1 exactly.
    for (int i = 1; i <= kNodes; ++i) {
      value[i] = 0.5 + (value[i] - 0.5) * (0.5 / (total - 0.5));
    }
    // Fritsch-Carlson limiting keeps the interpolant monotone.
    for (int i = 0; i < kNodes; ++i) {
      const double secant = (value[i + 1] - value[i]) / h;
      if (secant <= 0.0) {
        slope[i] = slope[i + 1] = 0.0;
        continue;
      }
      const double a = slope[i] / secant;
      const double b = slope[i + 1] / secant;
      const double r = a * a + b * b;
      if (r > 9.0) {
        const double tau = 3.0 / std::sqrt(r);
        slope[i] = tau * a * secant;
        slope[i + 1] = tau * b * secant;
      }
    }
  }

  // F(z) for z >= 0.
  double eval(double z) const {
    const double h = (kPi / 2.0) / kNodes;
    const double u = std::atan(z);
    int i = static_cast<int>(u / h);
    if (i >= kNodes) return value[kNodes];
    const double t = (u - h * i) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1;
    const double h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2;
    const double h11 = t3 - t2;
    return h00 * value[i] + h10 * h * slope[i] + h01 * value[i + 1] +
           h11 * h * slope[i + 1];
  }
};

}  // namespace detail

const char* family_name(Family family) {
  switch (family) {
    case Family::kGaussian:
      return "gaussian";
    case Family::kStudentT:
      return "student_t";
    case Family::kLaplace:
      return "laplace";
    case Family::kCauchy:
      return "cauchy";
    case Family::kVarianceGamma:
      return "variance_gamma";
    case Family::kHyperbolicSecant:
      return "hyperbolic_secant";
  }
  return "unknown";
}

Family parse_family(const std::string& name) {
  for (Family f : {Family::kGaussian, Family::kStudentT, Family::kLaplace,
                   Family::kCauchy, Family::kVarianceGamma,
                   Family::kHyperbolicSecant}) {
    if (name == family_name(f)) return f;
  }
  if (name == "sech") return Family::kHyperbolicSecant;
  throw InvalidArgument("unknown noise family '" + name + "'");
}

Rng make_rng(Seed seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

NoiseSpec::NoiseSpec(Family family, double variance, double dof, double lambda)
    : family_(family), variance_(variance), dof_(dof), lambda_(lambda) {
  check_positive(variance, "variance");
  switch (family_) {
    case Family::kGaussian:
      scale_ = std::sqrt(variance);
      log_norm_ = -kLogSqrtTwoPi;
      break;
    case Family::kStudentT:
      check_positive(dof, "degrees of freedom");
      if (dof <= 2.0) {
        throw InvalidArgument(
            "student_t needs dof > 2 for a finite variance");
      }
      scale_ = std::sqrt(variance * (dof - 2.0) / dof);
      log_norm_ = std::lgamma((dof + 1.0) / 2.0) - std::lgamma(dof / 2.0) -
                  0.5 * std::log(dof * kPi);
      break;
    case Family::kLaplace:
      scale_ = std::sqrt(variance / 2.0);
      log_norm_ = -kLogTwo;
      break;
    case Family::kCauchy:
      scale_ = std::sqrt(variance);
      log_norm_ = -std::log(kPi);
      break;
    case Family::kVarianceGamma:
      check_positive(lambda, "lambda");
      if (lambda <= 0.5) {
        throw InvalidArgument(
            "variance_gamma needs lambda > 0.5 for a bounded density");
      }
      // Standardized so the Bessel argument is |z|; the variance in z units
      // is 2 * lambda.
      scale_ = std::sqrt(variance / (2.0 * lambda));
      log_norm_ = (1.0 - lambda) * kLogTwo - kLogSqrtTwoPi - std::lgamma(lambda);
      break;
    case Family::kHyperbolicSecant:
      scale_ = std::sqrt(variance);
      log_norm_ = -kLogTwo;
      break;
  }
  if (tabulated_cdf()) table_ = std::make_shared<detail::CdfTable>();
}

NoiseSpec NoiseSpec::gaussian(double variance) {
  return NoiseSpec(Family::kGaussian, variance, 0.0, 0.0);
}
NoiseSpec NoiseSpec::student_t(double variance, double dof) {
  return NoiseSpec(Family::kStudentT, variance, dof, 0.0);
}
NoiseSpec NoiseSpec::laplace(double variance) {
  return NoiseSpec(Family::kLaplace, variance, 0.0, 0.0);
}
NoiseSpec NoiseSpec::cauchy(double variance) {
  return NoiseSpec(Family::kCauchy, variance, 0.0, 0.0);
}
NoiseSpec NoiseSpec::variance_gamma(double variance, double lambda) {
  return NoiseSpec(Family::kVarianceGamma, variance, 0.0, lambda);
}
NoiseSpec NoiseSpec::hyperbolic_secant(double variance) {
  return NoiseSpec(Family::kHyperbolicSecant, variance, 0.0, 0.0);
}

NoiseSpec NoiseSpec::make(Family family, double variance, double shape) {
  switch (family) {
    case Family::kStudentT:
      return student_t(variance, shape);
    case Family::kVarianceGamma:
      return variance_gamma(variance, shape == 0.0 ? 2.0 : shape);
    default:
      return NoiseSpec(family, variance, 0.0, 0.0);
  }
}

bool NoiseSpec::heavy_tailed() const {
  return family_ == Family::kStudentT || family_ == Family::kCauchy;
}

bool NoiseSpec::tabulated_cdf() const {
  if (family_ == Family::kStudentT) return !is_small_integer(dof_);
  if (family_ == Family::kVarianceGamma) return lambda_ != 2.0;
  return false;
}

double NoiseSpec::std_log_pdf(double z) const {
  switch (family_) {
    case Family::kGaussian:
      return log_norm_ - 0.5 * z * z;
    case Family::kStudentT:
      return log_norm_ - 0.5 * (dof_ + 1.0) * std::log1p(z * z / dof_);
    case Family::kLaplace:
      return log_norm_ - std::abs(z);
    case Family::kCauchy:
      return log_norm_ - std::log1p(z * z);
    case Family::kVarianceGamma: {
      const double a = std::abs(z);
      if (lambda_ == 2.0) return std::log1p(a) - a - 2.0 * kLogTwo;
      return log_norm_ + log_scaled_bessel_k(lambda_ - 0.5, a);
    }
    case Family::kHyperbolicSecant:
      return log_norm_ - log_cosh(0.5 * kPi * z);
  }
  return -std::numeric_limits<double>::infinity();
}

double NoiseSpec::log_pdf(double x, double mu) const {
  return std_log_pdf((x - mu) / scale_) - std::log(scale_);
}

namespace {

// |b| - |a| given b - a, accurate when the two are close.
double abs_difference(double a, double b, double b_minus_a) {
  const double denom = std::abs(a) + std::abs(b);
  return denom > 0.0 ? b_minus_a * (a + b) / denom : 0.0;
}

}  // namespace

double NoiseSpec::log_pdf_ratio(double x, double mu1, double mu0) const {
  const double z0 = (x - mu0) / scale_;
  const double z1 = (x - mu1) / scale_;
  const double dz = (mu0 - mu1) / scale_;
  switch (family_) {
    case Family::kGaussian:
      return -0.5 * dz * (z1 + z0);
    case Family::kStudentT:
      return -0.5 * (dof_ + 1.0) *
             std::log1p(dz * (z1 + z0) / (dof_ + z0 * z0));
    case Family::kLaplace:
      return -abs_difference(z0, z1, dz);
    case Family::kCauchy:
      return -std::log1p(dz * (z1 + z0) / (1.0 + z0 * z0));
    case Family::kVarianceGamma: {
      if (lambda_ != 2.0) return std_log_pdf(z1) - std_log_pdf(z0);
      const double d = abs_difference(z0, z1, dz);
      return std::log1p(d / (1.0 + std::abs(z0))) - d;
    }
    case Family::kHyperbolicSecant: {
      const double a0 = 0.5 * kPi * z0;
      const double a1 = 0.5 * kPi * z1;
      const double e = 0.5 * kPi * dz;
      // cosh(a0 + e) / cosh(a0) = 1 + 2 sinh^2(e/2) + tanh(a0) sinh(e). For
      // large e the two terms cancel, so fall back to the log1p form.
      if (std::abs(e) < 1.0) {
        const double sh = std::sinh(0.5 * e);
        return -std::log1p(2.0 * sh * sh + std::tanh(a0) * std::sinh(e));
      }
      return -abs_difference(a0, a1, e) +
             std::log1p(std::exp(-2.0 * std::abs(a0))) -
             std::log1p(std::exp(-2.0 * std::abs(a1)));
    }
  }
  return std_log_pdf(z1) - std_log_pdf(z0);
}

double NoiseSpec::pdf(double x, double mu) const {
  return std::exp(log_pdf(x, mu));
}

// F(z) for z >= 0 in standardized units.
double NoiseSpec::std_cdf_upper_half(double z) const {
  switch (family_) {
    case Family::kGaussian:
      return 0.5 * std::erfc(-z / std::numbers::sqrt2);
    case Family::kStudentT:
      if (!table_) return student_t_cdf_integer(z, static_cast<int>(dof_));
      break;
    case Family::kLaplace:
      return 1.0 - 0.5 * std::exp(-z);
    case Family::kCauchy:
      return 0.5 + std::atan(z) / kPi;
    case Family::kVarianceGamma:
      if (!table_) return 1.0 - std::exp(-z) * (2.0 + z) / 4.0;
      break;
    case Family::kHyperbolicSecant:
      return 2.0 / kPi * std::atan(std::exp(0.5 * kPi * z));
  }
  std::call_once(table_->once, [this] {
    table_->build([this](double t) { return std::exp(std_log_pdf(t)); });
  });
  return table_->eval(z);
}

double NoiseSpec::cdf(double x, double mu) const {
  const double z = (x - mu) / scale_;
  if (std::isnan(z)) return z;
  if (z == 0.0) return 0.5;
  if (z > 0.0) return std_cdf_upper_half(z);
  return 1.0 - std_cdf_upper_half(-z);
}

double NoiseSpec::draw(Rng& rng) const {
  double out = 0.0;
  draw_into(Eigen::Map<Eigen::VectorXd>(&out, 1), rng);
  return out;
}

void NoiseSpec::draw_into(Eigen::Ref<Eigen::VectorXd> out, Rng& rng) const {
  const Index n = out.size();
  switch (family_) {
    case Family::kGaussian: {
      std::normal_distribution<double> dist(0.0, scale_);
      for (Index i = 0; i < n; ++i) out[i] = dist(rng);
      break;
    }
    case Family::kStudentT: {
      std::student_t_distribution<double> dist(dof_);
      for (Index i = 0; i < n; ++i) out[i] = scale_ * dist(rng);
      break;
    }
    case Family::kLaplace: {
      // Inverse CDF on a symmetric uniform in (-1/2, 1/2).
      std::uniform_real_distribution<double> unif(-0.5, 0.5);
      for (Index i = 0; i < n; ++i) {
        double u = unif(rng);
        while (u == -0.5) u = unif(rng);
        out[i] = -scale_ * std::copysign(std::log1p(-2.0 * std::abs(u)), u);
      }
      break;
    }
    case Family::kCauchy: {
      std::cauchy_distribution<double> dist(0.0, scale_);
      for (Index i = 0; i < n; ++i) out[i] = dist(rng);
      break;
    }
    case Family::kVarianceGamma: {
      // Normal variance mixture with Gamma(lambda, variance / lambda) mixing.
      std::gamma_distribution<double> mix(lambda_, variance_ / lambda_);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Index i = 0; i < n; ++i) {
        out[i] = std::sqrt(mix(rng)) * normal(rng);
      }
      break;
    }
    case Family::kHyperbolicSecant: {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      for (Index i = 0; i < n; ++i) {
        double u = unif(rng);
        while (u == 0.0) u = unif(rng);
        out[i] = scale_ * 2.0 / kPi * std::log(std::tan(0.5 * kPi * u));
      }
      break;
    }
  }
}

std::string NoiseSpec::describe() const {
  std::ostringstream os;
  os << std::setprecision(17) << family_name(family_) << "(variance="
     << variance_;
  if (family_ == Family::kStudentT) os << ",dof=" << dof_;
  if (family_ == Family::kVarianceGamma) os << ",lambda=" << lambda_;
  os << ")";
  return os.str();
}

GradientVector sample(const NoiseSpec& spec, Index dim, Seed seed) {
  if (dim < 1) throw InvalidArgument("sample: dim must be >= 1");
  GradientVector out{Eigen::VectorXd(dim), Stage::kRaw};
  Rng rng = make_rng(seed);
  spec.draw_into(out.values, rng);
  return out;
}

}  // namespace ddpsgd
