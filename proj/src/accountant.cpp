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

#include "ddpsgd/accountant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include <Eigen/QR>

#include "ddpsgd/quadrature.hpp"

namespace ddpsgd {
namespace {

constexpr double kMomentRelTol = 1e-12;
constexpr double kTailFraction = 1e-13;
constexpr double kFitTolerance = 1e-9;
// Codebooks with more stored entries than this use the expansion route.
constexpr Index kDirectRouteLimit = 4096;

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

[[noreturn]] void diverged(const NoiseSpec& spec, double tau, int k) {
  std::ostringstream msg;
  msg << "ratio moment of order " << k << " at shift " << tau
      << " diverges for " << spec.describe();
  throw MomentDivergence(msg.str());
}

// Integral of f over [0, inf). Light-tailed integrands are integrated on a
// window that doubles until the added tail is negligible; heavy-tailed ones
// are mapped to [0, pi/2) through y = c tan u. `endpoint_value` is the limit
// of the mapped integrand at u = pi/2.
template <typename F>
double integrate_half_line(const F& f, const NoiseSpec& spec, double width,
                           double endpoint_value, double tau, int k) {
  if (spec.heavy_tailed()) {
    const double c = spec.scale();
    auto g = [&](double u) {
      const double cu = std::cos(u);
      if (!(cu > 0.0)) return endpoint_value;
      const double v = f(c * std::tan(u)) * c / (cu * cu);
      return std::isfinite(v) ? v : endpoint_value;
    };
    const double half_pi = std::numbers::pi / 2;
    auto r = integrate_relative(g, 0.0, half_pi, kMomentRelTol, 0.0, 64);
    // A divergent moment shows up as an integrand that keeps growing towards
    // the endpoint.
    double inner = 0.0;
    for (int j = 0; j <= 8; ++j) {
      inner = std::max(inner, std::abs(g(half_pi * j / 9.0)));
    }
    for (int j = 6; j <= 40; j += 2) {
      const double edge = std::abs(g(half_pi * (1.0 - std::ldexp(1.0, -j))));
      if (!std::isfinite(edge) || edge > 1e6 * (inner + 1e-300)) {
        diverged(spec, tau, k);
      }
    }
    if (!std::isfinite(r.value)) diverged(spec, tau, k);
    return r.value;
  }

  double total = integrate_relative(f, 0.0, width, kMomentRelTol).value;
  const double floor = 1e-3 * kMomentRelTol * std::abs(total);
  for (int it = 0; it < 24; ++it) {
    const double tail =
        integrate_relative(f, width, 2 * width, kMomentRelTol, floor, 16)
            .value;
    total += tail;
    width *= 2;
    if (!std::isfinite(total)) break;
    if (std::abs(tail) <= kTailFraction * std::abs(total)) return total;
  }
  diverged(spec, tau, k);
}

}  // namespace

RdpCurve RdpCurve::zeros(int alpha_max) {
  if (alpha_max < kMinOrder) {
    throw InvalidArgument("RdpCurve: alpha_max must be >= 2");
  }
  return RdpCurve{Eigen::ArrayXd::Zero(alpha_max - kMinOrder + 1)};
}

RdpCurve& RdpCurve::operator+=(const RdpCurve& other) {
  if (other.epsilons.size() != epsilons.size()) {
    throw InvalidArgument("RdpCurve: cannot add curves on different grids");
  }
  epsilons += other.epsilons;
  return *this;
}

double log_ratio_moment(const NoiseSpec& spec, double tau, int k) {
  if (k < 0) throw InvalidArgument("log_ratio_moment: k must be >= 0");
  if (!std::isfinite(tau)) {
    throw InvalidArgument("log_ratio_moment: shift must be finite");
  }
  const double t = std::abs(tau);
  if (k <= 1 || t == 0.0) return 0.0;

  const double s = spec.scale();
  const double window = 40.0 * s + 2.0 * k * t;

  // M - 1 from the pairing of x and t - x about t / 2: with
  // a(y) = log z(y - t/2) - log z(y + t/2) the pair contributes
  // -expm1(k a) expm1((1 - k) a) z(y + t/2) >= 0, which has no first-order
  // cancellation and keeps relative precision for tiny shifts.
  auto excess = [&]() {
    const double half = 0.5 * t;
    auto g = [&](double y) {
      const double a = spec.log_pdf_ratio(y, half, -half);
      return -std::expm1(k * a) * std::expm1((1 - k) * a) *
             std::exp(spec.log_pdf(y, -half));
    };
    const double m1 = integrate_half_line(g, spec, window, 0.0, t, k);
    if (!(m1 >= 0.0)) diverged(spec, t, k);
    return std::log1p(m1);
  };
  if (k * t <= 0.1 * s) return excess();

  // Otherwise factor out the peak of h(x) = k log(z(x - t) / z(x)) + log z(x).
  auto h = [&](double x) {
    return k * spec.log_pdf_ratio(x, t, 0.0) + spec.log_pdf(x, 0.0);
  };
  const int grid = 4000;
  double x_peak = 0.0;
  double h_peak = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= grid; ++i) {
    const double x = -window + 2.0 * window * i / grid;
    const double v = h(x);
    if (v > h_peak) {
      h_peak = v;
      x_peak = x;
    }
  }
  // Golden-section polish on the bracketing cells.
  {
    double a = x_peak - 2.0 * window / grid;
    double b = x_peak + 2.0 * window / grid;
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 60; ++it) {
      const double c = b - r * (b - a);
      const double d = a + r * (b - a);
      if (h(c) > h(d)) {
        b = d;
      } else {
        a = c;
      }
    }
    const double x = (a + b) / 2;
    if (h(x) > h_peak) {
      h_peak = h(x);
      x_peak = x;
    }
  }
  if (!std::isfinite(h_peak)) diverged(spec, t, k);

  auto g = [&](double y) {
    return std::exp(h(x_peak + y) - h_peak) + std::exp(h(x_peak - y) - h_peak);
  };
  // Only the Cauchy integrand keeps a nonzero limit under the tan map: the
  // ratio tends to 1 and the density decays like gamma / (pi x^2), once per
  // side.
  const double endpoint = spec.family() == Family::kCauchy
                              ? 2.0 * std::exp(-h_peak) / std::numbers::pi
                              : 0.0;
  const double i_shift =
      integrate_half_line(g, spec, 40.0 * s + k * t, endpoint, t, k);
  if (!(i_shift > 0.0)) diverged(spec, t, k);
  const double log_m = h_peak + std::log(i_shift);
  if (log_m < 0.5) return excess();
  return log_m;
}

double MomentCache::log_moment(const NoiseSpec& spec, double tau, int k) {
  Key key{spec.describe(), std::llround(std::abs(tau) * 1e12), k};
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = table_.find(key);
    if (it != table_.end()) return it->second;
  }
  const double v = log_ratio_moment(spec, tau, k);
  std::lock_guard<std::mutex> lock(mu_);
  table_.emplace(std::move(key), v);
  return v;
}

std::size_t MomentCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return table_.size();
}

double rdp_from_log_moments(int alpha, double q, std::span<const double> L) {
  if (alpha < kMinOrder) throw InvalidArgument("RDP order must be >= 2");
  if (!(q >= 0.0 && q <= 1.0)) {
    throw InvalidArgument("sampling rate must lie in [0, 1]");
  }
  if (static_cast<int>(L.size()) < alpha + 1) {
    throw InvalidArgument("rdp_from_log_moments: need L[0..alpha]");
  }
  if (q == 0.0) return 0.0;
  if (q == 1.0) return std::max(L[alpha], 0.0) / (alpha - 1);

  // sum_k C q^k (1-q)^(a-k) M_k = 1 + sum_{k>=2} C q^k (1-q)^(a-k) (M_k - 1),
  // since the k = 0, 1 terms carry M = 1. Jensen gives M_k >= 1; quadrature
  // noise below that is clamped.
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  double log_excess = -std::numeric_limits<double>::infinity();
  for (int k = 2; k <= alpha; ++k) {
    const double lk = std::max(L[k], 0.0);
    if (lk == 0.0) continue;
    // log(expm1(lk)) without overflow.
    const double log_em1 =
        lk > 30.0 ? lk + std::log1p(-std::exp(-lk)) : std::log(std::expm1(lk));
    log_excess = log_add(log_excess, log_binomial(alpha, k) + k * log_q +
                                         (alpha - k) * log_1mq + log_em1);
  }
  if (log_excess == -std::numeric_limits<double>::infinity()) return 0.0;
  // log(1 + e^x) evaluated stably.
  const double total = log_excess > 30.0
                           ? log_excess + std::log1p(std::exp(-log_excess))
                           : std::log1p(std::exp(log_excess));
  const double eps = total / (alpha - 1);
  if (!(eps >= 0.0) || !std::isfinite(eps)) {
    throw NumericalError("RDP evaluation produced a negative or non-finite "
                         "value");
  }
  return eps;
}

Eigen::VectorXd log_moment_sums(const Eigen::Ref<const Eigen::VectorXd>& psi,
                                const NoiseSpec& spec, int k_max,
                                MomentCache* cache) {
  if (k_max < 1) throw InvalidArgument("log_moment_sums: k_max must be >= 1");
  MomentCache local;
  MomentCache& memo = cache ? *cache : local;
  std::vector<double> mags;
  mags.reserve(static_cast<std::size_t>(psi.size()));
  for (Index i = 0; i < psi.size(); ++i) {
    if (!std::isfinite(psi[i])) {
      throw InvalidArgument("codeword magnitudes must be finite");
    }
    if (psi[i] != 0.0) mags.push_back(std::abs(psi[i]));
  }
  std::sort(mags.begin(), mags.end());
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(k_max + 1);
  for (std::size_t i = 0; i < mags.size();) {
    std::size_t j = i;
    while (j < mags.size() && mags[j] == mags[i]) ++j;
    const double count = static_cast<double>(j - i);
    for (int k = 2; k <= k_max; ++k) {
      sums[k] += count * memo.log_moment(spec, mags[i], k);
    }
    i = j;
  }
  return sums;
}

namespace {

// L[0..k_max] for psi, picking the route by the number of nonzeros.
Eigen::VectorXd psi_log_moments(const Eigen::Ref<const Eigen::VectorXd>& psi,
                                const NoiseSpec& spec, int k_max,
                                MomentCache* cache) {
  const Index nnz = (psi.array() != 0.0).count();
  if (nnz <= kDirectRouteLimit) {
    return log_moment_sums(psi, spec, k_max, cache);
  }
  const Eigen::VectorXd mags = psi.cwiseAbs();
  MomentExpansion expansion(spec, mags.maxCoeff(), k_max, cache);
  return expansion.log_moment_sums(expansion.power_sums(mags));
}

}  // namespace

double single_psi_rdp(int alpha, double q,
                      const Eigen::Ref<const Eigen::VectorXd>& psi,
                      const NoiseSpec& spec, MomentCache* cache) {
  if (alpha < kMinOrder) throw InvalidArgument("RDP order must be >= 2");
  if (!(q >= 0.0 && q <= 1.0)) {
    throw InvalidArgument("sampling rate must lie in [0, 1]");
  }
  if (q == 0.0) return 0.0;
  const Eigen::VectorXd L = psi_log_moments(psi, spec, alpha, cache);
  return rdp_from_log_moments(alpha, q, {L.data(), static_cast<std::size_t>(L.size())});
}

RdpCurve single_psi_rdp_curve(double q,
                              const Eigen::Ref<const Eigen::VectorXd>& psi,
                              const NoiseSpec& spec, int alpha_max,
                              MomentCache* cache) {
  RdpCurve curve = RdpCurve::zeros(alpha_max);
  if (!(q >= 0.0 && q <= 1.0)) {
    throw InvalidArgument("sampling rate must lie in [0, 1]");
  }
  if (q == 0.0) return curve;
  const Eigen::VectorXd L = psi_log_moments(psi, spec, alpha_max, cache);
  for (int a = kMinOrder; a <= alpha_max; ++a) {
    curve.epsilons[a - kMinOrder] = rdp_from_log_moments(
        a, q, {L.data(), static_cast<std::size_t>(L.size())});
  }
  return curve;
}

MomentExpansion::MomentExpansion(const NoiseSpec& spec, double t_max,
                                 int k_max, MomentCache* cache)
    : t_max_(t_max) {
  if (k_max < 1) throw InvalidArgument("MomentExpansion: k_max must be >= 1");
  if (!(t_max >= 0.0) || !std::isfinite(t_max)) {
    throw InvalidArgument("MomentExpansion: t_max must be finite and >= 0");
  }
  if (t_max == 0.0) {
    coeffs_ = Eigen::MatrixXd::Zero(k_max + 1, 1);
    return;
  }
  MomentCache local;
  MomentCache& memo = cache ? *cache : local;

  // Interpolate log M_k(t) / t^2 at the n first-kind Chebyshev nodes. Those
  // nodes are a subset of the 3n-node set, so each refinement validates the
  // previous interpolant on the 2n new nodes and reuses every quadrature.
  auto node = [](int j, int n) {
    return std::cos(std::numbers::pi * (2 * j + 1) / (2.0 * n));
  };
  auto values_at = [&](int n) {
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, k_max + 1);
    for (int j = 0; j < n; ++j) {
      const double t = (node(j, n) + 1.0) / 2.0 * t_max;
      for (int k = 2; k <= k_max; ++k) {
        y(j, k) = memo.log_moment(spec, t, k) / (t * t);
      }
    }
    return y;
  };
  auto interpolate = [&](const Eigen::MatrixXd& y) {
    const int n = static_cast<int>(y.rows());
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(k_max + 1, n);
    for (int m = 0; m < n; ++m) {
      for (int j = 0; j < n; ++j) {
        const double w = std::cos(m * std::numbers::pi * (2 * j + 1) / (2.0 * n));
        c.col(m) += w * y.row(j).transpose();
      }
      c.col(m) *= (m == 0 ? 1.0 : 2.0) / n;
    }
    return c;
  };

  int n = 9;
  Eigen::MatrixXd y = values_at(n);
  double worst = std::numeric_limits<double>::infinity();
  for (; n <= 81; n *= 3) {
    coeffs_ = interpolate(y);
    const Eigen::MatrixXd finer = values_at(3 * n);
    worst = 0.0;
    for (int i = 0; i < 3 * n; ++i) {
      if (i % 3 == 1) continue;  // an old node, matched by construction
      const double t = (node(i, 3 * n) + 1.0) / 2.0 * t_max;
      for (int k = 2; k <= k_max; ++k) {
        const double exact = finer(i, k);
        const double err = std::abs(eval(k, t) / (t * t) - exact) /
                           std::max(std::abs(exact), 1e-300);
        worst = std::max(worst, err);
      }
    }
    validation_error_ = worst;
    if (worst <= kFitTolerance) return;
    y = finer;
  }
  std::ostringstream msg;
  msg << "moment expansion for " << spec.describe() << " up to t=" << t_max
      << " reached relative error " << worst << " > " << kFitTolerance;
  throw NumericalError(msg.str());
}

Eigen::VectorXd MomentExpansion::power_sums(
    const Eigen::Ref<const Eigen::VectorXd>& mags) const {
  const int deg = degree();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(deg + 1);
  if (t_max_ == 0.0) {
    if ((mags.array() != 0.0).any()) {
      throw InvalidArgument("power_sums: magnitude beyond expansion range");
    }
    return w;
  }
  std::vector<double> cheb(static_cast<std::size_t>(deg + 1));
  for (Index i = 0; i < mags.size(); ++i) {
    const double t = std::abs(mags[i]);
    if (t == 0.0) continue;
    if (t > t_max_ * (1 + 1e-12)) {
      throw InvalidArgument("power_sums: magnitude beyond expansion range");
    }
    const double x = std::min(2 * t / t_max_ - 1, 1.0);
    const double t2 = t * t;
    cheb[0] = 1.0;
    if (deg >= 1) cheb[1] = x;
    for (int m = 2; m <= deg; ++m) cheb[m] = 2 * x * cheb[m - 1] - cheb[m - 2];
    for (int m = 0; m <= deg; ++m) w[m] += t2 * cheb[m];
  }
  return w;
}

Eigen::VectorXd MomentExpansion::log_moment_sums(
    const Eigen::VectorXd& power_sums) const {
  if (power_sums.size() != coeffs_.cols()) {
    throw InvalidArgument("log_moment_sums: power sums of wrong degree");
  }
  return coeffs_ * power_sums;
}

double MomentExpansion::eval(int k, double t) const {
  if (k < 0 || k > k_max()) throw InvalidArgument("eval: k out of range");
  if (t_max_ == 0.0) return 0.0;
  const double x = 2 * t / t_max_ - 1;
  double prev = 1.0;
  double cur = x;
  double sum = coeffs_(k, 0);
  if (degree() >= 1) sum += coeffs_(k, 1) * x;
  for (int m = 2; m <= degree(); ++m) {
    const double next = 2 * x * cur - prev;
    sum += coeffs_(k, m) * next;
    prev = cur;
    cur = next;
  }
  return sum * t * t;
}

RdpCurve codebook_rdp_curve(double q, const Codebook& codebook,
                            const NoiseSpec& spec, int alpha_max,
                            MomentCache* cache, MomentRoute route) {
  if (!(q >= 0.0 && q <= 1.0)) {
    throw InvalidArgument("sampling rate must lie in [0, 1]");
  }
  RdpCurve curve = RdpCurve::zeros(alpha_max);
  if (q == 0.0 || codebook.size() == 0) return curve;
  Index stored = 0;
  for (Index i = 0; i < codebook.size(); ++i) stored += codebook.stored_length(i);
  if (route == MomentRoute::kAuto) {
    route = stored <= kDirectRouteLimit ? MomentRoute::kDirect
                                        : MomentRoute::kExpansion;
  }

  MomentCache local;
  MomentCache* memo = cache ? cache : &local;
  std::optional<MomentExpansion> expansion;
  if (route == MomentRoute::kExpansion) {
    expansion.emplace(spec, codebook.max_magnitude(), alpha_max, memo);
  }
  for (Index i = 0; i < codebook.size(); ++i) {
    const Eigen::VectorXd L =
        expansion ? expansion->log_moment_sums(
                        expansion->power_sums(codebook.codeword(i)))
                  : log_moment_sums(codebook.codeword(i), spec, alpha_max, memo);
    for (int a = kMinOrder; a <= alpha_max; ++a) {
      const double e = rdp_from_log_moments(
          a, q, {L.data(), static_cast<std::size_t>(L.size())});
      double& slot = curve.epsilons[a - kMinOrder];
      slot = std::max(slot, e);
    }
  }
  return curve;
}

double codebook_rdp(int alpha, double q, const Codebook& codebook,
                    const NoiseSpec& spec, MomentCache* cache) {
  if (alpha < kMinOrder) throw InvalidArgument("RDP order must be >= 2");
  return codebook_rdp_curve(q, codebook, spec, alpha, cache).at(alpha);
}

RdpCurve compose(std::span<const RdpCurve> per_iteration) {
  if (per_iteration.empty()) return RdpCurve::zeros();
  RdpCurve total = per_iteration.front();
  for (std::size_t i = 1; i < per_iteration.size(); ++i) {
    total += per_iteration[i];
  }
  return total;
}

PrivacyParams to_dp(const RdpCurve& curve, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgument("delta must lie in (0, 1)");
  }
  if (curve.epsilons.size() == 0) throw InvalidArgument("empty RDP curve");
  PrivacyParams best{std::numeric_limits<double>::infinity(), delta, kMinOrder};
  const double log_inv_delta = -std::log(delta);
  for (int a = kMinOrder; a <= curve.alpha_max(); ++a) {
    const double e = curve.at(a) + log_inv_delta / (a - 1);
    if (e < best.epsilon) {
      best.epsilon = e;
      best.achieving_alpha = a;
    }
  }
  return best;
}

double reference_subsampled_gaussian(int alpha, double q, double sigma) {
  if (alpha < kMinOrder) throw InvalidArgument("RDP order must be >= 2");
  if (!(q >= 0.0 && q <= 1.0)) {
    throw InvalidArgument("sampling rate must lie in [0, 1]");
  }
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be > 0");
  if (q == 0.0) return 0.0;
  long double sum = 0.0L;
  const long double lq = std::log(static_cast<long double>(q));
  const long double l1q = std::log1p(-static_cast<long double>(q));
  const long double s2 = static_cast<long double>(sigma) * sigma;
  for (int k = 0; k <= alpha; ++k) {
    long double term = std::lgamma(alpha + 1.0L) - std::lgamma(k + 1.0L) -
                       std::lgamma(alpha - k + 1.0L) + k * lq;
    if (alpha - k > 0) term += (alpha - k) * l1q;
    term += static_cast<long double>(k) * (k - 1) / (2 * s2);
    sum += std::exp(term);
  }
  return static_cast<double>(std::log(sum) / (alpha - 1));
}

}  // namespace ddpsgd
