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

// Renyi-DP accounting for codebook-encoded gradients under arbitrary
// symmetric noise.
//
// For a single codeword psi and sampling rate q the per-iteration bound at
// integer order alpha is
//
//   eps(alpha) = 1/(alpha-1) log sum_k C(alpha,k) q^k (1-q)^(alpha-k)
//                                    prod_{tau in psi} M_k(tau),
//   M_k(tau)   = int (z(x;tau) / z(x;0))^k z(x;0) dx,
//
// where z is the noise density. A codebook is charged the maximum over its
// codewords and iterations compose additively.
//
// Two evaluation routes exist for sum_i log M_k(tau_i):
//   * direct: one memoized quadrature per distinct magnitude;
//   * expansion: log M_k(t) / t^2 is fitted on [0, t_max] by a Chebyshev
//     series whose fit error is checked against quadrature, and the sum over
//     coordinates collapses to per-codeword power sums. Used for dense
//     codewords with tens of thousands of distinct magnitudes.

#ifndef DDPSGD_ACCOUNTANT_HPP_
#define DDPSGD_ACCOUNTANT_HPP_

#include <map>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "ddpsgd/codebook.hpp"
#include "ddpsgd/noise.hpp"
#include "ddpsgd/types.hpp"

namespace ddpsgd {

inline constexpr int kMinOrder = 2;
inline constexpr int kDefaultMaxOrder = 64;

// eps(alpha) on the integer grid {2, ..., alpha_max}.
struct RdpCurve {
  Eigen::ArrayXd epsilons;

  static RdpCurve zeros(int alpha_max = kDefaultMaxOrder);

  int alpha_max() const {
    return static_cast<int>(epsilons.size()) + kMinOrder - 1;
  }
  double at(int alpha) const { return epsilons[alpha - kMinOrder]; }

  // Pointwise sum; throws on grid mismatch.
  RdpCurve& operator+=(const RdpCurve& other);
};

struct PrivacyParams {
  double epsilon = 0.0;
  double delta = 0.0;
  int achieving_alpha = kMinOrder;
};

// Raised when a ratio moment does not converge (infinite for this family/k).
class MomentDivergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// log M_k(tau) by adaptive quadrature, relative accuracy ~1e-10 on M_k (and on
// M_k - 1 when that is small). Exactly 0 for k in {0, 1} or tau == 0.
double log_ratio_moment(const NoiseSpec& spec, double tau, int k);
inline double ratio_moment(const NoiseSpec& spec, double tau, int k) {
  return std::exp(log_ratio_moment(spec, tau, k));
}

// Thread-safe memo of log_ratio_moment keyed by (spec, tau to 1e-12, k).
class MomentCache {
 public:
  double log_moment(const NoiseSpec& spec, double tau, int k);
  std::size_t size() const;

 private:
  using Key = std::tuple<std::string, long long, int>;
  mutable std::mutex mu_;
  std::map<Key, double> table_;
};

// Per-iteration RDP of the subsampled mixture given L[k] = sum_i log M_k(tau_i)
// for k = 0..alpha (L[0] = L[1] = 0). Accumulates the binomial sum in log
// space as log1p of the excess over 1, so small q keeps full precision.
double rdp_from_log_moments(int alpha, double q, std::span<const double> L);

// sum_i log M_k(psi_i) for k = 0..k_max over the nonzero entries of psi.
Eigen::VectorXd log_moment_sums(const Eigen::Ref<const Eigen::VectorXd>& psi,
                                const NoiseSpec& spec, int k_max,
                                MomentCache* cache = nullptr);

double single_psi_rdp(int alpha, double q,
                      const Eigen::Ref<const Eigen::VectorXd>& psi,
                      const NoiseSpec& spec, MomentCache* cache = nullptr);

RdpCurve single_psi_rdp_curve(double q,
                              const Eigen::Ref<const Eigen::VectorXd>& psi,
                              const NoiseSpec& spec,
                              int alpha_max = kDefaultMaxOrder,
                              MomentCache* cache = nullptr);

// Fitted log M_k(t) = t^2 sum_j c_kj T_j(2 t / t_max - 1) on [0, t_max].
class MomentExpansion {
 public:
  // Throws NumericalError if no degree up to the internal limit meets the
  // fit tolerance.
  MomentExpansion(const NoiseSpec& spec, double t_max, int k_max,
                  MomentCache* cache = nullptr);

  int degree() const { return static_cast<int>(coeffs_.cols()) - 1; }
  double t_max() const { return t_max_; }
  int k_max() const { return static_cast<int>(coeffs_.rows()) - 1; }
  // Largest relative fit error seen at the validation points.
  double validation_error() const { return validation_error_; }

  // W_j = sum_i t_i^2 T_j(2 t_i / t_max - 1) over the entries of `mags`.
  Eigen::VectorXd power_sums(
      const Eigen::Ref<const Eigen::VectorXd>& mags) const;
  // L[k] for k = 0..k_max from power sums.
  Eigen::VectorXd log_moment_sums(const Eigen::VectorXd& power_sums) const;
  // Fitted log M_k(t), for tests.
  double eval(int k, double t) const;

 private:
  double t_max_;
  Eigen::MatrixXd coeffs_;  // (k_max + 1) x (degree + 1)
  double validation_error_ = 0.0;
};

// Which route codebook_rdp uses; kAuto picks direct for small codebooks.
enum class MomentRoute { kAuto, kDirect, kExpansion };

// max over codewords of single_psi_rdp, for every order up to alpha_max.
RdpCurve codebook_rdp_curve(double q, const Codebook& codebook,
                            const NoiseSpec& spec,
                            int alpha_max = kDefaultMaxOrder,
                            MomentCache* cache = nullptr,
                            MomentRoute route = MomentRoute::kAuto);

double codebook_rdp(int alpha, double q, const Codebook& codebook,
                    const NoiseSpec& spec, MomentCache* cache = nullptr);

// Pointwise sum. An empty list yields the all-zero default grid.
RdpCurve compose(std::span<const RdpCurve> per_iteration);

// Converts to (eps, delta)-DP minimizing eps(alpha) + log(1/delta)/(alpha-1).
PrivacyParams to_dp(const RdpCurve& curve, double delta);

// Independent closed-form route for the subsampled Gaussian with unit
// sensitivity: Gaussian moments only, summed directly in long double.
double reference_subsampled_gaussian(int alpha, double q, double sigma);

}  // namespace ddpsgd

#endif  // DDPSGD_ACCOUNTANT_HPP_
