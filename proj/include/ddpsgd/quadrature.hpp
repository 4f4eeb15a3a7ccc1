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

// Adaptive Simpson quadrature.
//
// Everything here is header-only and templated on the scalar type so the same
// routines serve double and long double callers.

#ifndef DDPSGD_QUADRATURE_HPP_
#define DDPSGD_QUADRATURE_HPP_

#include <algorithm>
#include <cmath>
#include <limits>

namespace ddpsgd {

template <typename Scalar>
struct QuadratureResult {
  Scalar value = 0;
  // Sum of the local Richardson error estimates.
  Scalar error = 0;
  long evaluations = 0;
  // False if any subinterval hit the depth limit before meeting tolerance.
  bool converged = true;
  // Refinement stops once this many evaluations have been spent.
  long budget = 4'000'000;
};

namespace detail {

template <typename Scalar, typename F>
Scalar simpson_step(F& f, Scalar a, Scalar fa, Scalar m, Scalar fm, Scalar b,
                    Scalar fb, Scalar whole, Scalar tol, int depth,
                    QuadratureResult<Scalar>& acc) {
  const Scalar lm = (a + m) / 2;
  const Scalar rm = (m + b) / 2;
  const Scalar flm = f(lm);
  const Scalar frm = f(rm);
  acc.evaluations += 2;
  const Scalar left = (m - a) / 6 * (fa + 4 * flm + fm);
  const Scalar right = (b - m) / 6 * (fm + 4 * frm + fb);
  const Scalar delta = left + right - whole;
  // Below this level further halving only chases rounding noise.
  const Scalar noise_floor = 64 * std::numeric_limits<Scalar>::epsilon() *
                             (std::abs(left) + std::abs(right));
  if (std::abs(delta) <= 15 * std::max(tol, noise_floor)) {
    acc.error += std::abs(delta) / 15;
    return left + right + delta / 15;
  }
  if (depth <= 0 || lm == a || rm == b || acc.evaluations > acc.budget) {
    acc.converged = false;
    acc.error += std::abs(delta) / 15;
    return left + right + delta / 15;
  }
  return simpson_step(f, a, fa, lm, flm, m, fm, left, tol / 2, depth - 1,
                      acc) +
         simpson_step(f, m, fm, rm, frm, b, fb, right, tol / 2, depth - 1,
                      acc);
}

}  // namespace detail

// Integrates f over [a, b] to absolute tolerance `abs_tol`. The interval is
// first split into `panels` equal pieces, each refined adaptively with a share
// of the tolerance proportional to its width.
template <typename Scalar, typename F>
QuadratureResult<Scalar> adaptive_simpson(F&& f, Scalar a, Scalar b,
                                          Scalar abs_tol, int panels = 16,
                                          int max_depth = 48) {
  QuadratureResult<Scalar> acc;
  if (a == b) return acc;
  const Scalar width = (b - a) / panels;
  Scalar x0 = a;
  Scalar f0 = f(a);
  acc.evaluations = 1;
  for (int p = 0; p < panels; ++p) {
    const Scalar x1 = (p + 1 == panels) ? b : a + width * (p + 1);
    const Scalar xm = (x0 + x1) / 2;
    const Scalar fm = f(xm);
    const Scalar f1 = f(x1);
    acc.evaluations += 2;
    const Scalar whole = (x1 - x0) / 6 * (f0 + 4 * fm + f1);
    acc.value += detail::simpson_step(f, x0, f0, xm, fm, x1, f1, whole,
                                      abs_tol / panels, max_depth, acc);
    x0 = x1;
    f0 = f1;
  }
  return acc;
}

// Two-pass integration to a relative tolerance: a fixed composite rule gives a
// magnitude estimate that sets the absolute tolerance of the adaptive pass.
// `floor` bounds the absolute tolerance from below for integrals near zero.
template <typename Scalar, typename F>
QuadratureResult<Scalar> integrate_relative(F&& f, Scalar a, Scalar b,
                                            Scalar rel_tol, Scalar floor = 0,
                                            int panels = 64) {
  const int n = 2 * panels;
  const Scalar h = (b - a) / n;
  Scalar estimate = 0;
  Scalar magnitude = 0;
  for (int i = 0; i <= n; ++i) {
    const Scalar w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    const Scalar v = f(a + h * i);
    estimate += w * v;
    magnitude += w * std::abs(v);
  }
  estimate *= h / 3;
  magnitude *= h / 3;
  const Scalar tol =
      std::max({rel_tol * std::abs(estimate), floor,
                std::numeric_limits<Scalar>::epsilon() * magnitude});
  auto result = adaptive_simpson(f, a, b, tol, panels);
  result.evaluations += n + 1;
  return result;
}

}  // namespace ddpsgd

#endif  // DDPSGD_QUADRATURE_HPP_
