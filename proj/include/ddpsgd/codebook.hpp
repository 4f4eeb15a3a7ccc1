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

// Preselected gradient codebook and rank-wise gradient encoding.
//
// A codeword is a unit-norm vector stored as its magnitudes sorted in
// descending order; ranks beyond the stored length are implicit zeros.
// Encoding orders the gradient by descending magnitude, picks the codeword
// closest in cosine distance to that sorted magnitude profile, and clamps the
// gradient coordinate of rank t to [-psi[t], psi[t]].

#ifndef DDPSGD_CODEBOOK_HPP_
#define DDPSGD_CODEBOOK_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ddpsgd/types.hpp"

namespace ddpsgd {

// Magnitudes below this are zeroed in generated codewords.
inline constexpr double kCodewordFloor = 1e-5;

class Codebook {
 public:
  Codebook() = default;
  // `codewords[i]` holds the stored magnitudes of codeword i. Throws unless
  // each list is nonnegative, sorted descending and no longer than `dim`.
  Codebook(Index dim, Seed seed, const std::vector<Eigen::VectorXd>& codewords);

  Index dim() const { return dim_; }
  Index size() const { return static_cast<Index>(lengths_.size()); }
  Seed seed() const { return seed_; }

  Index stored_length(Index i) const { return lengths_[i]; }
  // Stored magnitudes of codeword i (length stored_length(i)).
  auto codeword(Index i) const {
    return table_.col(i).head(lengths_[i]);
  }
  // Magnitude at rank t, zero past the stored length.
  double magnitude(Index i, Index t) const {
    return t < lengths_[i] ? table_(t, i) : 0.0;
  }
  double norm(Index i) const { return norms_[i]; }
  // Largest stored magnitude over the whole codebook.
  double max_magnitude() const;

  // Zero-padded dense view: rows are ranks, columns are codewords.
  const Eigen::MatrixXd& table() const { return table_; }

  friend bool operator==(const Codebook& a, const Codebook& b);

 private:
  Index dim_ = 0;
  Seed seed_ = 0;
  Index max_length_ = 0;
  Eigen::MatrixXd table_;
  std::vector<Index> lengths_;
  Eigen::VectorXd norms_;
};

// Draws n codewords of dimension dim: i.i.d. standard Gaussian coordinates
// taken in absolute value, scaled to unit norm, magnitudes below
// kCodewordFloor zeroed (and the norm restored), then sorted descending.
Codebook generate_codebook(Index n, Index dim, Seed seed);

void save_codebook(const Codebook& codebook, const std::string& path);
Codebook load_codebook(const std::string& path);

// 1 - <a, b> / (|a| |b|), with the shorter argument zero-padded. Returns 1
// when either side is all zero.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_distance(
    const Eigen::MatrixBase<DerivedA>& a,
    const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Index common = std::min(a.size(), b.size());
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) return Scalar(1);
  const Scalar dot = a.head(common).dot(b.head(common).template cast<Scalar>());
  return Scalar(1) - dot / (na * nb);
}

// Coordinate indices ordered by descending |g|, ties by ascending index.
template <typename Derived>
std::vector<Index> magnitude_order(const Eigen::MatrixBase<Derived>& g) {
  std::vector<Index> order(static_cast<std::size_t>(g.size()));
  std::iota(order.begin(), order.end(), Index{0});
  // Exact zeros keep their index order at the tail, so only the nonzero
  // prefix needs a comparison sort.
  auto nonzero_end = std::stable_partition(
      order.begin(), order.end(), [&](Index i) { return g[i] != 0; });
  std::stable_sort(order.begin(), nonzero_end, [&](Index i, Index j) {
    return std::abs(g[i]) > std::abs(g[j]);
  });
  return order;
}

struct EncodedBatch {
  // dim x batch, one encoded gradient per column.
  Eigen::MatrixXd encoded;
  // Selected codeword per column; -1 for an all-zero gradient.
  std::vector<Index> selected;
};

// Encodes every column of `gradients` (dim x batch).
EncodedBatch encode_batch(const Eigen::Ref<const Eigen::MatrixXd>& gradients,
                          const Codebook& codebook);

// Single-gradient form of encode_batch. `selected` receives the codeword
// index (or -1) when non-null.
GradientVector encode(const GradientVector& gradient, const Codebook& codebook,
                      Index* selected = nullptr);

}  // namespace ddpsgd

#endif  // DDPSGD_CODEBOOK_HPP_
