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

#include "ddpsgd/codebook.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "ddpsgd/noise.hpp"

namespace ddpsgd {
namespace {

constexpr char kMagic[8] = {'D', 'D', 'P', 'S', 'G', 'D', 'C', 'B'};
constexpr std::uint32_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "codebook files are written in host order; port the byte "
              "swapping before building on a big-endian target");

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw FormatError(path + ": truncated codebook file");
  }
  return v;
}

}  // namespace

Codebook::Codebook(Index dim, Seed seed,
                   const std::vector<Eigen::VectorXd>& codewords)
    : dim_(dim), seed_(seed) {
  if (dim < 1) throw InvalidArgument("codebook dim must be >= 1");
  if (codewords.empty()) throw InvalidArgument("codebook must not be empty");
  for (const auto& c : codewords) {
    if (c.size() > dim) {
      throw InvalidArgument("codeword longer than the codebook dimension");
    }
    for (Index t = 0; t < c.size(); ++t) {
      if (!(c[t] >= 0.0) || !std::isfinite(c[t]) ||
          (t > 0 && c[t] > c[t - 1])) {
        throw InvalidArgument(
            "codeword magnitudes must be finite, nonnegative and sorted "
            "descending");
      }
    }
    max_length_ = std::max(max_length_, c.size());
  }
  const Index n = static_cast<Index>(codewords.size());
  table_ = Eigen::MatrixXd::Zero(max_length_, n);
  lengths_.resize(codewords.size());
  norms_.resize(n);
  for (Index i = 0; i < n; ++i) {
    const auto& c = codewords[static_cast<std::size_t>(i)];
    lengths_[static_cast<std::size_t>(i)] = c.size();
    table_.col(i).head(c.size()) = c;
    norms_[i] = c.norm();
  }
}

double Codebook::max_magnitude() const {
  return table_.size() ? table_.row(0).maxCoeff() : 0.0;
}

bool operator==(const Codebook& a, const Codebook& b) {
  return a.dim_ == b.dim_ && a.seed_ == b.seed_ && a.lengths_ == b.lengths_ &&
         a.table_.rows() == b.table_.rows() &&
         a.table_.cols() == b.table_.cols() &&
         std::memcmp(a.table_.data(), b.table_.data(),
                     sizeof(double) * a.table_.size()) == 0;
}

Codebook generate_codebook(Index n, Index dim, Seed seed) {
  if (n < 1 || dim < 1) {
    throw InvalidArgument("generate_codebook: n and dim must be >= 1");
  }
  std::vector<Eigen::VectorXd> codewords;
  codewords.reserve(static_cast<std::size_t>(n));
  Eigen::VectorXd v(dim);
  for (Index i = 0; i < n; ++i) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(i));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index j = 0; j < dim; ++j) v[j] = std::abs(normal(rng));
    v /= v.norm();
    // Zeroing shrinks the norm; renormalizing only scales survivors up, so a
    // single pass leaves every stored magnitude above the floor.
    v = (v.array() < kCodewordFloor).select(0.0, v);
    v /= v.norm();
    std::sort(v.data(), v.data() + dim, std::greater<double>());
    Index len = dim;
    while (len > 0 && v[len - 1] == 0.0) --len;
    codewords.emplace_back(v.head(len));
  }
  return Codebook(dim, seed, codewords);
}

void save_codebook(const Codebook& codebook, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kFormatVersion);
  write_pod(os, std::uint32_t{0});
  write_pod(os, static_cast<std::uint64_t>(codebook.size()));
  write_pod(os, static_cast<std::uint64_t>(codebook.dim()));
  write_pod(os, static_cast<std::uint64_t>(codebook.seed()));
  for (Index i = 0; i < codebook.size(); ++i) {
    const auto len = codebook.stored_length(i);
    write_pod(os, static_cast<std::uint64_t>(len));
    const Eigen::VectorXd c = codebook.codeword(i);
    os.write(reinterpret_cast<const char*>(c.data()),
             static_cast<std::streamsize>(sizeof(double) * len));
  }
  if (!os) throw FormatError("write failed for " + path);
}

Codebook load_codebook(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open codebook " + path);
  char magic[sizeof(kMagic)];
  if (!is.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(path + ": not a codebook file (bad magic)");
  }
  const auto version = read_pod<std::uint32_t>(is, path);
  if (version != kFormatVersion) {
    std::ostringstream msg;
    msg << path << ": unsupported codebook version " << version;
    throw FormatError(msg.str());
  }
  read_pod<std::uint32_t>(is, path);
  const auto n = read_pod<std::uint64_t>(is, path);
  const auto dim = read_pod<std::uint64_t>(is, path);
  const auto seed = read_pod<std::uint64_t>(is, path);
  if (n == 0 || dim == 0 || n > (1u << 24) || dim > (1ull << 40)) {
    throw FormatError(path + ": implausible codebook header");
  }
  std::vector<Eigen::VectorXd> codewords(n);
  for (auto& c : codewords) {
    const auto len = read_pod<std::uint64_t>(is, path);
    if (len > dim) throw FormatError(path + ": codeword longer than dim");
    c.resize(static_cast<Index>(len));
    if (!is.read(reinterpret_cast<char*>(c.data()),
                 static_cast<std::streamsize>(sizeof(double) * len))) {
      throw FormatError(path + ": truncated codebook file");
    }
  }
  try {
    return Codebook(static_cast<Index>(dim), seed, codewords);
  } catch (const InvalidArgument& e) {
    throw FormatError(path + ": " + e.what());
  }
}

EncodedBatch encode_batch(const Eigen::Ref<const Eigen::MatrixXd>& gradients,
                          const Codebook& codebook) {
  if (gradients.rows() != codebook.dim()) {
    std::ostringstream msg;
    msg << "encode: gradient dim " << gradients.rows()
        << " does not match codebook dim " << codebook.dim();
    throw InvalidArgument(msg.str());
  }
  const Index batch = gradients.cols();
  const Index ranks = codebook.table().rows();

  std::vector<std::vector<Index>> orders(static_cast<std::size_t>(batch));
  std::vector<Index> nonzeros(static_cast<std::size_t>(batch));
  Index depth = 0;
  for (Index b = 0; b < batch; ++b) {
    auto& order = orders[static_cast<std::size_t>(b)];
    order = magnitude_order(gradients.col(b));
    Index m = 0;
    while (m < static_cast<Index>(order.size()) &&
           gradients(order[static_cast<std::size_t>(m)], b) != 0.0) {
      ++m;
    }
    nonzeros[static_cast<std::size_t>(b)] = m;
    depth = std::max(depth, std::min(m, ranks));
  }

  // Sorted magnitude profiles, one per column, truncated to the ranks any
  // codeword can match.
  Eigen::MatrixXd profiles = Eigen::MatrixXd::Zero(depth, batch);
  Eigen::VectorXd profile_norms(batch);
  for (Index b = 0; b < batch; ++b) {
    const auto& order = orders[static_cast<std::size_t>(b)];
    const Index m = nonzeros[static_cast<std::size_t>(b)];
    double sq = 0.0;
    for (Index t = 0; t < m; ++t) {
      const double a = std::abs(gradients(order[static_cast<std::size_t>(t)], b));
      if (t < depth) profiles(t, b) = a;
      sq += a * a;
    }
    profile_norms[b] = std::sqrt(sq);
  }
  const Eigen::MatrixXd dots =
      codebook.table().topRows(depth).transpose() * profiles;

  EncodedBatch out{gradients, std::vector<Index>(static_cast<std::size_t>(batch), -1)};
  for (Index b = 0; b < batch; ++b) {
    if (profile_norms[b] == 0.0) continue;
    Index best = 0;
    double best_distance = 0.0;
    for (Index i = 0; i < codebook.size(); ++i) {
      const double denom = codebook.norm(i) * profile_norms[b];
      const double distance = denom > 0.0 ? 1.0 - dots(i, b) / denom : 1.0;
      if (i == 0 || distance < best_distance) {
        best = i;
        best_distance = distance;
      }
    }
    out.selected[static_cast<std::size_t>(b)] = best;
    const auto& order = orders[static_cast<std::size_t>(b)];
    const Index m = nonzeros[static_cast<std::size_t>(b)];
    const Index len = codebook.stored_length(best);
    const auto psi = codebook.codeword(best);
    for (Index t = 0; t < m; ++t) {
      const Index i = order[static_cast<std::size_t>(t)];
      const double bound = t < len ? psi[t] : 0.0;
      out.encoded(i, b) = std::min(bound, std::max(gradients(i, b), -bound));
    }
  }
  return out;
}

GradientVector encode(const GradientVector& gradient, const Codebook& codebook,
                      Index* selected) {
  auto batch = encode_batch(gradient.values, codebook);
  if (selected) *selected = batch.selected[0];
  return GradientVector{batch.encoded.col(0), Stage::kEncoded};
}

}  // namespace ddpsgd
