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

#include "ddpsgd/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "ddpsgd/noise.hpp"

namespace ddpsgd {
namespace {

constexpr std::uint32_t kImageMagic = 2051;
constexpr std::uint32_t kLabelMagic = 2049;

std::uint32_t read_be32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError(path + ": truncated IDX header");
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
         (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

void write_be32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::vector<unsigned char> read_body(std::istream& is, std::size_t bytes,
                                     const std::string& path) {
  std::vector<unsigned char> body(bytes);
  if (!is.read(reinterpret_cast<char*>(body.data()),
               static_cast<std::streamsize>(bytes))) {
    std::ostringstream msg;
    msg << path << ": truncated IDX body (expected " << bytes << " bytes)";
    throw FormatError(msg.str());
  }
  return body;
}

Dataset take(const Dataset& d, const std::vector<Index>& rows,
             const std::string& name) {
  Dataset out;
  out.name = name;
  out.features.resize(static_cast<Index>(rows.size()), d.feature_dim());
  out.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Index>(i)) = d.features.row(rows[i]);
    out.labels[i] = d.labels[static_cast<std::size_t>(rows[i])];
  }
  return out;
}

std::vector<Index> shuffled(Index n, Seed seed) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng = make_rng(seed, 0x5eb5e7);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace

void Dataset::validate(int num_classes) const {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw InvalidArgument("dataset feature and label counts differ");
  }
  if (features.size() &&
      (features.minCoeff() < 0.0 || features.maxCoeff() > 1.0)) {
    throw InvalidArgument("dataset features must lie in [0, 1]");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw InvalidArgument("dataset label out of range");
    }
  }
}

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  std::ifstream images(images_path, std::ios::binary);
  if (!images) throw FormatError("cannot open " + images_path);
  std::ifstream labels(labels_path, std::ios::binary);
  if (!labels) throw FormatError("cannot open " + labels_path);

  const auto image_magic = read_be32(images, images_path);
  if (image_magic != kImageMagic) {
    std::ostringstream msg;
    msg << images_path << ": bad IDX image magic " << image_magic
        << " (expected " << kImageMagic << ")";
    throw FormatError(msg.str());
  }
  const auto n_images = read_be32(images, images_path);
  const auto rows = read_be32(images, images_path);
  const auto cols = read_be32(images, images_path);
  if (rows == 0 || cols == 0 || rows > 4096 || cols > 4096) {
    throw FormatError(images_path + ": implausible image dimensions");
  }

  const auto label_magic = read_be32(labels, labels_path);
  if (label_magic != kLabelMagic) {
    std::ostringstream msg;
    msg << labels_path << ": bad IDX label magic " << label_magic
        << " (expected " << kLabelMagic << ")";
    throw FormatError(msg.str());
  }
  const auto n_labels = read_be32(labels, labels_path);
  if (n_images != n_labels) {
    std::ostringstream msg;
    msg << "IDX count mismatch: " << n_images << " images in " << images_path
        << " vs " << n_labels << " labels in " << labels_path;
    throw FormatError(msg.str());
  }

  const std::size_t dim = std::size_t{rows} * cols;
  const auto pixels = read_body(images, dim * n_images, images_path);
  const auto ys = read_body(labels, n_labels, labels_path);

  Dataset out;
  out.name = images_path;
  out.features.resize(n_images, static_cast<Index>(dim));
  for (std::size_t i = 0; i < n_images; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      out.features(static_cast<Index>(i), static_cast<Index>(j)) =
          pixels[i * dim + j] / 255.0;
    }
  }
  out.labels.assign(ys.begin(), ys.end());
  for (int y : out.labels) {
    if (y > 9) throw FormatError(labels_path + ": label outside 0..9");
  }
  return out;
}

void save_idx(const Dataset& dataset, Index rows, Index cols,
              const std::string& images_path, const std::string& labels_path) {
  if (rows * cols != dataset.feature_dim()) {
    throw InvalidArgument("save_idx: rows * cols must equal the feature dim");
  }
  std::ofstream images(images_path, std::ios::binary | std::ios::trunc);
  std::ofstream labels(labels_path, std::ios::binary | std::ios::trunc);
  if (!images || !labels) throw FormatError("save_idx: cannot open output");
  write_be32(images, kImageMagic);
  write_be32(images, static_cast<std::uint32_t>(dataset.size()));
  write_be32(images, static_cast<std::uint32_t>(rows));
  write_be32(images, static_cast<std::uint32_t>(cols));
  for (Index i = 0; i < dataset.size(); ++i) {
    for (Index j = 0; j < dataset.feature_dim(); ++j) {
      const auto v = static_cast<unsigned char>(
          std::lround(std::clamp(dataset.features(i, j), 0.0, 1.0) * 255.0));
      images.put(static_cast<char>(v));
    }
  }
  write_be32(labels, kLabelMagic);
  write_be32(labels, static_cast<std::uint32_t>(dataset.size()));
  for (int y : dataset.labels) labels.put(static_cast<char>(y));
  if (!images || !labels) throw FormatError("save_idx: write failed");
}

Dataset subset(const Dataset& dataset, Index n, Seed seed) {
  if (n < 0 || n > dataset.size()) {
    throw InvalidArgument("subset: n must lie in [0, dataset size]");
  }
  auto order = shuffled(dataset.size(), seed);
  order.resize(static_cast<std::size_t>(n));
  return take(dataset, order, dataset.name + "/subset");
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, Index n_first,
                                  Seed seed) {
  if (n_first < 0 || n_first > dataset.size()) {
    throw InvalidArgument("split: n_first must lie in [0, dataset size]");
  }
  const auto order = shuffled(dataset.size(), seed);
  const auto mid = order.begin() + n_first;
  return {take(dataset, {order.begin(), mid}, dataset.name + "/train"),
          take(dataset, {mid, order.end()}, dataset.name + "/test")};
}

Dataset synth_gaussian_blobs(int classes, Index n, Index dim, Seed seed,
                             double separation) {
  if (classes < 2 || n < 1 || dim < classes) {
    throw InvalidArgument(
        "synth_gaussian_blobs: need classes >= 2, n >= 1, dim >= classes");
  }
  constexpr double kSigma = 0.02;
  // Centres 0.5 + c e_k with |c e_i - c e_j| = separation * sigma.
  const double offset = separation * kSigma / std::sqrt(2.0);
  if (0.5 + offset + 6 * kSigma > 1.0) {
    throw InvalidArgument("synth_gaussian_blobs: separation too large");
  }
  Rng rng = make_rng(seed, 0xb10b5);
  std::normal_distribution<double> normal(0.0, kSigma);
  Dataset out;
  out.name = "blobs";
  out.features.resize(n, dim);
  out.labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % classes);
    out.labels[static_cast<std::size_t>(i)] = y;
    for (Index j = 0; j < dim; ++j) {
      const double centre = 0.5 + (j == y ? offset : 0.0);
      out.features(i, j) = std::clamp(centre + normal(rng), 0.0, 1.0);
    }
  }
  return out;
}

std::vector<Index> label_histogram(const Dataset& dataset, int num_classes) {
  std::vector<Index> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : dataset.labels) {
    if (y < 0 || y >= num_classes) {
      throw InvalidArgument("label_histogram: label out of range");
    }
    ++counts[static_cast<std::size_t>(y)];
  }
  return counts;
}

}  // namespace ddpsgd
