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

// Labelled datasets: IDX (MNIST) loading, subsetting and synthetic blobs.

#ifndef DDPSGD_DATA_HPP_
#define DDPSGD_DATA_HPP_

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "ddpsgd/types.hpp"

namespace ddpsgd {

using FeatureMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Dataset {
  // One record per row, values in [0, 1].
  FeatureMatrix features;
  std::vector<int> labels;
  std::string name;

  Index size() const { return features.rows(); }
  Index feature_dim() const { return features.cols(); }
  // Throws InvalidArgument if counts disagree or values are out of range.
  void validate(int num_classes = 10) const;
};

// Parses an IDX3 image file (magic 2051) and an IDX1 label file (magic 2049).
// Pixels are scaled by 1/255. Throws FormatError with the offending path.
Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path);

// Writes the IDX pair back out; used by tests and fixture generation.
void save_idx(const Dataset& dataset, Index rows, Index cols,
              const std::string& images_path, const std::string& labels_path);

// n records drawn without replacement in a seeded random order.
Dataset subset(const Dataset& dataset, Index n, Seed seed);

// Disjoint seeded split into (first n_first records, the rest).
std::pair<Dataset, Dataset> split(const Dataset& dataset, Index n_first,
                                  Seed seed);

// Isotropic Gaussian clusters in [0, 1]^dim with per-coordinate standard
// deviation 0.02 and class centres `separation` standard deviations apart.
// Requires dim >= classes.
Dataset synth_gaussian_blobs(int classes, Index n, Index dim, Seed seed,
                             double separation = 10.0);

// Count of each label in [0, num_classes).
std::vector<Index> label_histogram(const Dataset& dataset,
                                   int num_classes = 10);

}  // namespace ddpsgd

#endif  // DDPSGD_DATA_HPP_
