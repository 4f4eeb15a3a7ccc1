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

// One-hidden-layer ReLU network with softmax cross-entropy loss.
//
// Parameters live in a single flat vector laid out as
//   [W1 (hidden x inputs) | b1 | W2 (outputs x hidden) | b2],
// matrices in column-major order, so a gradient is a plain dense vector.

#ifndef DDPSGD_MLP_HPP_
#define DDPSGD_MLP_HPP_

#include <span>

#include "ddpsgd/data.hpp"
#include "ddpsgd/types.hpp"

namespace ddpsgd {

struct MlpShape {
  Index inputs = 784;
  Index hidden = 32;
  Index outputs = 10;

  Index param_count() const {
    return hidden * inputs + hidden + outputs * hidden + outputs;
  }
};

class Mlp {
 public:
  explicit Mlp(MlpShape shape = {});

  const MlpShape& shape() const { return shape_; }
  Index param_count() const { return shape_.param_count(); }

  // He-normal weights, zero biases.
  Eigen::VectorXd init_params(Seed seed) const;

  // outputs x n logits for the rows of `x`.
  Eigen::MatrixXd logits(const Eigen::VectorXd& params,
                         const Eigen::Ref<const FeatureMatrix>& x) const;

  // Mean cross-entropy over the rows of `x`.
  double loss(const Eigen::VectorXd& params,
              const Eigen::Ref<const FeatureMatrix>& x,
              std::span<const int> labels) const;

  // param_count x n matrix; column i is the loss gradient of record i.
  // Throws NumericalError on a non-finite entry.
  Eigen::MatrixXd example_gradients(const Eigen::VectorXd& params,
                                    const Eigen::Ref<const FeatureMatrix>& x,
                                    std::span<const int> labels) const;

  // Mean gradient over the records listed in `micro_batch`.
  GradientVector micro_batch_gradient(const Eigen::VectorXd& params,
                                      const Dataset& data,
                                      std::span<const Index> micro_batch) const;

  // Index of the largest logit per record, lowest index on ties.
  std::vector<int> predict(const Eigen::VectorXd& params,
                           const Eigen::Ref<const FeatureMatrix>& x) const;

 private:
  void check_params(const Eigen::VectorXd& params) const;

  MlpShape shape_;
};

// Fraction of records whose predicted class equals the label. Throws on an
// empty test set.
double evaluate_accuracy(const Mlp& model, const Eigen::VectorXd& params,
                         const Dataset& test_set);

}  // namespace ddpsgd

#endif  // DDPSGD_MLP_HPP_
