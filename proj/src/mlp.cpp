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

#include "ddpsgd/mlp.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "ddpsgd/noise.hpp"

namespace ddpsgd {
namespace {

constexpr std::uint64_t kInitStream = 0x1417;

struct Layers {
  Eigen::Map<const Eigen::MatrixXd> w1;
  Eigen::Map<const Eigen::VectorXd> b1;
  Eigen::Map<const Eigen::MatrixXd> w2;
  Eigen::Map<const Eigen::VectorXd> b2;
};

Layers view(const MlpShape& s, const Eigen::VectorXd& p) {
  const double* d = p.data();
  const Index o1 = s.hidden * s.inputs;
  const Index o2 = o1 + s.hidden;
  const Index o3 = o2 + s.outputs * s.hidden;
  return {Eigen::Map<const Eigen::MatrixXd>(d, s.hidden, s.inputs),
          Eigen::Map<const Eigen::VectorXd>(d + o1, s.hidden),
          Eigen::Map<const Eigen::MatrixXd>(d + o2, s.outputs, s.hidden),
          Eigen::Map<const Eigen::VectorXd>(d + o3, s.outputs)};
}

// Column-wise softmax in place.
void softmax_columns(Eigen::MatrixXd& z) {
  for (Index j = 0; j < z.cols(); ++j) {
    auto c = z.col(j);
    c.array() -= c.maxCoeff();
    c = c.array().exp();
    c /= c.sum();
  }
}

}  // namespace

Mlp::Mlp(MlpShape shape) : shape_(shape) {
  if (shape.inputs < 1 || shape.hidden < 1 || shape.outputs < 2) {
    throw InvalidArgument("Mlp: need inputs >= 1, hidden >= 1, outputs >= 2");
  }
}

void Mlp::check_params(const Eigen::VectorXd& params) const {
  if (params.size() != param_count()) {
    std::ostringstream msg;
    msg << "Mlp: expected " << param_count() << " parameters, got "
        << params.size();
    throw InvalidArgument(msg.str());
  }
}

Eigen::VectorXd Mlp::init_params(Seed seed) const {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(param_count());
  Rng rng = make_rng(seed, kInitStream);
  std::normal_distribution<double> w1(0.0, std::sqrt(2.0 / shape_.inputs));
  std::normal_distribution<double> w2(0.0, std::sqrt(2.0 / shape_.hidden));
  const Index n1 = shape_.hidden * shape_.inputs;
  for (Index i = 0; i < n1; ++i) p[i] = w1(rng);
  const Index o2 = n1 + shape_.hidden;
  for (Index i = 0; i < shape_.outputs * shape_.hidden; ++i) {
    p[o2 + i] = w2(rng);
  }
  return p;
}

Eigen::MatrixXd Mlp::logits(const Eigen::VectorXd& params,
                            const Eigen::Ref<const FeatureMatrix>& x) const {
  check_params(params);
  if (x.cols() != shape_.inputs) {
    throw InvalidArgument("Mlp: feature width does not match the input size");
  }
  const auto l = view(shape_, params);
  Eigen::MatrixXd a = (l.w1 * x.transpose()).colwise() + l.b1;
  a = a.cwiseMax(0.0);
  return (l.w2 * a).colwise() + l.b2;
}

double Mlp::loss(const Eigen::VectorXd& params,
                 const Eigen::Ref<const FeatureMatrix>& x,
                 std::span<const int> labels) const {
  if (static_cast<Index>(labels.size()) != x.rows() || x.rows() == 0) {
    throw InvalidArgument("Mlp::loss: need one label per record, n >= 1");
  }
  const Eigen::MatrixXd z = logits(params, x);
  double total = 0.0;
  for (Index j = 0; j < z.cols(); ++j) {
    const double m = z.col(j).maxCoeff();
    const double lse = m + std::log((z.col(j).array() - m).exp().sum());
    total += lse - z(labels[static_cast<std::size_t>(j)], j);
  }
  return total / static_cast<double>(z.cols());
}

Eigen::MatrixXd Mlp::example_gradients(
    const Eigen::VectorXd& params, const Eigen::Ref<const FeatureMatrix>& x,
    std::span<const int> labels) const {
  check_params(params);
  if (static_cast<Index>(labels.size()) != x.rows()) {
    throw InvalidArgument("Mlp: need one label per record");
  }
  if (x.cols() != shape_.inputs) {
    throw InvalidArgument("Mlp: feature width does not match the input size");
  }
  const auto& s = shape_;
  const auto l = view(s, params);
  const Index n = x.rows();
  const Eigen::MatrixXd pre = (l.w1 * x.transpose()).colwise() + l.b1;
  const Eigen::MatrixXd act = pre.cwiseMax(0.0);
  Eigen::MatrixXd delta2 = (l.w2 * act).colwise() + l.b2;
  softmax_columns(delta2);
  for (Index j = 0; j < n; ++j) {
    const int y = labels[static_cast<std::size_t>(j)];
    if (y < 0 || y >= s.outputs) throw InvalidArgument("Mlp: label out of range");
    delta2(y, j) -= 1.0;
  }
  Eigen::MatrixXd delta1 = l.w2.transpose() * delta2;
  delta1 = (pre.array() > 0.0).select(delta1, 0.0);

  const Index o1 = s.hidden * s.inputs;
  const Index o2 = o1 + s.hidden;
  const Index o3 = o2 + s.outputs * s.hidden;
  Eigen::MatrixXd g(param_count(), n);
  for (Index j = 0; j < n; ++j) {
    auto col = g.col(j);
    Eigen::Map<Eigen::MatrixXd>(col.data(), s.hidden, s.inputs).noalias() =
        delta1.col(j) * x.row(j);
    col.segment(o1, s.hidden) = delta1.col(j);
    Eigen::Map<Eigen::MatrixXd>(col.data() + o2, s.outputs, s.hidden)
        .noalias() = delta2.col(j) * act.col(j).transpose();
    col.segment(o3, s.outputs) = delta2.col(j);
  }
  if (!g.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite gradient (parameter max |.| = "
        << params.cwiseAbs().maxCoeff() << ")";
    throw NumericalError(msg.str());
  }
  return g;
}

GradientVector Mlp::micro_batch_gradient(
    const Eigen::VectorXd& params, const Dataset& data,
    std::span<const Index> micro_batch) const {
  if (micro_batch.empty()) throw InvalidArgument("empty micro-batch");
  FeatureMatrix x(static_cast<Index>(micro_batch.size()), data.feature_dim());
  std::vector<int> y(micro_batch.size());
  for (std::size_t i = 0; i < micro_batch.size(); ++i) {
    x.row(static_cast<Index>(i)) = data.features.row(micro_batch[i]);
    y[i] = data.labels[static_cast<std::size_t>(micro_batch[i])];
  }
  const Eigen::MatrixXd g = example_gradients(params, x, y);
  return GradientVector{g.rowwise().mean(), Stage::kRaw};
}

std::vector<int> Mlp::predict(const Eigen::VectorXd& params,
                              const Eigen::Ref<const FeatureMatrix>& x) const {
  const Eigen::MatrixXd z = logits(params, x);
  std::vector<int> out(static_cast<std::size_t>(z.cols()));
  for (Index j = 0; j < z.cols(); ++j) {
    Index best = 0;
    for (Index c = 1; c < z.rows(); ++c) {
      if (z(c, j) > z(best, j)) best = c;
    }
    out[static_cast<std::size_t>(j)] = static_cast<int>(best);
  }
  return out;
}

double evaluate_accuracy(const Mlp& model, const Eigen::VectorXd& params,
                         const Dataset& test_set) {
  if (test_set.size() == 0) {
    throw InvalidArgument("evaluate_accuracy: empty test set");
  }
  const auto pred = model.predict(params, test_set.features);
  Index correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    correct += pred[i] == test_set.labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(test_set.size());
}

}  // namespace ddpsgd
