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

#include "ddpsgd/trainer.hpp"

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ddpsgd/hash.hpp"

namespace ddpsgd {
namespace {

// RNG streams per iteration t: sampling uses 2t, noise 2t + 1. Stream 0 and
// the small constants used elsewhere are never reached for t >= 1.
constexpr std::uint64_t kStepStreamBase = 1ull << 32;

std::string codebook_descriptor(const Codebook* codebook) {
  if (!codebook) return "none";
  std::uint64_t h = kFnvOffset;
  for (Index i = 0; i < codebook->size(); ++i) {
    const auto len = static_cast<std::uint64_t>(codebook->stored_length(i));
    h = fnv1a64(&len, sizeof(len), h);
    const Eigen::VectorXd c = codebook->codeword(i);
    h = fnv1a64(c.data(), sizeof(double) * static_cast<std::size_t>(c.size()),
                h);
  }
  std::ostringstream os;
  os << "n=" << codebook->size() << ",dim=" << codebook->dim()
     << ",seed=" << codebook->seed() << ",fnv=" << hex64(h);
  return os.str();
}

}  // namespace

void TrainingConfig::validate() const {
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("q must lie in [0, 1]");
  if (micro_batch_size < 1) {
    throw InvalidArgument("micro_batch_size must be >= 1");
  }
  if (iterations < 0) throw InvalidArgument("iterations must be >= 0");
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw InvalidArgument("eta must be > 0");
  }
  if (noise_schedule.empty() ||
      (noise_schedule.size() != 1 &&
       static_cast<Index>(noise_schedule.size()) != iterations)) {
    throw InvalidArgument(
        "noise schedule must hold one spec or one per iteration");
  }
  denoise.validate();
  if (eval_every < 1) throw InvalidArgument("eval_every must be >= 1");
  if (!(clip_bound > 0.0)) throw InvalidArgument("clip_bound must be > 0");
  if (hidden < 1) throw InvalidArgument("hidden must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgument("delta must lie in (0, 1)");
  }
  if (alpha_max < kMinOrder) throw InvalidArgument("alpha_max must be >= 2");
  if (baseline_mode) {
    for (const auto& s : noise_schedule) {
      if (s.family() != Family::kGaussian) {
        throw InvalidArgument("baseline mode requires Gaussian noise");
      }
    }
  }
}

const NoiseSpec& TrainingConfig::spec_at(Index iteration) const {
  if (noise_schedule.size() == 1) return noise_schedule.front();
  return noise_schedule.at(static_cast<std::size_t>(iteration - 1));
}

std::vector<std::vector<Index>> sample_minibatch(Index n_records, double q,
                                                 Index micro_batch_size,
                                                 Rng& rng) {
  if (n_records < 1) throw InvalidArgument("sample_minibatch: empty dataset");
  if (!(q >= 0.0 && q <= 1.0)) {
    throw InvalidArgument("sample_minibatch: q must lie in [0, 1]");
  }
  if (micro_batch_size < 1) {
    throw InvalidArgument("sample_minibatch: micro_batch_size must be >= 1");
  }
  std::bernoulli_distribution include(q);
  std::vector<std::vector<Index>> batches;
  for (Index i = 0; i < n_records; ++i) {
    if (!include(rng)) continue;
    if (batches.empty() ||
        static_cast<Index>(batches.back().size()) == micro_batch_size) {
      batches.emplace_back();
    }
    batches.back().push_back(i);
  }
  return batches;
}

StepReport train_step(const Mlp& model, Eigen::VectorXd& params,
                      const Dataset& train_set, const TrainingConfig& config,
                      const Codebook* codebook, Index iteration) {
  if (!config.baseline_mode) {
    if (!codebook) throw InvalidArgument("train_step: codebook required");
    if (codebook->dim() != model.param_count()) {
      std::ostringstream msg;
      msg << "codebook dim " << codebook->dim()
          << " does not match the model parameter count "
          << model.param_count();
      throw InvalidArgument(msg.str());
    }
  }
  const NoiseSpec& spec = config.spec_at(iteration);
  const auto stream = kStepStreamBase + 2 * static_cast<std::uint64_t>(iteration);
  Rng sample_rng = make_rng(config.seed, stream);
  Rng noise_rng = make_rng(config.seed, stream + 1);

  StepReport report;
  report.iteration = iteration;
  const auto batches = sample_minibatch(train_set.size(), config.q,
                                        config.micro_batch_size, sample_rng);
  report.micro_batches = static_cast<Index>(batches.size());

  const Index dim = model.param_count();
  Eigen::VectorXd aggregated = Eigen::VectorXd::Zero(dim);
  if (!batches.empty()) {
    std::vector<Index> rows;
    for (const auto& b : batches) rows.insert(rows.end(), b.begin(), b.end());
    report.included = static_cast<Index>(rows.size());
    FeatureMatrix x(report.included, train_set.feature_dim());
    std::vector<int> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      x.row(static_cast<Index>(i)) = train_set.features.row(rows[i]);
      y[i] = train_set.labels[static_cast<std::size_t>(rows[i])];
    }
    Eigen::MatrixXd grads = model.example_gradients(params, x, y);
    if (config.micro_batch_size > 1) {
      Eigen::MatrixXd means(dim, report.micro_batches);
      Index offset = 0;
      for (std::size_t b = 0; b < batches.size(); ++b) {
        const auto len = static_cast<Index>(batches[b].size());
        means.col(static_cast<Index>(b)) =
            grads.middleCols(offset, len).rowwise().mean();
        offset += len;
      }
      grads = std::move(means);
    }
    if (config.baseline_mode) {
      for (Index b = 0; b < grads.cols(); ++b) {
        const double norm = grads.col(b).norm();
        if (norm > config.clip_bound) grads.col(b) *= config.clip_bound / norm;
      }
    } else {
      grads = encode_batch(grads, *codebook).encoded;
    }
    for (Index b = 0; b < grads.cols(); ++b) aggregated += grads.col(b);
  }
  report.aggregated_norm = aggregated.norm();

  GradientVector privatized{aggregated, Stage::kPrivatized};
  Eigen::VectorXd noise(dim);
  spec.draw_into(noise, noise_rng);
  privatized.values += noise;
  report.privatized_norm = privatized.values.norm();

  const DenoiseResult den = denoise(privatized, spec, config.denoise);
  report.ks_value = den.ks;
  report.update_applied = den.applied;
  if (den.applied) {
    params.noalias() -= config.eta * den.gradient.values;
    report.update_norm = config.eta * den.gradient.values.norm();
    if (!params.allFinite()) {
      std::ostringstream msg;
      msg << "non-finite parameters after iteration " << iteration;
      throw NumericalError(msg.str());
    }
  }
  return report;
}

std::string PrivacyReport::to_json() const {
  nlohmann::ordered_json j;
  j["mode"] = mode;
  j["q"] = q;
  j["iterations"] = iterations;
  j["delta"] = delta;
  j["noise_schedule"] = schedule;
  j["codebook"] = codebook;
  j["epsilon"] = dp.epsilon;
  j["achieving_alpha"] = dp.achieving_alpha;
  auto& c = j["rdp_curve"];
  c = nlohmann::ordered_json::array();
  for (int a = kMinOrder; a <= curve.alpha_max(); ++a) {
    c.push_back({{"alpha", a}, {"eps", curve.at(a)}});
  }
  return j.dump(2);
}

RdpCurve per_step_curve(const TrainingConfig& config, const Codebook* codebook,
                        const NoiseSpec& spec, MomentCache* cache) {
  if (config.baseline_mode) {
    if (spec.family() != Family::kGaussian) {
      throw InvalidArgument("baseline mode requires Gaussian noise");
    }
    // Neighbouring inputs differ by one clipped contribution of norm at most
    // clip_bound; for Gaussian noise only its norm matters.
    Eigen::VectorXd psi(1);
    psi << config.clip_bound;
    return single_psi_rdp_curve(config.q, psi, spec, config.alpha_max, cache);
  }
  if (!codebook) throw InvalidArgument("per_step_curve: codebook required");
  return codebook_rdp_curve(config.q, *codebook, spec, config.alpha_max,
                            cache);
}

PrivacyReport privacy_report(const TrainingConfig& config,
                             const Codebook* codebook, Index iterations,
                             MomentCache* cache) {
  PrivacyReport r;
  r.mode = config.baseline_mode ? "baseline" : "codebook";
  r.q = config.q;
  r.iterations = iterations;
  r.delta = config.delta;
  r.codebook = config.baseline_mode ? "none" : codebook_descriptor(codebook);
  for (const auto& s : config.noise_schedule) r.schedule.push_back(s.describe());

  std::map<std::string, RdpCurve> by_spec;
  std::vector<RdpCurve> steps;
  steps.reserve(static_cast<std::size_t>(iterations));
  for (Index t = 1; t <= iterations; ++t) {
    const NoiseSpec& spec = config.spec_at(t);
    auto it = by_spec.find(spec.describe());
    if (it == by_spec.end()) {
      it = by_spec
               .emplace(spec.describe(),
                        per_step_curve(config, codebook, spec, cache))
               .first;
    }
    steps.push_back(it->second);
  }
  r.curve = steps.empty() ? RdpCurve::zeros(config.alpha_max) : compose(steps);
  // Nothing is released before the first step.
  r.dp = iterations == 0 ? PrivacyParams{0.0, config.delta, kMinOrder}
                         : to_dp(r.curve, config.delta);
  return r;
}

TrainResult train(const Dataset& train_set, const Dataset& test_set,
                  const TrainingConfig& config, const Codebook* codebook,
                  const std::function<void(const TrajectoryRow&)>& on_row) {
  config.validate();
  if (train_set.size() == 0) throw InvalidArgument("train: empty training set");
  Mlp model(MlpShape{train_set.feature_dim(), config.hidden, 10});
  TrainResult result;
  result.params = model.init_params(config.seed);

  MomentCache cache;
  std::map<std::string, RdpCurve> by_spec;
  RdpCurve running = RdpCurve::zeros(config.alpha_max);
  for (Index t = 1; t <= config.iterations; ++t) {
    const NoiseSpec& spec = config.spec_at(t);
    auto it = by_spec.find(spec.describe());
    if (it == by_spec.end()) {
      it = by_spec
               .emplace(spec.describe(),
                        per_step_curve(config, codebook, spec, &cache))
               .first;
    }
    const StepReport step =
        train_step(model, result.params, train_set, config, codebook, t);
    running += it->second;

    TrajectoryRow row;
    row.iteration = t;
    row.eps_dp_so_far = to_dp(running, config.delta).epsilon;
    row.ks_value = step.ks_value;
    row.update_applied = step.update_applied;
    if (t % config.eval_every == 0 || t == config.iterations) {
      row.accuracy = evaluate_accuracy(model, result.params, test_set);
    }
    if (on_row) on_row(row);
    result.trajectory.push_back(row);
  }
  result.privacy =
      privacy_report(config, codebook, config.iterations, &cache);
  result.final_accuracy = evaluate_accuracy(model, result.params, test_set);
  return result;
}

Histogram make_histogram(const Eigen::Ref<const Eigen::VectorXd>& values,
                         int bins) {
  if (bins < 1) throw InvalidArgument("histogram: bins must be >= 1");
  if (values.size() == 0) throw InvalidArgument("histogram: no values");
  double lo = values.minCoeff();
  double hi = values.maxCoeff();
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    throw InvalidArgument("histogram: non-finite values");
  }
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  Histogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) {
    h.edges[static_cast<std::size_t>(b)] = lo + (hi - lo) * b / bins;
  }
  h.edges.back() = hi;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  const double width = (hi - lo) / bins;
  for (Index i = 0; i < values.size(); ++i) {
    auto b = static_cast<Index>((values[i] - lo) / width);
    b = std::clamp<Index>(b, 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

Histogram gradient_histogram(const Mlp& model, const Eigen::VectorXd& params,
                             const Dataset& dataset, int bins) {
  if (dataset.size() == 0) throw InvalidArgument("histogram: empty dataset");
  constexpr Index kChunk = 64;
  auto for_each_chunk = [&](auto&& fn) {
    for (Index start = 0; start < dataset.size(); start += kChunk) {
      const Index len = std::min(kChunk, dataset.size() - start);
      const std::span<const int> y(
          dataset.labels.data() + start, static_cast<std::size_t>(len));
      fn(model.example_gradients(params, dataset.features.middleRows(start, len),
                                 y));
    }
  };
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for_each_chunk([&](const Eigen::MatrixXd& g) {
    lo = std::min(lo, g.minCoeff());
    hi = std::max(hi, g.maxCoeff());
  });
  // Edges come from the global range; counts are accumulated per chunk.
  Eigen::VectorXd range(2);
  range << lo, hi;
  Histogram h = make_histogram(range, bins);
  std::fill(h.counts.begin(), h.counts.end(), 0);
  const double first = h.edges.front();
  const double width = (h.edges.back() - first) / bins;
  for_each_chunk([&](const Eigen::MatrixXd& g) {
    for (Index i = 0; i < g.size(); ++i) {
      auto b = static_cast<Index>((g.data()[i] - first) / width);
      b = std::clamp<Index>(b, 0, bins - 1);
      ++h.counts[static_cast<std::size_t>(b)];
    }
  });
  return h;
}

}  // namespace ddpsgd
