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

#include "ddpsgd/experiments.hpp"

#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

#include "ddpsgd/trainer.hpp"

namespace ddpsgd {

std::pair<Dataset, Dataset> load_splits(const RunConfig& cfg) {
  Dataset all = load_idx(cfg.get("data.images"), cfg.get("data.labels"));
  const Index train_size = cfg.get_int("data.train_size");
  const Index test_size = cfg.get_int("data.test_size");
  if (train_size < 1 || test_size < 0 || train_size + test_size > all.size()) {
    std::ostringstream msg;
    msg << "data split " << train_size << " + " << test_size
        << " does not fit " << all.size() << " records";
    throw InvalidArgument(msg.str());
  }
  auto [train, rest] = split(all, train_size, cfg.get_uint("data.split_seed"));
  if (test_size > 0) rest = subset(rest, test_size, 0);
  return {std::move(train), std::move(rest)};
}

Index model_dim(const RunConfig& cfg) {
  return MlpShape{784, cfg.get_int("train.hidden"), 10}.param_count();
}

Codebook resolve_codebook(const RunConfig& cfg, Index dim) {
  const auto& path = cfg.get("codebook.path");
  if (path.empty()) {
    return generate_codebook(cfg.get_int("codebook.size"), dim,
                             cfg.get_uint("codebook.seed"));
  }
  Codebook cb = load_codebook(path);
  if (cb.dim() != dim) {
    std::ostringstream msg;
    msg << path << ": codebook dim " << cb.dim() << " but the model needs "
        << dim;
    throw InvalidArgument(msg.str());
  }
  return cb;
}

double calibrate_variance(Family family, double shape, int alpha, double q,
                          const Codebook& codebook, double target,
                          MomentCache* cache, double tolerance) {
  if (!(target > 0.0)) throw InvalidArgument("calibration target must be > 0");
  MomentCache local;
  MomentCache* memo = cache ? cache : &local;
  auto eps = [&](double log_v) {
    return codebook_rdp(alpha, q, codebook,
                        NoiseSpec::make(family, std::exp(log_v), shape), memo);
  };
  // eps decreases in the variance; widen until the target is bracketed.
  double lo = 0.0;
  double hi = 0.0;
  while (eps(lo) < target) {
    lo -= 2.0;
    if (lo < -40.0) throw NumericalError("calibration: target too large");
  }
  while (eps(hi) > target) {
    hi += 2.0;
    if (hi > 40.0) throw NumericalError("calibration: target too small");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double e = eps(mid);
    if (std::abs(e - target) < tolerance) return std::exp(mid);
    if (e > target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-15) break;
  }
  throw NumericalError("calibration did not reach the residual tolerance");
}

L1Config l1_config(const RunConfig& cfg) {
  L1Config c;
  const double dof = cfg.get_double("l1.dof");
  for (const auto& name : cfg.get_strings("l1.families")) {
    const Family f = parse_family(name);
    c.families.push_back(
        NoiseSpec::make(f, 1.0, f == Family::kStudentT ? dof : 0.0));
  }
  c.targets = cfg.get_doubles("l1.targets");
  c.dim = cfg.get_int("l1.dim");
  c.codebook_size = cfg.get_int("l1.codebook_size");
  c.codebook_seed = cfg.get_uint("codebook.seed");
  c.q = cfg.get_double("l1.q");
  c.trials = cfg.get_int("l1.trials");
  c.seed = cfg.get_uint("train.seed");
  return c;
}

std::vector<L1Row> l1_experiment(const L1Config& config) {
  if (config.families.empty() || config.targets.empty()) {
    throw InvalidArgument("l1 experiment: need families and targets");
  }
  if (config.trials < 2) throw InvalidArgument("l1 experiment: trials >= 2");
  const Codebook codebook =
      generate_codebook(config.codebook_size, config.dim, config.codebook_seed);

  // The synthetic gradients are shared by every grid point.
  Eigen::MatrixXd raw(config.dim, config.trials);
  {
    Rng rng = make_rng(config.seed, 0x11);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index i = 0; i < raw.size(); ++i) raw.data()[i] = normal(rng);
  }
  const Eigen::MatrixXd encoded = encode_batch(raw, codebook).encoded;

  std::vector<L1Row> rows;
  MomentCache cache;
  for (std::size_t fi = 0; fi < config.families.size(); ++fi) {
    const NoiseSpec& fam = config.families[fi];
    const double shape = fam.family() == Family::kStudentT ? fam.dof()
                         : fam.family() == Family::kVarianceGamma
                             ? fam.lambda()
                             : 0.0;
    for (std::size_t ti = 0; ti < config.targets.size(); ++ti) {
      L1Row row;
      row.family = family_name(fam.family());
      row.target = config.targets[ti];
      row.variance = calibrate_variance(fam.family(), shape, 2, config.q,
                                        codebook, row.target, &cache);
      const NoiseSpec spec = NoiseSpec::make(fam.family(), row.variance, shape);
      row.achieved = codebook_rdp(2, config.q, codebook, spec, &cache);

      Rng rng = make_rng(config.seed, 0x100 + 0x100 * fi + ti);
      Eigen::VectorXd noise(config.dim);
      double sum = 0.0;
      double sum_sq = 0.0;
      for (Index t = 0; t < config.trials; ++t) {
        spec.draw_into(noise, rng);
        const Eigen::VectorXd privatized = encoded.col(t) + noise;
        const double l1 = (privatized - encoded.col(t)).lpNorm<1>();
        sum += l1;
        sum_sq += l1 * l1;
      }
      const double n = static_cast<double>(config.trials);
      row.mean_l1 = sum / n;
      row.stderr_l1 =
          std::sqrt(std::max(0.0, sum_sq / n - row.mean_l1 * row.mean_l1) /
                    (n - 1));
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<SweepRow> run_sweep(const RunConfig& cfg) {
  const auto [train_set, test_set] = load_splits(cfg);
  const Family family = parse_family(cfg.get("sweep.family"));
  const double shape = cfg.get_double("sweep.shape");
  TrainingConfig base = cfg.training();
  std::optional<Codebook> codebook;
  if (!base.baseline_mode) codebook = resolve_codebook(cfg, model_dim(cfg));

  std::vector<SweepRow> rows;
  for (double v : cfg.get_doubles("sweep.variances")) {
    TrainingConfig c = base;
    c.noise_schedule = {NoiseSpec::make(family, v, shape)};
    const auto result =
        train(train_set, test_set, c, codebook ? &*codebook : nullptr);
    rows.push_back({c.noise_schedule[0].describe(), result.privacy.dp.epsilon,
                    result.privacy.dp.achieving_alpha, result.final_accuracy});
  }
  return rows;
}

void write_csv_preamble(std::ostream& os, const RunConfig& cfg) {
  os << "# ddpsgd " << kVersion << " config=" << cfg.hash() << "\n";
}

}  // namespace ddpsgd
