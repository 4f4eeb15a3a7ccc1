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

// Command-line entry point:
//   ddpsgd gen-codebook | account | train | sweep | l1-experiment | histogram

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "ddpsgd/config.hpp"
#include "ddpsgd/experiments.hpp"
#include "ddpsgd/hash.hpp"
#include "ddpsgd/trainer.hpp"

namespace fs = std::filesystem;
using namespace ddpsgd;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> delta;
  bool baseline = false;
  bool csv = false;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "run config (key = value)");
  cmd->add_option("--seed", f.seed, "overrides train.seed");
  cmd->add_option("--out", f.out, "overrides output.dir");
  cmd->add_option("--delta", f.delta, "overrides privacy.delta (1e-5)");
  cmd->add_flag("--baseline", f.baseline, "clip-and-Gaussian baseline");
  cmd->add_flag("--csv", f.csv, "print CSV to stdout");
  cmd->add_option("--set", f.overrides, "extra key=value overrides");
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig cfg = f.config_path.empty() ? RunConfig{}
                                        : RunConfig::load(f.config_path);
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("--set expects key=value, got " + kv);
    }
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed) cfg.set("train.seed", std::to_string(*f.seed));
  if (f.out) cfg.set("output.dir", *f.out);
  if (f.delta) {
    std::ostringstream os;
    os << std::setprecision(17) << *f.delta;
    cfg.set("privacy.delta", os.str());
  }
  if (f.baseline) cfg.set("train.baseline", "true");
  return cfg;
}

// Creates output.dir and echoes the resolved config into it.
fs::path prepare_output(const RunConfig& cfg) {
  const fs::path dir = cfg.get("output.dir");
  fs::create_directories(dir);
  std::ofstream os(dir / "config.resolved.txt");
  os << cfg.resolved();
  if (!os) throw FormatError("cannot write " + (dir / "config.resolved.txt").string());
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot write " + path.string());
  os << std::setprecision(17);
  return os;
}

int cmd_gen_codebook(const RunConfig& cfg) {
  const fs::path dir = prepare_output(cfg);
  const Codebook cb = generate_codebook(cfg.get_int("codebook.size"),
                                        model_dim(cfg),
                                        cfg.get_uint("codebook.seed"));
  const std::string path = cfg.get("codebook.path").empty()
                               ? (dir / "codebook.bin").string()
                               : cfg.get("codebook.path");
  save_codebook(cb, path);
  std::cout << "wrote " << path << " (" << cb.size() << " codewords, dim "
            << cb.dim() << ")\n";
  return 0;
}

int cmd_account(const RunConfig& cfg, bool csv) {
  const fs::path dir = prepare_output(cfg);
  const TrainingConfig tc = cfg.training();
  std::optional<Codebook> cb;
  if (!tc.baseline_mode) cb = resolve_codebook(cfg, model_dim(cfg));
  const PrivacyReport report =
      privacy_report(tc, cb ? &*cb : nullptr, tc.iterations);

  std::ostringstream table;
  table << std::setprecision(12);
  write_csv_preamble(table, cfg);
  table << "alpha,eps_rdp,eps_dp_at_delta\n";
  const double log_inv_delta = -std::log(tc.delta);
  for (int a = kMinOrder; a <= report.curve.alpha_max(); ++a) {
    table << a << "," << report.curve.at(a) << ","
          << report.curve.at(a) + log_inv_delta / (a - 1) << "\n";
  }
  auto os = open_out(dir / "account.csv");
  os << table.str();
  open_out(dir / "privacy_report.json") << report.to_json() << "\n";
  if (csv) {
    std::cout << table.str();
  } else {
    std::cout << "epsilon = " << report.dp.epsilon << " at delta = "
              << report.dp.delta << " (alpha = " << report.dp.achieving_alpha
              << ", T = " << report.iterations << ")\n";
  }
  return 0;
}

void write_trajectory_header(std::ostream& os, const RunConfig& cfg) {
  write_csv_preamble(os, cfg);
  os << "iteration,accuracy,eps_dp_so_far,ks_value,update_applied\n";
}

int cmd_train(const RunConfig& cfg, bool csv) {
  const fs::path dir = prepare_output(cfg);
  const TrainingConfig tc = cfg.training();
  const auto [train_set, test_set] = load_splits(cfg);
  std::optional<Codebook> cb;
  if (!tc.baseline_mode) cb = resolve_codebook(cfg, model_dim(cfg));

  auto traj = open_out(dir / "trajectory.csv");
  write_trajectory_header(traj, cfg);
  if (csv) write_trajectory_header(std::cout, cfg);
  auto emit = [&](std::ostream& os, const TrajectoryRow& r) {
    os << r.iteration << ",";
    if (r.accuracy) os << *r.accuracy;
    os << "," << r.eps_dp_so_far << "," << r.ks_value << ","
       << (r.update_applied ? 1 : 0) << "\n";
  };
  const TrainResult result =
      train(train_set, test_set, tc, cb ? &*cb : nullptr,
            [&](const TrajectoryRow& r) {
              emit(traj, r);
              if (csv) emit(std::cout, r);
            });

  auto summary = open_out(dir / "summary.json");
  summary << "{\n  \"final_accuracy\": " << result.final_accuracy
          << ",\n  \"config_hash\": \"" << cfg.hash()
          << "\",\n  \"privacy\": " << result.privacy.to_json() << "\n}\n";
  open_out(dir / "privacy_report.json") << result.privacy.to_json() << "\n";
  if (!csv) {
    std::cout << "final accuracy " << result.final_accuracy << ", epsilon "
              << result.privacy.dp.epsilon << " at delta "
              << result.privacy.dp.delta << "\n";
  }
  return 0;
}

int cmd_sweep(const RunConfig& cfg, bool csv) {
  const fs::path dir = prepare_output(cfg);
  const auto rows = run_sweep(cfg);
  std::ostringstream table;
  table << std::setprecision(12);
  write_csv_preamble(table, cfg);
  table << "noise,epsilon,achieving_alpha,final_accuracy\n";
  for (const auto& r : rows) {
    table << '"' << r.noise << "\"," << r.epsilon << "," << r.achieving_alpha
          << "," << r.final_accuracy << "\n";
  }
  open_out(dir / "sweep.csv") << table.str();
  if (csv) std::cout << table.str();
  return 0;
}

int cmd_l1(const RunConfig& cfg, bool csv) {
  const fs::path dir = prepare_output(cfg);
  const auto rows = l1_experiment(l1_config(cfg));
  std::ostringstream table;
  table << std::setprecision(12);
  write_csv_preamble(table, cfg);
  table << "family,d2_target,variance,d2_achieved,mean_l1,stderr_l1\n";
  for (const auto& r : rows) {
    table << r.family << "," << r.target << "," << r.variance << ","
          << r.achieved << "," << r.mean_l1 << "," << r.stderr_l1 << "\n";
  }
  open_out(dir / "l1.csv") << table.str();
  if (csv) std::cout << table.str();
  return 0;
}

int cmd_histogram(const RunConfig& cfg, bool csv) {
  const fs::path dir = prepare_output(cfg);
  auto [train_set, test_set] = load_splits(cfg);
  const Index records = cfg.get_int("histogram.records");
  if (records > 0 && records < train_set.size()) {
    train_set = subset(train_set, records, cfg.get_uint("train.seed"));
  }
  const Mlp model(MlpShape{784, cfg.get_int("train.hidden"), 10});
  const Eigen::VectorXd params = model.init_params(cfg.get_uint("train.seed"));
  const Histogram h = gradient_histogram(
      model, params, train_set, static_cast<int>(cfg.get_int("histogram.bins")));
  std::ostringstream table;
  table << std::setprecision(12);
  write_csv_preamble(table, cfg);
  table << "bin_low,bin_high,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    table << h.edges[b] << "," << h.edges[b + 1] << "," << h.counts[b] << "\n";
  }
  open_out(dir / "histogram.csv") << table.str();
  if (csv) std::cout << table.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Private SGD over a gradient codebook with a numerical "
               "Renyi-DP accountant"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonFlags flags;
  auto* gen = app.add_subcommand("gen-codebook", "generate a codebook file");
  auto* account = app.add_subcommand("account", "RDP and (eps, delta) table");
  auto* train_cmd = app.add_subcommand("train", "one training run");
  auto* sweep = app.add_subcommand("sweep", "accuracy vs epsilon over variances");
  auto* l1 = app.add_subcommand("l1-experiment",
                                "L1 distortion at matched alpha=2 budgets");
  auto* hist = app.add_subcommand("histogram", "per-example gradient histogram");
  for (auto* c : {gen, account, train_cmd, sweep, l1, hist}) add_common(c, flags);

  CLI11_PARSE(app, argc, argv);
  try {
    const RunConfig cfg = resolve(flags);
    if (gen->parsed()) return cmd_gen_codebook(cfg);
    if (account->parsed()) return cmd_account(cfg, flags.csv);
    if (train_cmd->parsed()) return cmd_train(cfg, flags.csv);
    if (sweep->parsed()) return cmd_sweep(cfg, flags.csv);
    if (l1->parsed()) return cmd_l1(cfg, flags.csv);
    if (hist->parsed()) return cmd_histogram(cfg, flags.csv);
  } catch (const std::exception& e) {
    std::cerr << "ddpsgd: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
