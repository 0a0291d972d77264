#pragma once

// Batch experiment harness: one run = generate a synthetic dataset, derive
// SDFs, train both arms on the same budget, predict the test split, and
// report the four metrics with per-metric gains. Arm "pwc" classifies voxels
// (softmax head, cross-entropy on binary labels); arm "pwr" regresses the
// signed distance field (linear head, inverse-|SDF|-weighted MSE). Every
// stage persists its outputs under <output_dir>/seed-<seed>/ so stages can
// run and be inspected independently.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vseg/metrics.hpp"
#include "vseg/net.hpp"
#include "vseg/shapes.hpp"

namespace vseg {

struct ExperimentConfig {
  GeneratorConfig dataset;  // dataset.seed is overridden by the per-run seed
  std::array<int, 3> coarse_dims{32, 32, 32};
  int levels = 2;
  int base_channels = 8;
  double learning_rate = 3e-3;
  int epochs = 24;
  OptimizerKind optimizer = OptimizerKind::adam;
  double weight_epsilon = 1.0;  // coarse voxels
  double pwr_clamp_tau = 20.0;  // coarse voxels; 0 disables clamping
  bool normalize_by_weight_sum = false;
  // Default derives PWR targets by downsampling the full-resolution SDF; the
  // alternative computes the SDF directly on the coarse label grid.
  bool sdf_at_coarse = false;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::filesystem::path output_dir = "out";
  int threads = 1;
  EvalConfig eval;

  std::array<double, 3> coarse_spacing() const;
  // Edge length of a coarse voxel in world units; validate() requires the
  // coarse grid to be isotropic so SDF values convert to coarse-voxel units
  // by one scalar.
  double coarse_voxel_size() const;
  NetSpec net_spec(Head head) const;
  TrainConfig train_config(Head head, std::uint64_t run_seed) const;
  std::filesystem::path seed_dir(std::uint64_t seed) const;
  void validate() const;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// On-disk layout of one seed's artifacts.
struct SeedPaths {
  std::filesystem::path root;

  std::filesystem::path manifest() const { return root / "manifest.json"; }
  std::filesystem::path sdf_dir() const { return root / "sdf"; }
  std::filesystem::path sdf_file(const std::string& id) const {
    return sdf_dir() / (id + ".vvol");
  }
  std::filesystem::path params_file(Head arm) const {
    return root / ("params-" + to_string(arm) + ".vnet");
  }
  std::filesystem::path loss_file(Head arm) const {
    return root / ("loss-" + to_string(arm) + ".json");
  }
  std::filesystem::path pred_dir(Head arm) const { return root / ("pred-" + to_string(arm)); }
  std::filesystem::path seg_dir(Head arm) const { return root / ("seg-" + to_string(arm)); }
  std::filesystem::path pred_file(Head arm, const std::string& id) const {
    return pred_dir(arm) / (id + ".vvol");
  }
  std::filesystem::path seg_file(Head arm, const std::string& id) const {
    return seg_dir(arm) / (id + ".vvol");
  }
  std::filesystem::path report_json() const { return root / "report.json"; }
  std::filesystem::path cases_csv() const { return root / "cases.csv"; }
  std::filesystem::path report_md() const { return root / "report.md"; }
};

struct CaseMetrics {
  std::string id;
  MetricSet metrics;
};

struct ArmSummary {
  std::vector<CaseMetrics> cases;
  double mean_dice = 0.0;
  double mean_contour_dice = 0.0;
  std::optional<double> mean_asd;
  std::optional<double> mean_rmsd;
};

// Gains are percent improvement of pwr over pwc on the arm means; a gain is
// absent when its inputs are (no finite distances) or the baseline is zero.
struct RunReport {
  std::uint64_t seed = 0;
  ArmSummary pwc;
  ArmSummary pwr;
  std::optional<double> gain_dice;
  std::optional<double> gain_contour_dice;
  std::optional<double> gain_asd;
  std::optional<double> gain_rmsd;
  std::map<std::string, double> stage_seconds;
};

// Stages. Each validates the config, reads its inputs from the seed
// directory, and persists its outputs there.
DatasetManifest run_generate(const ExperimentConfig& config, std::uint64_t seed);
void run_sdf(const ExperimentConfig& config, std::uint64_t seed, double clamp_tau = 0.0);
TrainResult run_train(const ExperimentConfig& config, std::uint64_t seed, Head arm);
void run_predict(const ExperimentConfig& config, std::uint64_t seed, Head arm);
RunReport run_evaluate(const ExperimentConfig& config, std::uint64_t seed,
                       const std::map<std::string, double>& stage_seconds = {});
RunReport run_all(const ExperimentConfig& config, std::uint64_t seed);

}  // namespace vseg
