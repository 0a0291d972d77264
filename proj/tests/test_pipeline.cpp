#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "vseg/distance.hpp"
#include "vseg/morphology.hpp"
#include "vseg/pipeline.hpp"
#include "vseg/volume.hpp"

using namespace vseg;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "vseg-test-pipeline";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

fs::path write_json(const std::string& name, const nlohmann::json& j) {
  const fs::path p = test_dir() / name;
  std::ofstream out(p);
  out << j.dump(2);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Small enough to train in seconds, big enough to exercise every stage.
ExperimentConfig mini_config(const fs::path& out_dir) {
  ExperimentConfig config;
  config.dataset.dims = {16, 16, 16};
  config.dataset.train_per_shape = 1;
  config.dataset.test_per_shape = 1;
  config.coarse_dims = {8, 8, 8};
  config.levels = 2;
  config.base_channels = 4;
  config.epochs = 2;
  config.seeds = {1};
  config.output_dir = out_dir;
  return config;
}

std::string message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("an empty config file yields the default experiment") {
  const fs::path p = write_json("empty.json", nlohmann::json::object());
  const ExperimentConfig c = load_experiment_config(p);
  CHECK(c.dataset.dims == std::array<int, 3>{128, 128, 128});
  CHECK(c.coarse_dims == std::array<int, 3>{32, 32, 32});
  CHECK(c.levels == 2);
  CHECK(c.base_channels == 8);
  CHECK(c.epochs == 24);
  CHECK(c.optimizer == OptimizerKind::adam);
  CHECK(c.pwr_clamp_tau == 20.0);
  CHECK(c.weight_epsilon == 1.0);
  CHECK_FALSE(c.sdf_at_coarse);
  CHECK(c.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(c.output_dir == fs::path("out"));
  CHECK(c.eval.kernel_radius == std::array<int, 3>{2, 2, 2});
  CHECK(c.eval.samples_per_triangle == 3);
  c.validate();
  CHECK(c.coarse_voxel_size() == 4.0);
  CHECK(c.coarse_spacing() == std::array<double, 3>{4.0, 4.0, 4.0});
}

TEST_CASE("config files reject unknown keys and bad values") {
  CHECK(message([&] {
          load_experiment_config(write_json("unknown.json", {{"coarse_dim", 16}}));
        }).find("unknown key") != std::string::npos);

  CHECK(message([&] {
          load_experiment_config(
              write_json("opt.json", {{"train", {{"optimizer", "lbfgs"}}}}));
        }).find("optimizer") != std::string::npos);

  CHECK(message([&] {
          load_experiment_config(write_json("nested.json", {{"dataset", {{"seed", 3}}}}));
        }).find("unknown key") != std::string::npos);

  // Coarse dims must divide the dataset dims.
  ExperimentConfig bad;
  bad.dataset.dims = {48, 48, 48};
  bad.coarse_dims = {32, 32, 32};
  CHECK(message([&] { bad.validate(); }).find("divide") != std::string::npos);

  // The coarse grid must come out isotropic.
  ExperimentConfig aniso;
  aniso.dataset.dims = {128, 128, 128};
  aniso.dataset.spacing = {1.0, 1.0, 2.0};
  aniso.coarse_dims = {32, 32, 32};
  CHECK(message([&] { aniso.validate(); }).find("isotropic") != std::string::npos);

  // Anisotropy in the full grid is fine when the ratios cancel.
  ExperimentConfig ok;
  ok.dataset.dims = {128, 128, 64};
  ok.dataset.spacing = {1.0, 1.0, 2.0};
  ok.coarse_dims = {32, 32, 32};
  ok.validate();
  CHECK(ok.coarse_voxel_size() == 4.0);

  ExperimentConfig no_seeds;
  no_seeds.seeds.clear();
  CHECK(message([&] { no_seeds.validate(); }) != "");
}

TEST_CASE("a parsed config round trips its fields") {
  nlohmann::json j;
  j["dataset"] = {{"dims", {32, 32, 32}},      {"spacing", {0.5, 0.5, 0.5}},
                  {"train_per_shape", 2},      {"test_per_shape", 1},
                  {"size_min_frac", 0.08},     {"size_max_frac", 0.12},
                  {"max_retries", 16}};
  j["coarse_dims"] = {16, 16, 16};
  j["net"] = {{"levels", 3}, {"base_channels", 2}};
  j["train"] = {{"learning_rate", 5e-4},
                {"epochs", 7},
                {"optimizer", "sgd"},
                {"weight_epsilon", 2.0},
                {"clamp_tau", 10.0},
                {"normalize_by_weight_sum", true},
                {"sdf_at_coarse", true}};
  j["seeds"] = {4, 5};
  j["output_dir"] = "elsewhere";
  j["threads"] = 2;
  j["eval"] = {{"kernel_radius", {1, 1, 1}}, {"samples_per_triangle", 2},
               {"distance_source", "boundary_voxels"}};

  const ExperimentConfig c = load_experiment_config(write_json("full.json", j));
  CHECK(c.dataset.dims == std::array<int, 3>{32, 32, 32});
  CHECK(c.dataset.train_per_shape == 2);
  CHECK(c.levels == 3);
  CHECK(c.base_channels == 2);
  CHECK(c.learning_rate == 5e-4);
  CHECK(c.epochs == 7);
  CHECK(c.optimizer == OptimizerKind::sgd);
  CHECK(c.weight_epsilon == 2.0);
  CHECK(c.pwr_clamp_tau == 10.0);
  CHECK(c.normalize_by_weight_sum);
  CHECK(c.sdf_at_coarse);
  CHECK(c.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(c.output_dir == fs::path("elsewhere"));
  CHECK(c.threads == 2);
  CHECK(c.eval.kernel_radius == std::array<int, 3>{1, 1, 1});
  CHECK(c.eval.samples_per_triangle == 2);
  CHECK(c.eval.distance_source == DistanceSource::BoundaryVoxels);
  c.validate();
}

TEST_CASE("the generate stage writes one volume per case plus a manifest") {
  ExperimentConfig config = mini_config(test_dir() / "gen");
  config.dataset.train_per_shape = 2;
  config.dataset.test_per_shape = 1;
  const DatasetManifest manifest = run_generate(config, 7);
  CHECK(manifest.entries.size() == 12);  // 4 kinds * (2 + 1)

  const SeedPaths paths{config.seed_dir(7)};
  CHECK(fs::exists(paths.manifest()));
  int train = 0, test = 0;
  for (const auto& e : manifest.entries) {
    CHECK(fs::exists(paths.root / e.path));
    (e.split == Split::Train ? train : test) += 1;
  }
  CHECK(train == 8);
  CHECK(test == 4);
}

TEST_CASE("the sdf stage writes one field per case and clamps on request") {
  ExperimentConfig config = mini_config(test_dir() / "sdf");
  const DatasetManifest manifest = run_generate(config, 1);
  run_sdf(config, 1);

  const SeedPaths paths{config.seed_dir(1)};
  for (const auto& e : manifest.entries) {
    REQUIRE(fs::exists(paths.sdf_file(e.id)));
    const ScalarVolume sdf = read_scalar_volume(paths.sdf_file(e.id));
    const BinaryVolume mask = read_binary_volume(paths.root / e.path);
    REQUIRE(sdf.meta == mask.meta);
    // field < 0 is exactly the voxelized shape
    const BinaryVolume back = threshold(sdf, 0.0, ThresholdSense::Below);
    REQUIRE(back.voxels == mask.voxels);
  }

  // Re-running reproduces the same bytes.
  const std::string before = slurp(paths.sdf_file(manifest.entries[0].id));
  run_sdf(config, 1);
  CHECK(slurp(paths.sdf_file(manifest.entries[0].id)) == before);

  run_sdf(config, 1, 2.0);
  for (const auto& e : manifest.entries) {
    const ScalarVolume sdf = read_scalar_volume(paths.sdf_file(e.id));
    for (float v : sdf.voxels) {
      REQUIRE(v >= -2.0f);
      REQUIRE(v <= 2.0f);
    }
  }
}

TEST_CASE("training requires the sdf stage and derives per-arm seeds") {
  ExperimentConfig config = mini_config(test_dir() / "train");
  run_generate(config, 1);

  CHECK(message([&] { run_train(config, 1, Head::pwr); }).find("sdf") != std::string::npos);

  run_sdf(config, 1);
  const TrainResult pwc = run_train(config, 1, Head::pwc);
  const TrainResult pwr = run_train(config, 1, Head::pwr);
  CHECK(pwc.epoch_loss.size() == 2);
  CHECK(pwr.epoch_loss.size() == 2);

  const SeedPaths paths{config.seed_dir(1)};
  REQUIRE(fs::exists(paths.params_file(Head::pwc)));
  REQUIRE(fs::exists(paths.params_file(Head::pwr)));
  REQUIRE(fs::exists(paths.loss_file(Head::pwc)));

  const auto [spec_c, params_c] = read_params(paths.params_file(Head::pwc));
  const auto [spec_r, params_r] = read_params(paths.params_file(Head::pwr));
  CHECK(spec_c.head == Head::pwc);
  CHECK(spec_r.head == Head::pwr);
  CHECK(params_c.parameter_count() ==
        params_r.parameter_count() + static_cast<std::size_t>(config.base_channels) + 1);
  // Different arm, different derived seed.
  CHECK(params_c.seed != params_r.seed);

  const nlohmann::json loss = nlohmann::json::parse(slurp(paths.loss_file(Head::pwc)));
  CHECK(loss.at("arm") == "pwc");
  CHECK(loss.at("epoch_loss").size() == 2);

  // Retraining one arm after the other has run reproduces the same bytes:
  // each arm's stream depends only on config, seed, and arm.
  const std::string pwc_bytes = slurp(paths.params_file(Head::pwc));
  run_train(config, 1, Head::pwc);
  CHECK(slurp(paths.params_file(Head::pwc)) == pwc_bytes);
}

TEST_CASE("the predict stage writes fields and segmentations that agree") {
  ExperimentConfig config = mini_config(test_dir() / "predict");
  const DatasetManifest manifest = run_generate(config, 1);
  run_sdf(config, 1);
  run_train(config, 1, Head::pwc);
  run_train(config, 1, Head::pwr);
  run_predict(config, 1, Head::pwc);
  run_predict(config, 1, Head::pwr);

  const SeedPaths paths{config.seed_dir(1)};
  for (const auto& e : manifest.entries) {
    const bool is_test = e.split == Split::Test;
    CHECK(fs::exists(paths.pred_file(Head::pwc, e.id)) == is_test);
    CHECK(fs::exists(paths.seg_file(Head::pwr, e.id)) == is_test);
    if (!is_test) continue;

    const ScalarVolume prob = read_scalar_volume(paths.pred_file(Head::pwc, e.id));
    CHECK(prob.meta.dims == config.dataset.dims);
    for (float p : prob.voxels) {
      REQUIRE(p >= 0.0f);
      REQUIRE(p <= 1.0f);
    }
    const BinaryVolume seg_c = read_binary_volume(paths.seg_file(Head::pwc, e.id));
    CHECK(seg_c.voxels == threshold(prob, 0.5, ThresholdSense::Above).voxels);

    const ScalarVolume field = read_scalar_volume(paths.pred_file(Head::pwr, e.id));
    const BinaryVolume seg_r = read_binary_volume(paths.seg_file(Head::pwr, e.id));
    CHECK(seg_r.voxels == threshold(field, 0.0, ThresholdSense::Below).voxels);
  }
}

TEST_CASE("a full run produces reports whose gains match the arm means") {
  ExperimentConfig config = mini_config(test_dir() / "full-run");
  const RunReport report = run_all(config, 1);

  CHECK(report.seed == 1);
  CHECK(report.pwc.cases.size() == 4);
  CHECK(report.pwr.cases.size() == 4);
  CHECK(report.stage_seconds.count("generate") == 1);
  CHECK(report.stage_seconds.count("evaluate") == 1);

  const SeedPaths paths{config.seed_dir(1)};
  REQUIRE(fs::exists(paths.report_json()));
  REQUIRE(fs::exists(paths.cases_csv()));
  REQUIRE(fs::exists(paths.report_md()));

  const nlohmann::json j = nlohmann::json::parse(slurp(paths.report_json()));
  CHECK(j.at("seed") == 1);
  CHECK(j.at("arms").at("pwc").at("cases").size() == 4);
  CHECK(j.at("arms").at("pwc").at("mean").at("dice").get<double>() ==
        doctest::Approx(report.pwc.mean_dice).epsilon(1e-12));

  if (report.gain_dice) {
    const double expect =
        100.0 * (report.pwr.mean_dice - report.pwc.mean_dice) / report.pwc.mean_dice;
    CHECK(*report.gain_dice == doctest::Approx(expect).epsilon(1e-9));
  }

  // CSV: header + one row per (arm, case).
  std::istringstream csv(slurp(paths.cases_csv()));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(csv, line)) lines.push_back(line);
  REQUIRE(lines.size() == 9);
  CHECK(lines[0] == "id,arm,dice,contour_dice,asd,rmsd");
  for (std::size_t i = 1; i <= 4; ++i) CHECK(lines[i].find(",pwc,") != std::string::npos);
  for (std::size_t i = 5; i <= 8; ++i) CHECK(lines[i].find(",pwr,") != std::string::npos);
}

TEST_CASE("two runs of the same seed write identical tables") {
  ExperimentConfig a = mini_config(test_dir() / "det-a");
  ExperimentConfig b = mini_config(test_dir() / "det-b");
  run_all(a, 1);
  run_all(b, 1);
  const SeedPaths pa{a.seed_dir(1)}, pb{b.seed_dir(1)};
  CHECK(slurp(pa.cases_csv()) == slurp(pb.cases_csv()));
  CHECK(slurp(pa.report_md()) == slurp(pb.report_md()));
  CHECK(slurp(pa.params_file(Head::pwc)) == slurp(pb.params_file(Head::pwc)));

  // Training order between arms does not matter either.
  ExperimentConfig c = mini_config(test_dir() / "det-c");
  run_generate(c, 1);
  run_sdf(c, 1);
  run_train(c, 1, Head::pwr);  // reversed
  run_train(c, 1, Head::pwc);
  const SeedPaths pc{c.seed_dir(1)};
  CHECK(slurp(pc.params_file(Head::pwc)) == slurp(pa.params_file(Head::pwc)));
  CHECK(slurp(pc.params_file(Head::pwr)) == slurp(pa.params_file(Head::pwr)));
}

TEST_CASE("evaluation refuses to run with missing predictions") {
  ExperimentConfig config = mini_config(test_dir() / "missing");
  const DatasetManifest manifest = run_generate(config, 1);
  run_sdf(config, 1);
  run_train(config, 1, Head::pwc);
  run_train(config, 1, Head::pwr);
  run_predict(config, 1, Head::pwc);
  run_predict(config, 1, Head::pwr);

  // Drop one prediction file.
  std::string victim;
  for (const auto& e : manifest.entries)
    if (e.split == Split::Test) {
      victim = e.id;
      break;
    }
  const SeedPaths paths{config.seed_dir(1)};
  fs::remove(paths.pred_file(Head::pwr, victim));

  const std::string msg = message([&] { run_evaluate(config, 1); });
  CHECK(msg.find("missing predictions") != std::string::npos);
  CHECK(msg.find(victim) != std::string::npos);
}

TEST_CASE("a hand-built perfect prediction scores ones and zero gains") {
  ExperimentConfig config = mini_config(test_dir() / "perfect");
  const DatasetManifest manifest = run_generate(config, 1);
  run_sdf(config, 1);
  run_train(config, 1, Head::pwc);
  run_train(config, 1, Head::pwr);

  // Overwrite the prediction stage's outputs with the ground truth.
  const SeedPaths paths{config.seed_dir(1)};
  fs::create_directories(paths.pred_dir(Head::pwc));
  fs::create_directories(paths.pred_dir(Head::pwr));
  fs::create_directories(paths.seg_dir(Head::pwc));
  fs::create_directories(paths.seg_dir(Head::pwr));
  for (const auto& e : manifest.entries) {
    if (e.split != Split::Test) continue;
    const BinaryVolume truth = read_binary_volume(paths.root / e.path);
    write_volume(paths.pred_file(Head::pwc, e.id), as_scalar(truth));
    write_volume(paths.seg_file(Head::pwc, e.id), truth);
    // A +-0.5 field whose 0-level matches the labelmap's 0.5-level mesh.
    ScalarVolume field(truth.meta);
    for (std::size_t i = 0; i < truth.voxels.size(); ++i)
      field.voxels[i] = truth.voxels[i] ? -0.5f : 0.5f;
    write_volume(paths.pred_file(Head::pwr, e.id), field);
    write_volume(paths.seg_file(Head::pwr, e.id), truth);
  }

  const RunReport report = run_evaluate(config, 1);
  for (const ArmSummary* arm : {&report.pwc, &report.pwr}) {
    CHECK(arm->mean_dice == 1.0);
    CHECK(arm->mean_contour_dice == 1.0);
    REQUIRE(arm->mean_asd.has_value());
    REQUIRE(arm->mean_rmsd.has_value());
    CHECK(*arm->mean_asd <= 1e-12);
    CHECK(*arm->mean_rmsd <= 1e-12);
  }
  REQUIRE(report.gain_dice.has_value());
  CHECK(*report.gain_dice == 0.0);
  REQUIRE(report.gain_asd.has_value());
  CHECK(*report.gain_asd == 0.0);

  const std::string md = slurp(paths.report_md());
  CHECK(md.find("| Dice (x100) | 100.00 | 100.00 | 0.00 |") != std::string::npos);
}

TEST_CASE("zero learning rate trains to a flat loss curve") {
  ExperimentConfig config = mini_config(test_dir() / "flat");
  config.learning_rate = 0.0;
  config.epochs = 3;
  run_generate(config, 1);
  run_sdf(config, 1);
  const TrainResult r = run_train(config, 1, Head::pwr);
  REQUIRE(r.epoch_loss.size() == 3);
  CHECK(r.epoch_loss[1] == r.epoch_loss[0]);
  CHECK(r.epoch_loss[2] == r.epoch_loss[0]);
}
