// Command-line front end for the segmentation lab. Subcommands mirror the
// pipeline stages so each one can run (and be re-run) independently against
// the artifacts already on disk.

#include <cstdio>
#include <exception>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "vseg/pipeline.hpp"
#include "vseg/surface.hpp"
#include "vseg/volume.hpp"

namespace {

struct StageOpts {
  std::string config_path;
  std::string out_override;
  std::vector<std::uint64_t> seeds;
};

void add_stage_opts(CLI::App* cmd, StageOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config (JSON)")->required();
  cmd->add_option("--seed", opts.seeds, "seed(s) to run; defaults to the config's list");
  cmd->add_option("--out", opts.out_override, "override the config's output directory");
}

vseg::ExperimentConfig load_config(const StageOpts& opts) {
  vseg::ExperimentConfig config = vseg::load_experiment_config(opts.config_path);
  if (!opts.out_override.empty()) config.output_dir = opts.out_override;
  if (!opts.seeds.empty()) config.seeds = opts.seeds;
  config.validate();
  return config;
}

void print_report(const vseg::RunReport& report) {
  const auto opt = [](const std::optional<double>& v) {
    return v ? std::to_string(*v) : std::string("n/a");
  };
  std::printf("seed %llu: dice %.4f -> %.4f | contour %.4f -> %.4f | asd %s -> %s | rmsd %s -> %s\n",
              static_cast<unsigned long long>(report.seed), report.pwc.mean_dice,
              report.pwr.mean_dice, report.pwc.mean_contour_dice, report.pwr.mean_contour_dice,
              opt(report.pwc.mean_asd).c_str(), opt(report.pwr.mean_asd).c_str(),
              opt(report.pwc.mean_rmsd).c_str(), opt(report.pwr.mean_rmsd).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volumetric segmentation lab: labelmap-guided (pwc) vs signed-distance-guided "
               "(pwr) 3D U-nets on synthetic shapes"};
  app.require_subcommand(1);

  StageOpts generate_opts, sdf_opts, train_opts, predict_opts, evaluate_opts, run_opts;
  double sdf_clamp = 0.0;
  std::string train_arm, predict_arm, surface_arm = "pwr";
  std::string surface_in, surface_out;

  CLI::App* generate = app.add_subcommand("generate", "draw and voxelize the synthetic dataset");
  add_stage_opts(generate, generate_opts);

  CLI::App* sdf = app.add_subcommand("sdf", "compute signed distance fields for every case");
  add_stage_opts(sdf, sdf_opts);
  sdf->add_option("--clamp", sdf_clamp, "clamp |SDF| to this world-unit bound (0 = off)")
      ->check(CLI::NonNegativeNumber);

  CLI::App* train = app.add_subcommand("train", "train one arm on the train split");
  add_stage_opts(train, train_opts);
  train->add_option("--arm", train_arm, "pwc or pwr")
      ->required()
      ->check(CLI::IsMember({"pwc", "pwr"}));

  CLI::App* predict = app.add_subcommand("predict", "predict the test split with a trained arm");
  add_stage_opts(predict, predict_opts);
  predict->add_option("--arm", predict_arm, "pwc or pwr")
      ->required()
      ->check(CLI::IsMember({"pwc", "pwr"}));

  CLI::App* evaluate = app.add_subcommand("evaluate", "score both arms and write the reports");
  add_stage_opts(evaluate, evaluate_opts);

  CLI::App* run = app.add_subcommand("run", "all stages in order for each seed");
  add_stage_opts(run, run_opts);

  CLI::App* surface = app.add_subcommand("surface", "extract a mesh from a volume file as OBJ");
  surface->add_option("--in", surface_in, "input volume (.vvol)")->required();
  surface->add_option("--out", surface_out, "output mesh (.obj)")->required();
  surface->add_option("--arm", surface_arm,
                      "rule for f32 inputs: pwr reads an SDF (0 level), pwc a probability "
                      "(0.5 level); u8 labelmaps ignore this")
      ->check(CLI::IsMember({"pwc", "pwr"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      const auto config = load_config(generate_opts);
      for (std::uint64_t seed : config.seeds) {
        const auto manifest = vseg::run_generate(config, seed);
        std::printf("seed %llu: %zu cases -> %s\n", static_cast<unsigned long long>(seed),
                    manifest.entries.size(), config.seed_dir(seed).string().c_str());
      }
    } else if (sdf->parsed()) {
      const auto config = load_config(sdf_opts);
      for (std::uint64_t seed : config.seeds) {
        vseg::run_sdf(config, seed, sdf_clamp);
        std::printf("seed %llu: SDFs written\n", static_cast<unsigned long long>(seed));
      }
    } else if (train->parsed()) {
      const auto config = load_config(train_opts);
      const vseg::Head arm = vseg::head_from_string(train_arm);
      for (std::uint64_t seed : config.seeds) {
        const auto result = vseg::run_train(config, seed, arm);
        std::printf("seed %llu: trained %s, final epoch loss %.6g\n",
                    static_cast<unsigned long long>(seed), train_arm.c_str(),
                    result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back());
      }
    } else if (predict->parsed()) {
      const auto config = load_config(predict_opts);
      const vseg::Head arm = vseg::head_from_string(predict_arm);
      for (std::uint64_t seed : config.seeds) {
        vseg::run_predict(config, seed, arm);
        std::printf("seed %llu: %s predictions written\n", static_cast<unsigned long long>(seed),
                    predict_arm.c_str());
      }
    } else if (evaluate->parsed()) {
      const auto config = load_config(evaluate_opts);
      for (std::uint64_t seed : config.seeds) print_report(vseg::run_evaluate(config, seed));
    } else if (run->parsed()) {
      const auto config = load_config(run_opts);
      for (std::uint64_t seed : config.seeds) print_report(vseg::run_all(config, seed));
    } else if (surface->parsed()) {
      const vseg::Volume volume = vseg::read_volume(surface_in);
      vseg::TriMesh mesh;
      if (std::holds_alternative<vseg::BinaryVolume>(volume)) {
        mesh = vseg::extract_surface_binary(std::get<vseg::BinaryVolume>(volume));
      } else {
        const auto& field = std::get<vseg::ScalarVolume>(volume);
        mesh = vseg::head_from_string(surface_arm) == vseg::Head::pwc
                   ? vseg::extract_surface_binary(
                         vseg::threshold(field, 0.5, vseg::ThresholdSense::Above))
                   : vseg::extract_surface_sdf(field);
      }
      if (mesh.empty())
        std::fprintf(stderr, "seglab: warning: %s has an empty surface\n", surface_in.c_str());
      vseg::write_obj(surface_out, mesh);
      std::printf("%zu vertices, %zu triangles -> %s\n", mesh.vertices.size(),
                  mesh.triangles.size(), surface_out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "seglab: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
