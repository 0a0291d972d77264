#include "vseg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <variant>

#include <json.hpp>

#include "vseg/distance.hpp"
#include "vseg/resample.hpp"
#include "vseg/rng.hpp"

namespace vseg {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class StageTimer {
 public:
  double lap() {
    const auto now = Clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  using Clock = std::chrono::steady_clock;
  Clock::time_point last_ = Clock::now();
};

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

void require_keys(const json& j, const std::string& where,
                  std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
  for (const auto& item : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* a) { return item.key() == a; }))
      throw std::invalid_argument("config: unknown key \"" + item.key() + "\" in " + where);
  }
}

std::string optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::adam ? "adam" : "sgd";
}

OptimizerKind optimizer_from_name(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  throw std::invalid_argument("config: unknown optimizer \"" + name + "\"");
}

std::string distance_source_name(DistanceSource source) {
  return source == DistanceSource::Mesh ? "mesh" : "boundary_voxels";
}

DistanceSource distance_source_from_name(const std::string& name) {
  if (name == "mesh") return DistanceSource::Mesh;
  if (name == "boundary_voxels") return DistanceSource::BoundaryVoxels;
  throw std::invalid_argument("config: unknown distance source \"" + name + "\"");
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["dataset"] = {{"dims", c.dataset.dims},
                  {"spacing", c.dataset.spacing},
                  {"train_per_shape", c.dataset.train_per_shape},
                  {"test_per_shape", c.dataset.test_per_shape},
                  {"size_min_frac", c.dataset.size_min_frac},
                  {"size_max_frac", c.dataset.size_max_frac},
                  {"max_retries", c.dataset.max_retries}};
  j["coarse_dims"] = c.coarse_dims;
  j["net"] = {{"levels", c.levels}, {"base_channels", c.base_channels}};
  j["train"] = {{"learning_rate", c.learning_rate},
                {"epochs", c.epochs},
                {"optimizer", optimizer_name(c.optimizer)},
                {"weight_epsilon", c.weight_epsilon},
                {"clamp_tau", c.pwr_clamp_tau},
                {"normalize_by_weight_sum", c.normalize_by_weight_sum},
                {"sdf_at_coarse", c.sdf_at_coarse}};
  j["eval"] = {{"kernel_radius", c.eval.kernel_radius},
               {"samples_per_triangle", c.eval.samples_per_triangle},
               {"distance_source", distance_source_name(c.eval.distance_source)}};
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir.string();
  j["threads"] = c.threads;
  return j;
}

BinaryVolume load_mask(const fs::path& path, const std::string& context) {
  Volume v = read_volume(path);
  if (!std::holds_alternative<BinaryVolume>(v))
    throw std::runtime_error(context + ": expected a u8 labelmap in " + path.string());
  return std::get<BinaryVolume>(std::move(v));
}

ScalarVolume load_field(const fs::path& path, const std::string& context) {
  Volume v = read_volume(path);
  if (!std::holds_alternative<ScalarVolume>(v))
    throw std::runtime_error(context + ": expected an f32 field in " + path.string());
  return std::get<ScalarVolume>(std::move(v));
}

std::ofstream open_text(const fs::path& path, const char* what) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(std::string("cannot write ") + what + " " + path.string());
  return out;
}

std::vector<const DatasetEntry*> split_entries(const DatasetManifest& manifest, Split split) {
  std::vector<const DatasetEntry*> out;
  for (const auto& e : manifest.entries)
    if (e.split == split) out.push_back(&e);
  return out;
}

void summarize(ArmSummary& arm) {
  double dice = 0.0, contour = 0.0, asd = 0.0, rmsd = 0.0;
  std::size_t asd_n = 0;
  for (const auto& c : arm.cases) {
    dice += c.metrics.dice;
    contour += c.metrics.contour_dice;
    if (c.metrics.asd && c.metrics.rmsd) {
      asd += *c.metrics.asd;
      rmsd += *c.metrics.rmsd;
      ++asd_n;
    }
  }
  const double n = static_cast<double>(arm.cases.size());
  if (n > 0) {
    arm.mean_dice = dice / n;
    arm.mean_contour_dice = contour / n;
  }
  if (asd_n > 0) {
    arm.mean_asd = asd / static_cast<double>(asd_n);
    arm.mean_rmsd = rmsd / static_cast<double>(asd_n);
  }
}

// A zero baseline with a zero pwr value is a perfect tie (gain 0); a zero
// baseline with a nonzero pwr value has no defined percentage.
std::optional<double> safe_gain(double pwc, double pwr, GainDirection direction) {
  if (pwc == 0.0) return pwr == 0.0 ? std::optional<double>(0.0) : std::nullopt;
  return gain(pwc, pwr, direction);
}

std::optional<double> safe_gain(const std::optional<double>& pwc, const std::optional<double>& pwr,
                                GainDirection direction) {
  if (!pwc || !pwr) return std::nullopt;
  return safe_gain(*pwc, *pwr, direction);
}

// The markdown table is rendered from the same means; the stored gains must
// agree with a fresh recomputation or the report is internally inconsistent.
void check_gains(const RunReport& report) {
  const auto same = [](const std::optional<double>& a, const std::optional<double>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || std::abs(*a - *b) <= 1e-12 * std::max(1.0, std::abs(*a));
  };
  if (!same(report.gain_dice,
            safe_gain(report.pwc.mean_dice, report.pwr.mean_dice, GainDirection::HigherBetter)) ||
      !same(report.gain_contour_dice,
            safe_gain(report.pwc.mean_contour_dice, report.pwr.mean_contour_dice,
                      GainDirection::HigherBetter)) ||
      !same(report.gain_asd,
            safe_gain(report.pwc.mean_asd, report.pwr.mean_asd, GainDirection::LowerBetter)) ||
      !same(report.gain_rmsd,
            safe_gain(report.pwc.mean_rmsd, report.pwr.mean_rmsd, GainDirection::LowerBetter)))
    throw std::logic_error("report: stored gains do not match the arm means");
}

json arm_to_json(const ArmSummary& arm) {
  json cases = json::array();
  for (const auto& c : arm.cases) {
    json jc{{"id", c.id}, {"dice", c.metrics.dice}, {"contour_dice", c.metrics.contour_dice}};
    jc["asd"] = c.metrics.asd ? json(*c.metrics.asd) : json(nullptr);
    jc["rmsd"] = c.metrics.rmsd ? json(*c.metrics.rmsd) : json(nullptr);
    cases.push_back(std::move(jc));
  }
  json mean{{"dice", arm.mean_dice}, {"contour_dice", arm.mean_contour_dice}};
  mean["asd"] = arm.mean_asd ? json(*arm.mean_asd) : json(nullptr);
  mean["rmsd"] = arm.mean_rmsd ? json(*arm.mean_rmsd) : json(nullptr);
  return json{{"cases", std::move(cases)}, {"mean", std::move(mean)}};
}

void write_report_json(const fs::path& path, const ExperimentConfig& config,
                       const RunReport& report) {
  json j;
  j["seed"] = report.seed;
  j["config"] = config_to_json(config);
  j["arms"] = {{"pwc", arm_to_json(report.pwc)}, {"pwr", arm_to_json(report.pwr)}};
  json gains;
  gains["dice"] = report.gain_dice ? json(*report.gain_dice) : json(nullptr);
  gains["contour_dice"] = report.gain_contour_dice ? json(*report.gain_contour_dice) : json(nullptr);
  gains["asd"] = report.gain_asd ? json(*report.gain_asd) : json(nullptr);
  gains["rmsd"] = report.gain_rmsd ? json(*report.gain_rmsd) : json(nullptr);
  j["gains"] = std::move(gains);
  j["stage_seconds"] = report.stage_seconds;
  auto out = open_text(path, "report");
  out << j.dump(2) << "\n";
}

// Full-precision per-case table; every number in report.md is recomputable
// from these rows.
void write_cases_csv(const fs::path& path, const RunReport& report) {
  auto out = open_text(path, "case table");
  out << "id,arm,dice,contour_dice,asd,rmsd\n";
  for (const auto* arm : {&report.pwc, &report.pwr}) {
    const std::string name = arm == &report.pwc ? "pwc" : "pwr";
    for (const auto& c : arm->cases) {
      out << c.id << ',' << name << ',' << fmt17(c.metrics.dice) << ','
          << fmt17(c.metrics.contour_dice) << ',';
      if (c.metrics.asd) out << fmt17(*c.metrics.asd);
      out << ',';
      if (c.metrics.rmsd) out << fmt17(*c.metrics.rmsd);
      out << '\n';
    }
  }
}

void write_report_md(const fs::path& path, const RunReport& report) {
  const auto pct = [](double v) { return fmt_fixed(100.0 * v, 2); };
  const auto dist = [](const std::optional<double>& v) {
    return v ? fmt_fixed(*v, 3) : std::string("-");
  };
  const auto g = [](const std::optional<double>& v) {
    return v ? fmt_fixed(*v, 2) : std::string("-");
  };
  auto out = open_text(path, "report");
  out << "# Run report: seed " << report.seed << "\n\n";
  out << report.pwc.cases.size() << " test cases per arm.\n\n";
  out << "| Metric | pwc | pwr | gain (%) |\n";
  out << "| --- | ---: | ---: | ---: |\n";
  out << "| Dice (x100) | " << pct(report.pwc.mean_dice) << " | " << pct(report.pwr.mean_dice)
      << " | " << g(report.gain_dice) << " |\n";
  out << "| Contour Dice (x100) | " << pct(report.pwc.mean_contour_dice) << " | "
      << pct(report.pwr.mean_contour_dice) << " | " << g(report.gain_contour_dice) << " |\n";
  out << "| ASD | " << dist(report.pwc.mean_asd) << " | " << dist(report.pwr.mean_asd) << " | "
      << g(report.gain_asd) << " |\n";
  out << "| RMSD | " << dist(report.pwc.mean_rmsd) << " | " << dist(report.pwr.mean_rmsd) << " | "
      << g(report.gain_rmsd) << " |\n";
}

}  // namespace

std::array<double, 3> ExperimentConfig::coarse_spacing() const {
  std::array<double, 3> out{};
  for (int a = 0; a < 3; ++a)
    out[a] = dataset.spacing[a] * static_cast<double>(dataset.dims[a]) /
             static_cast<double>(coarse_dims[a]);
  return out;
}

double ExperimentConfig::coarse_voxel_size() const {
  const auto cs = coarse_spacing();
  for (double v : cs)
    if (std::abs(v - cs[0]) > 1e-9 * std::max(1.0, std::abs(cs[0])))
      throw std::invalid_argument(
          "config: coarse voxels must be isotropic so SDF values convert to voxel units by one "
          "scalar");
  return cs[0];
}

NetSpec ExperimentConfig::net_spec(Head head) const {
  return NetSpec{levels, base_channels, coarse_dims, head};
}

TrainConfig ExperimentConfig::train_config(Head head, std::uint64_t run_seed) const {
  TrainConfig tc;
  tc.learning_rate = learning_rate;
  tc.epochs = epochs;
  // Distinct training streams per arm, both derived from the run seed.
  tc.seed = mix_seed(run_seed, head == Head::pwc ? 101 : 102);
  tc.loss = head == Head::pwc ? LossKind::cross_entropy : LossKind::weighted_mse;
  tc.weight_epsilon = weight_epsilon;
  tc.optimizer = optimizer;
  tc.clamp_tau = head == Head::pwr ? pwr_clamp_tau : 0.0;
  tc.normalize_by_weight_sum = normalize_by_weight_sum;
  tc.threads = threads;
  return tc;
}

std::filesystem::path ExperimentConfig::seed_dir(std::uint64_t seed) const {
  return output_dir / ("seed-" + std::to_string(seed));
}

void ExperimentConfig::validate() const {
  dataset.validate();
  for (int a = 0; a < 3; ++a) {
    if (coarse_dims[a] < 1) throw std::invalid_argument("config: coarse dims must be positive");
    if (dataset.dims[a] % coarse_dims[a] != 0)
      throw std::invalid_argument("config: coarse dims must divide dataset dims componentwise");
  }
  net_spec(Head::pwc).validate();
  train_config(Head::pwc, 0).validate();
  if (pwr_clamp_tau < 0.0) throw std::invalid_argument("config: clamp_tau must be >= 0");
  if (seeds.empty()) throw std::invalid_argument("config: seeds must be non-empty");
  if (eval.samples_per_triangle < 1)
    throw std::invalid_argument("config: samples_per_triangle must be >= 1");
  for (int r : eval.kernel_radius)
    if (r < 0) throw std::invalid_argument("config: kernel radius must be >= 0");
  coarse_voxel_size();
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("config " + path.string() + " is not valid JSON: " + e.what());
  }

  ExperimentConfig c;
  require_keys(j, "the top level",
               {"dataset", "coarse_dims", "net", "train", "eval", "seeds", "output_dir",
                "threads"});
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    require_keys(d, "\"dataset\"",
                 {"dims", "spacing", "train_per_shape", "test_per_shape", "size_min_frac",
                  "size_max_frac", "max_retries"});
    if (d.contains("dims")) d.at("dims").get_to(c.dataset.dims);
    if (d.contains("spacing")) d.at("spacing").get_to(c.dataset.spacing);
    c.dataset.train_per_shape = d.value("train_per_shape", c.dataset.train_per_shape);
    c.dataset.test_per_shape = d.value("test_per_shape", c.dataset.test_per_shape);
    c.dataset.size_min_frac = d.value("size_min_frac", c.dataset.size_min_frac);
    c.dataset.size_max_frac = d.value("size_max_frac", c.dataset.size_max_frac);
    c.dataset.max_retries = d.value("max_retries", c.dataset.max_retries);
  }
  if (j.contains("coarse_dims")) j.at("coarse_dims").get_to(c.coarse_dims);
  if (j.contains("net")) {
    const json& n = j.at("net");
    require_keys(n, "\"net\"", {"levels", "base_channels"});
    c.levels = n.value("levels", c.levels);
    c.base_channels = n.value("base_channels", c.base_channels);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    require_keys(t, "\"train\"",
                 {"learning_rate", "epochs", "optimizer", "weight_epsilon", "clamp_tau",
                  "normalize_by_weight_sum", "sdf_at_coarse"});
    c.learning_rate = t.value("learning_rate", c.learning_rate);
    c.epochs = t.value("epochs", c.epochs);
    if (t.contains("optimizer"))
      c.optimizer = optimizer_from_name(t.at("optimizer").get<std::string>());
    c.weight_epsilon = t.value("weight_epsilon", c.weight_epsilon);
    c.pwr_clamp_tau = t.value("clamp_tau", c.pwr_clamp_tau);
    c.normalize_by_weight_sum = t.value("normalize_by_weight_sum", c.normalize_by_weight_sum);
    c.sdf_at_coarse = t.value("sdf_at_coarse", c.sdf_at_coarse);
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    require_keys(e, "\"eval\"", {"kernel_radius", "samples_per_triangle", "distance_source"});
    if (e.contains("kernel_radius")) e.at("kernel_radius").get_to(c.eval.kernel_radius);
    c.eval.samples_per_triangle = e.value("samples_per_triangle", c.eval.samples_per_triangle);
    if (e.contains("distance_source"))
      c.eval.distance_source = distance_source_from_name(e.at("distance_source").get<std::string>());
  }
  if (j.contains("seeds")) j.at("seeds").get_to(c.seeds);
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  c.threads = j.value("threads", c.threads);

  c.validate();
  return c;
}

DatasetManifest run_generate(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  GeneratorConfig gc = config.dataset;
  gc.seed = seed;
  const SeedPaths paths{config.seed_dir(seed)};
  fs::create_directories(paths.root);
  DatasetManifest manifest = generate_dataset(gc, paths.root);
  save_manifest(manifest, paths.manifest());
  return manifest;
}

void run_sdf(const ExperimentConfig& config, std::uint64_t seed, double clamp_tau) {
  config.validate();
  if (clamp_tau < 0.0) throw std::invalid_argument("sdf: clamp must be >= 0");
  const SeedPaths paths{config.seed_dir(seed)};
  const DatasetManifest manifest = load_manifest(paths.manifest());
  fs::create_directories(paths.sdf_dir());
  for (const auto& entry : manifest.entries) {
    const BinaryVolume mask = load_mask(paths.root / entry.path, entry.id);
    ScalarVolume sdf;
    try {
      sdf = signed_distance(mask, config.threads);
    } catch (const std::exception& e) {
      throw std::runtime_error("sdf: case " + entry.id + ": " + e.what());
    }
    if (clamp_tau > 0.0) sdf = clamp_sdf(sdf, clamp_tau);
    write_volume(paths.sdf_file(entry.id), sdf);
  }
}

TrainResult run_train(const ExperimentConfig& config, std::uint64_t seed, Head arm) {
  config.validate();
  const SeedPaths paths{config.seed_dir(seed)};
  const DatasetManifest manifest = load_manifest(paths.manifest());
  const double coarse_voxel = config.coarse_voxel_size();

  std::vector<TrainExample> examples;
  for (const DatasetEntry* entry : split_entries(manifest, Split::Train)) {
    const BinaryVolume mask = load_mask(paths.root / entry->path, entry->id);
    TrainExample ex;
    ex.id = entry->id;
    ex.input = resample_trilinear(as_scalar(mask), config.coarse_dims);
    if (arm == Head::pwc) {
      ex.target = downsample_label(mask, config.coarse_dims);
    } else {
      // Regression targets live in coarse-voxel units so weight_epsilon and
      // clamp_tau read as voxel counts regardless of world spacing.
      ScalarVolume sdf;
      if (config.sdf_at_coarse) {
        sdf = signed_distance(downsample_label(mask, config.coarse_dims), config.threads);
      } else {
        const fs::path sdf_path = paths.sdf_file(entry->id);
        if (!fs::exists(sdf_path))
          throw std::runtime_error("train: missing SDF for case " + entry->id +
                                   "; run the sdf stage first");
        sdf = resample_trilinear(load_field(sdf_path, entry->id), config.coarse_dims);
      }
      for (float& v : sdf.voxels) v = static_cast<float>(v / coarse_voxel);
      ex.target = std::move(sdf);
    }
    examples.push_back(std::move(ex));
  }

  const NetSpec spec = config.net_spec(arm);
  TrainResult result = train(spec, config.train_config(arm, seed), examples);
  write_params(paths.params_file(arm), spec, result.params);

  json j{{"arm", to_string(arm)}, {"seed", seed}, {"epoch_loss", result.epoch_loss}};
  auto out = open_text(paths.loss_file(arm), "loss history");
  out << j.dump(2) << "\n";
  return result;
}

void run_predict(const ExperimentConfig& config, std::uint64_t seed, Head arm) {
  config.validate();
  const SeedPaths paths{config.seed_dir(seed)};
  const DatasetManifest manifest = load_manifest(paths.manifest());
  auto [spec, params] = read_params(paths.params_file(arm));
  const NetSpec expect = config.net_spec(arm);
  if (spec.levels != expect.levels || spec.base_channels != expect.base_channels ||
      spec.input_dims != expect.input_dims || spec.head != expect.head)
    throw std::runtime_error("predict: params in " + paths.params_file(arm).string() +
                             " were trained with a different net layout");
  fs::create_directories(paths.pred_dir(arm));
  fs::create_directories(paths.seg_dir(arm));
  const double coarse_voxel = config.coarse_voxel_size();
  for (const DatasetEntry* entry : split_entries(manifest, Split::Test)) {
    const BinaryVolume mask = load_mask(paths.root / entry->path, entry->id);
    ScalarVolume field = predict(spec, params, as_scalar(mask), config.threads);
    if (arm == Head::pwr)
      for (float& v : field.voxels) v = static_cast<float>(v * coarse_voxel);
    write_volume(paths.pred_file(arm, entry->id), field);
    const BinaryVolume seg = arm == Head::pwc ? threshold(field, 0.5, ThresholdSense::Above)
                                              : threshold(field, 0.0, ThresholdSense::Below);
    write_volume(paths.seg_file(arm, entry->id), seg);
  }
}

RunReport run_evaluate(const ExperimentConfig& config, std::uint64_t seed,
                       const std::map<std::string, double>& stage_seconds) {
  config.validate();
  const SeedPaths paths{config.seed_dir(seed)};
  const DatasetManifest manifest = load_manifest(paths.manifest());
  const auto test = split_entries(manifest, Split::Test);

  std::string missing;
  for (const DatasetEntry* entry : test)
    for (Head arm : {Head::pwc, Head::pwr})
      if (!fs::exists(paths.pred_file(arm, entry->id)) ||
          !fs::exists(paths.seg_file(arm, entry->id)))
        missing += (missing.empty() ? "" : ", ") + to_string(arm) + ":" + entry->id;
  if (!missing.empty())
    throw std::runtime_error("evaluate: missing predictions for " + missing);

  EvalConfig eval = config.eval;
  eval.threads = config.threads;

  StageTimer timer;
  RunReport report;
  report.seed = seed;
  report.stage_seconds = stage_seconds;
  for (const DatasetEntry* entry : test) {
    const BinaryVolume truth = load_mask(paths.root / entry->path, entry->id);
    // pwc is judged on its thresholded labelmap, pwr on the raw field so the
    // surface comes from the predicted zero level.
    const BinaryVolume seg = load_mask(paths.seg_file(Head::pwc, entry->id), entry->id);
    report.pwc.cases.push_back({entry->id, evaluate_case(seg, truth, eval)});
    ScalarVolume field = load_field(paths.pred_file(Head::pwr, entry->id), entry->id);
    report.pwr.cases.push_back({entry->id, evaluate_case(std::move(field), truth, eval)});
  }
  summarize(report.pwc);
  summarize(report.pwr);
  report.gain_dice =
      safe_gain(report.pwc.mean_dice, report.pwr.mean_dice, GainDirection::HigherBetter);
  report.gain_contour_dice = safe_gain(report.pwc.mean_contour_dice, report.pwr.mean_contour_dice,
                                       GainDirection::HigherBetter);
  report.gain_asd = safe_gain(report.pwc.mean_asd, report.pwr.mean_asd, GainDirection::LowerBetter);
  report.gain_rmsd =
      safe_gain(report.pwc.mean_rmsd, report.pwr.mean_rmsd, GainDirection::LowerBetter);
  report.stage_seconds["evaluate"] = timer.lap();

  check_gains(report);
  write_report_json(paths.report_json(), config, report);
  write_cases_csv(paths.cases_csv(), report);
  write_report_md(paths.report_md(), report);
  return report;
}

RunReport run_all(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  std::map<std::string, double> secs;
  StageTimer timer;
  run_generate(config, seed);
  secs["generate"] = timer.lap();
  run_sdf(config, seed);
  secs["sdf"] = timer.lap();
  run_train(config, seed, Head::pwc);
  secs["train-pwc"] = timer.lap();
  run_train(config, seed, Head::pwr);
  secs["train-pwr"] = timer.lap();
  run_predict(config, seed, Head::pwc);
  secs["predict-pwc"] = timer.lap();
  run_predict(config, seed, Head::pwr);
  secs["predict-pwr"] = timer.lap();
  return run_evaluate(config, seed, secs);
}

}  // namespace vseg
