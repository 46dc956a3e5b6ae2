#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "volskin/trainer.hpp"

namespace fs = std::filesystem;
using namespace volskin;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitMissingInput = 3;
constexpr int kExitDivergence = 4;

struct MissingInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_exists(const fs::path& path, const char* what) {
  if (!fs::exists(path))
    throw MissingInput(std::string(what) + " not found: " + path.string());
}

KeyValues load_config(const std::string& path) {
  if (path.empty()) return KeyValues();
  require_exists(path, "config");
  return KeyValues::parse_file(path);
}

TrainConfig resolve_train_config(const std::string& config_path, int64_t seed_override) {
  KeyValues kv = load_config(config_path);
  TrainConfig cfg = train_config_from(kv);
  if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
  return cfg;
}

int resolve_camera(const std::string& sel, const Dataset& ds) {
  if (sel == "test") return ds.test_camera();
  if (sel == "train") return 0;
  const int idx = std::stoi(sel);
  if (idx < 0 || idx >= static_cast<int>(ds.cameras.size()))
    throw MissingInput("camera index " + sel + " outside the dataset");
  return idx;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

int cmd_gen_data(const std::string& out_dir, const std::string& config_path,
                 int64_t seed_override) {
  KeyValues kv = load_config(config_path);
  SceneConfig scene = scene_config_from(kv);
  if (seed_override >= 0) scene.seed = static_cast<uint64_t>(seed_override);
  Dataset ds = generate_dataset(scene);
  fs::create_directories(out_dir);
  save_dataset(ds, out_dir);
  std::cout << "wrote " << ds.records.size() << " frames to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& dataset_dir, const std::string& out_dir,
              const std::string& config_path, int64_t seed_override) {
  require_exists(dataset_dir, "dataset");
  TrainConfig cfg = resolve_train_config(config_path, seed_override);
  Dataset ds = load_dataset(dataset_dir);
  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "config_used.cfg", to_keyvalues(cfg).serialize());

  Trainer trainer(ds, cfg);
  {
    std::ofstream trace(fs::path(out_dir) / "trace.csv");
    std::ofstream metrics(fs::path(out_dir) / "train_metrics.csv");
    metrics << "step,batch_mse,batch_psnr\n";
    StageResult r1 = trainer.train_stage1(out_dir, &trace);
    for (const StepStats& s : r1.trace)
      metrics << s.step << "," << s.batch_mse << ","
              << (s.batch_mse < 1e-10 ? 99.0 : -10.0 * std::log10(s.batch_mse)) << "\n";
    if (!ds.novel_poses.empty() && cfg.steps_stage2 > 0) {
      std::ofstream trace2(fs::path(out_dir) / "trace_stage2.csv");
      trainer.train_stage2(&trace2);
      trainer.save_checkpoint(fs::path(out_dir) / "checkpoint_final.bin");
    }
  }
  std::cout << "checkpoint: " << (fs::path(out_dir) / "checkpoint_final.bin").string() << "\n";
  return 0;
}

int cmd_render(const std::string& ckpt_path, const std::string& dataset_dir,
               const std::string& out_dir, const std::string& camera_sel, int frame,
               const std::string& config_path, int64_t seed_override) {
  require_exists(ckpt_path, "checkpoint");
  require_exists(dataset_dir, "dataset");
  TrainConfig cfg = resolve_train_config(config_path, seed_override);
  Dataset ds = load_dataset(dataset_dir);
  ModelState model = load_model(ckpt_path);
  const int cam = resolve_camera(camera_sel, ds);
  fs::create_directories(out_dir);
  std::vector<int> frames;
  if (frame < 0)
    for (size_t p = 0; p < ds.poses.size(); ++p) frames.push_back(static_cast<int>(p));
  else
    frames.push_back(frame);
  for (int f : frames) {
    if (f >= static_cast<int>(ds.poses.size()))
      throw MissingInput("frame " + std::to_string(f) + " outside the dataset");
    const int code_row = std::min(f, model.num_train_frames - 1);
    RenderedView view = render_view(model, cfg, ds.cameras[cam], ds.poses[f], code_row);
    char stem[64];
    std::snprintf(stem, sizeof(stem), "%04d_cam%d", f, cam);
    write_png(fs::path(out_dir) / (std::string(stem) + ".png"), view.rgb);
    write_pfm(fs::path(out_dir) / (std::string(stem) + "_depth.pfm"), view.depth);
    write_pfm(fs::path(out_dir) / (std::string(stem) + "_normal.pfm"), view.normal);
  }
  std::cout << "rendered " << frames.size() << " view(s) to " << out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& dataset_dir,
             const std::string& out_dir, const std::string& camera_sel,
             const std::string& config_path, int64_t seed_override) {
  require_exists(ckpt_path, "checkpoint");
  require_exists(dataset_dir, "dataset");
  TrainConfig cfg = resolve_train_config(config_path, seed_override);
  Dataset ds = load_dataset(dataset_dir);
  ModelState model = load_model(ckpt_path);
  const int cam = resolve_camera(camera_sel, ds);
  MetricsReport report = evaluate(model, cfg, ds, cam);
  std::cout << report.to_text();
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "report.txt", report.to_text());
    write_text(fs::path(out_dir) / "metrics.kv", report.to_machine());
  }
  return 0;
}

int cmd_ablate(const std::string& dataset_dir, const std::string& out_dir,
               const std::string& grid_name, const std::string& config_path,
               int64_t seed_override) {
  require_exists(dataset_dir, "dataset");
  TrainConfig base = resolve_train_config(config_path, seed_override);
  Dataset ds = load_dataset(dataset_dir);
  fs::create_directories(out_dir);
  std::vector<AblationRow> grid = ablation_grid(grid_name, base);
  std::ostringstream table;
  table << "row,mse,psnr,ssim,depth_err\n";
  for (const AblationRow& row : grid) {
    std::cout << "[ablate] " << row.name << "\n";
    fs::path row_dir = fs::path(out_dir) / row.name;
    fs::create_directories(row_dir);
    Trainer trainer(ds, row.config);
    std::ofstream trace(row_dir / "trace.csv");
    trainer.train_stage1(row_dir, &trace);
    MetricsReport report = evaluate(trainer.model(), row.config, ds, ds.test_camera());
    write_text(row_dir / "metrics.kv", report.to_machine());
    table << row.name << "," << report.aggregate_mse() << "," << report.aggregate_psnr() << ","
          << report.aggregate_ssim() << ","
          << (report.aggregate_depth_error() ? std::to_string(*report.aggregate_depth_error())
                                             : std::string("undefined"))
          << "\n";
  }
  write_text(fs::path(out_dir) / "ablation_table.csv", table.str());
  std::cout << table.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_env();
  CLI::App app{"volskin: articulated volumetric reconstruction at desk scale"};
  app.require_subcommand(1);

  std::string config_path, dataset_dir, out_dir, ckpt_path;
  std::string camera_sel = "test", grid_name = "default";
  int64_t seed_override = -1;
  int frame = 0;

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic capsule-body dataset");
  gen->add_option("--out", out_dir, "output dataset directory")->required();
  gen->add_option("--config", config_path, "key=value config file");
  gen->add_option("--seed", seed_override, "scene seed override");

  CLI::App* train = app.add_subcommand("train", "two-stage training run");
  train->add_option("--dataset", dataset_dir, "dataset directory")->required();
  train->add_option("--out", out_dir, "run output directory")->required();
  train->add_option("--config", config_path, "key=value config file");
  train->add_option("--seed", seed_override, "training seed override");

  CLI::App* render = app.add_subcommand("render", "render frames from a checkpoint");
  render->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  render->add_option("--dataset", dataset_dir, "dataset directory")->required();
  render->add_option("--out", out_dir, "output directory")->required();
  render->add_option("--camera", camera_sel, "train|test|index (default test)");
  render->add_option("--frame", frame, "pose index, -1 for all");
  render->add_option("--config", config_path, "key=value config file");
  render->add_option("--seed", seed_override, "seed override");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint against a dataset");
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval->add_option("--dataset", dataset_dir, "dataset directory")->required();
  eval->add_option("--out", out_dir, "report output directory");
  eval->add_option("--camera", camera_sel, "train|test|index (default test)");
  eval->add_option("--config", config_path, "key=value config file");
  eval->add_option("--seed", seed_override, "seed override");

  CLI::App* ablate = app.add_subcommand("ablate", "train + evaluate a configuration grid");
  ablate->add_option("--dataset", dataset_dir, "dataset directory")->required();
  ablate->add_option("--out", out_dir, "output directory")->required();
  ablate->add_option("--grid", grid_name, "grid name (default)");
  ablate->add_option("--config", config_path, "key=value config file");
  ablate->add_option("--seed", seed_override, "seed override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(out_dir, config_path, seed_override);
    if (train->parsed()) return cmd_train(dataset_dir, out_dir, config_path, seed_override);
    if (render->parsed())
      return cmd_render(ckpt_path, dataset_dir, out_dir, camera_sel, frame, config_path,
                        seed_override);
    if (eval->parsed())
      return cmd_eval(ckpt_path, dataset_dir, out_dir, camera_sel, config_path, seed_override);
    if (ablate->parsed())
      return cmd_ablate(dataset_dir, out_dir, grid_name, config_path, seed_override);
  } catch (const MissingInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissingInput;
  } catch (const DivergenceError& e) {
    std::cerr << "error: training aborted (" << e.component << "): " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
