#include "cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "saup/artifact_io.hpp"
#include "saup/captioner.hpp"
#include "saup/error.hpp"
#include "saup/evalkit.hpp"
#include "saup/fsio.hpp"
#include "saup/hash.hpp"
#include "saup/latent.hpp"
#include "saup/masks.hpp"
#include "saup/pipeline.hpp"
#include "saup/svgplot.hpp"
#include "saup/tokenizer.hpp"

namespace saup::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string join_path(const std::string& a, const std::string& b) {
  return (fs::path(a) / b).string();
}

Split split_from_name(const std::string& name) {
  return name == "train" ? Split::kTrain : Split::kTest;
}

std::vector<double> step_axis(size_t n) {
  std::vector<double> x(n);
  for (size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i + 1);
  return x;
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

ToyCaptioner resolve_model(const RunConfig& cfg, const AttackDataset& ds) {
  if (!cfg.model.weights.empty()) {
    return ToyCaptioner::load_weights(cfg.model.weights);
  }
  return make_grounded_captioner(ds, cfg.attack.mask, cfg.model.grounding,
                                 cfg.attack.seed);
}

// Loads the weights an artifact was trained against (config override first,
// then the artifact's own reference resolved relative to its directory) and
// verifies the recorded weight hash.
ToyCaptioner model_for_artifact(const RunConfig& cfg,
                                const PerturbationArtifact& artifact,
                                const std::string& artifact_path) {
  std::string path = cfg.model.weights;
  if (path.empty()) {
    if (artifact.model_reference.empty()) {
      throw ConfigError("artifact names no model weights; set model.weights");
    }
    fs::path ref(artifact.model_reference);
    path = ref.is_absolute()
               ? ref.string()
               : (fs::path(artifact_path).parent_path() / ref).string();
  }
  ToyCaptioner model = ToyCaptioner::load_weights(path);
  if (model.weights_hash() != artifact.model_weights_hash) {
    throw ConfigError("model/artifact mismatch: weights hash " +
                      to_hex(model.weights_hash()) + " from '" + path +
                      "' != recorded " + to_hex(artifact.model_weights_hash));
  }
  return model;
}

std::vector<std::string> read_prompts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open prompts file '" + path + "'");
  std::vector<std::string> prompts;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) prompts.push_back(line);
  }
  if (prompts.empty()) {
    throw ConfigError("prompts file '" + path + "' has no prompts");
  }
  return prompts;
}

std::string default_artifact_path(const RunConfig& cfg,
                                  const std::string& given) {
  return given.empty() ? join_path(cfg.output_dir, "artifact.json") : given;
}

// ---------------------------------------------------------------------------
// dataset

void write_listing(const AttackDataset& ds, const RunConfig& cfg,
                   const std::string& dir,
                   const std::vector<std::string>& files,
                   const std::string& manifest_path) {
  json j;
  j["config_hash"] = cfg.hash();
  j["scenario"] = to_string(ds.scenario);
  if (!manifest_path.empty()) j["manifest"] = manifest_path;
  json targets = json::object();
  for (const auto& [id, target] : ds.targets) {
    targets[std::to_string(id)] = target;
  }
  j["targets"] = targets;
  json entries = json::array();
  for (size_t i = 0; i < ds.entries.size(); ++i) {
    const DatasetEntry& e = ds.entries[i];
    json je{{"image_ref", e.image_ref},
            {"class_id", e.class_id},
            {"split", to_string(e.split)},
            {"prompt", e.prompt}};
    if (!e.trajectory_id.empty()) je["trajectory_id"] = e.trajectory_id;
    if (!files.empty()) je["file"] = files[i];
    entries.push_back(je);
  }
  j["entries"] = entries;
  atomic_write(join_path(dir, "listing.json"), j.dump(2) + "\n");
}

// Self-contained trajectory trees, one manifest per scenario (a manifest
// never mixes scenarios): an AutoDriving trajectory with 5 classes and a
// RoboTasking trajectory with 2, 10 synthetic images per class, loadable
// with the manifest loader. Returns the two manifest paths, driving first.
std::vector<std::string> write_demo_tree(const RunConfig& cfg,
                                         const std::string& root) {
  SyntheticConfig sc;
  sc.classes = 7;
  sc.per_class = 10;
  sc.height = cfg.dataset.height;
  sc.width = cfg.dataset.width;
  sc.seed = cfg.dataset.seed;
  sc.prompt = cfg.dataset.prompt;
  AttackDataset src = generate_synthetic(sc);

  ManifestTrajectory drive;
  drive.trajectory_id = "drive_01";
  drive.scenario = "AutoDriving";
  ManifestTrajectory robot;
  robot.trajectory_id = "robot_01";
  robot.scenario = "RoboTasking";

  for (int c = 0; c < sc.classes; ++c) {
    ManifestTrajectory& traj = c < 5 ? drive : robot;
    ManifestClass mc;
    mc.class_id = c;
    mc.target = src.targets.at(c);
    int i = 0;
    for (const DatasetEntry& e : src.entries) {
      if (e.class_id != c) continue;
      std::string ref = traj.trajectory_id + "/class" + std::to_string(c) +
                        "/img" + std::to_string(i++) + ".ppm";
      save_ppm(e.image, join_path(root, ref));
      mc.image_refs.push_back(std::move(ref));
    }
    traj.classes.push_back(std::move(mc));
  }

  auto write_one = [&](ManifestTrajectory traj, const std::string& name) {
    TrajectoryManifest manifest;
    manifest.prompt = cfg.dataset.prompt;
    manifest.trajectories = {std::move(traj)};
    const std::string path = join_path(root, name);
    save_manifest(manifest, path);
    return path;
  };
  return {write_one(std::move(drive), "drive_manifest.json"),
          write_one(std::move(robot), "robot_manifest.json")};
}

// ---------------------------------------------------------------------------
// eval report rendering

std::string render_report_text(const EvalReport& report,
                               const std::string& artifact_path,
                               const RunConfig& cfg, size_t prompt_count) {
  std::ostringstream os;
  os << "evaluation report\n"
     << "  config hash : " << report.config_hash << "\n"
     << "  artifact    : " << artifact_path << "\n"
     << "  split       : " << report.split << "\n"
     << "  prompts     : "
     << (cfg.eval.prompts_file.empty()
             ? std::string("dataset prompts")
             : cfg.eval.prompts_file + " (" + std::to_string(prompt_count) +
                   " prompts)")
     << "\n\n"
     << "  overall ASR      : " << fmt(report.overall_asr) << "\n"
     << "  raw-delta ASR    : " << fmt(report.raw_delta_asr) << "\n"
     << "  quantization gap : " << fmt(report.quantization_gap) << "\n\n";

  os << "per-class ASR\n  class  count  asr\n";
  for (const auto& [id, asr] : report.per_class_asr) {
    os << "  " << std::left << std::setw(7) << id << std::setw(7)
       << report.per_class_count.at(id) << fmt(asr) << "\n";
  }

  os << "\nconfusion (true class -> matched target class; -1 = no match)\n";
  for (const auto& [truth, row] : report.confusion) {
    os << "  " << truth << " ->";
    for (const auto& [matched, count] : row) {
      os << " " << matched << ":" << count;
    }
    os << "\n";
  }

  if (!report.per_trajectory_asr.empty()) {
    os << "\nper-trajectory ASR\n";
    for (const auto& [traj, asr] : report.per_trajectory_asr) {
      os << "  " << traj << ": " << fmt(asr) << "\n";
    }
  }
  if (!report.per_prompt_asr.empty()) {
    os << "\nper-prompt ASR\n";
    for (const auto& [prompt, asr] : report.per_prompt_asr) {
      os << "  \"" << prompt << "\": " << fmt(asr) << "\n";
    }
  }
  return os.str();
}

void write_eval_outputs(const EvalReport& report, const std::string& dir,
                        const std::string& artifact_path, const RunConfig& cfg,
                        size_t prompt_count) {
  save_report(report, join_path(dir, "report.json"));
  atomic_write(join_path(dir, "report.txt"),
               render_report_text(report, artifact_path, cfg, prompt_count));

  const std::string meta = "config " + report.config_hash;
  std::vector<double> xs, ys;
  for (const auto& [id, asr] : report.per_class_asr) {
    xs.push_back(id);
    ys.push_back(asr);
  }
  svgplot::write_line_chart(join_path(dir, "asr_per_class.svg"),
                            "attack success rate by class", "class id", "ASR",
                            {{"ASR", xs, ys}}, meta);

  std::vector<std::string> row_labels;
  for (int id : report.token_confidence_classes) {
    row_labels.push_back("class " + std::to_string(id));
  }
  svgplot::write_heatmap(join_path(dir, "token_confidence.svg"),
                         "mean target-token probability",
                         report.token_confidence, row_labels,
                         report.token_confidence_columns, meta);
}

// ---------------------------------------------------------------------------
// sweep

struct SweepPoint {
  std::string label;
  std::string value;
  double x = 0.0;  // curve position: the numeric value, or the arm index
  RunConfig cfg;
};

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> parts;
  std::stringstream ss(csv);
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    piece.erase(0, piece.find_first_not_of(" \t"));
    piece.erase(piece.find_last_not_of(" \t") + 1);
    if (!piece.empty()) parts.push_back(piece);
  }
  return parts;
}

int parse_positive_int(const std::string& text, const std::string& what) {
  size_t consumed = 0;
  int value = 0;
  try {
    value = std::stoi(text, &consumed);
  } catch (const std::exception&) {
    throw ConfigError(what + ": '" + text + "' is not an integer");
  }
  if (consumed != text.size() || value < 1) {
    throw ConfigError(what + ": '" + text + "' must be a positive integer");
  }
  return value;
}

std::vector<SweepPoint> expand_points(const RunConfig& base,
                                      const SweepOptions& opts) {
  std::vector<SweepPoint> points;
  for (size_t i = 0; i < opts.values.size(); ++i) {
    const std::string& v = opts.values[i];
    SweepPoint p;
    p.cfg = base;
    p.value = v;
    p.label = opts.axis + "_" + v;
    if (opts.axis == "ablation") {
      p.x = static_cast<double>(i);
      if (v == "no_nso") {
        p.cfg.attack.space = OptimizationSpace::kPixel;
      } else if (v == "no_margin") {
        p.cfg.attack.loss.lambda = 0.0;
      }  // "default" leaves the config as-is
    } else {
      const int n = parse_positive_int(v, "sweep value");
      p.x = n;
      if (opts.axis == "targets") {
        p.cfg.dataset.classes = n;
      } else if (opts.axis == "words_per_target") {
        p.cfg.dataset.words_per_target = n;
      } else if (opts.axis == "frame_width") {
        p.cfg.attack.mask.shape = MaskShape::kFrame;
        p.cfg.attack.mask.reference_width = n;
      } else if (opts.axis == "corner_size") {
        p.cfg.attack.mask.shape = MaskShape::kCorner;
        p.cfg.attack.mask.reference_width = n;
      } else {  // train_size: per-class count at the 5:7 train:total ratio
        p.cfg.dataset.per_class = static_cast<int>(std::lround(n * 7.0 / 5.0));
      }
    }
    points.push_back(std::move(p));
  }
  return points;
}

struct PointOutcome {
  bool ok = false;
  std::string error;
  double final_loss = 0.0;
  double train_asr = 0.0;
  double test_asr = 0.0;
  double clean_train_accuracy = 0.0;
  double clean_test_accuracy = 0.0;
  double optimize_seconds = 0.0;
  std::vector<double> loss_trace;
};

PointOutcome run_sweep_point(const SweepPoint& point,
                             const std::string& sweep_dir) {
  PointOutcome o;
  try {
    point.cfg.validate();
    AttackDataset ds = build_dataset(point.cfg);
    ToyCaptioner model = resolve_model(point.cfg, ds);
    BenchmarkResult r = run_attack(ds, std::move(model), point.cfg.attack);
    const std::string hash = point.cfg.hash();
    r.artifact.config_hash = hash;
    r.artifact.model_reference = "model_weights.bin";
    r.train_report.config_hash = hash;
    r.test_report.config_hash = hash;

    const std::string dir = join_path(sweep_dir, "point_" + point.label);
    r.model.save_weights(join_path(dir, "model_weights.bin"));
    save_artifact(r.artifact, join_path(dir, "artifact.json"));
    save_report(r.train_report, join_path(dir, "report_train.json"));
    save_report(r.test_report, join_path(dir, "report_test.json"));

    o.final_loss =
        r.artifact.loss_trace.empty() ? 0.0 : r.artifact.loss_trace.back();
    o.loss_trace = std::move(r.artifact.loss_trace);
    o.train_asr = r.train_report.overall_asr;
    o.test_asr = r.test_report.overall_asr;
    o.clean_train_accuracy = r.clean_train_accuracy;
    o.clean_test_accuracy = r.clean_test_accuracy;
    o.optimize_seconds = r.optimize_seconds;
    o.ok = true;
  } catch (const std::exception& e) {
    o.error = e.what();
  }
  return o;
}

std::string render_sweep_table(const SweepOptions& opts,
                               const std::vector<SweepPoint>& points,
                               const std::vector<PointOutcome>& outcomes) {
  std::ostringstream os;
  os << "sweep axis: " << opts.axis << "\n\n"
     << "  " << std::left << std::setw(24) << "point" << std::setw(12)
     << "final loss" << std::setw(11) << "train ASR" << std::setw(10)
     << "test ASR" << "status\n";
  for (size_t i = 0; i < points.size(); ++i) {
    const PointOutcome& o = outcomes[i];
    os << "  " << std::left << std::setw(24) << points[i].label;
    if (o.ok) {
      os << std::setw(12) << fmt(o.final_loss, 4) << std::setw(11)
         << fmt(o.train_asr) << std::setw(10) << fmt(o.test_asr) << "ok\n";
    } else {
      os << std::setw(12) << "-" << std::setw(11) << "-" << std::setw(10)
         << "-" << "failed: " << o.error << "\n";
    }
  }
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// public entry points

AttackDataset build_dataset(const RunConfig& cfg) {
  const DatasetSection& d = cfg.dataset;
  if (d.kind == "synthetic") {
    SyntheticConfig sc;
    sc.classes = d.classes;
    sc.per_class = d.per_class;
    sc.height = d.height;
    sc.width = d.width;
    sc.seed = d.seed;
    sc.words_per_target = d.words_per_target;
    sc.prompt = d.prompt;
    return generate_synthetic(sc);
  }
  if (d.kind == "imagenet") {
    ClassPool pool = make_synthetic_pool(d.pool_classes, d.pool_per_class,
                                         d.height, d.width, d.seed);
    return sample_imagenet_protocol(pool, d.classes, d.seed, d.prompt);
  }
  if (d.manifest.empty()) {
    throw ConfigError(
        "dataset.manifest: required for kind 'rist' (the dataset command "
        "generates a demo tree when no manifest is set)");
  }
  return load_rist_manifest(d.manifest);
}

SweepOptions parse_sweep_options(const std::string& axis,
                                 const std::string& values_csv, int workers) {
  static const std::set<std::string> kAxes = {
      "targets",     "words_per_target", "frame_width",
      "corner_size", "train_size",       "ablation"};
  SweepOptions opts;
  opts.axis = axis.empty() ? "targets" : axis;
  if (!kAxes.count(opts.axis)) {
    throw ConfigError("unknown sweep axis '" + opts.axis +
                      "' (targets, words_per_target, frame_width, "
                      "corner_size, train_size, ablation)");
  }
  opts.values = split_csv(values_csv);
  if (opts.values.empty()) {
    if (opts.axis == "targets") {
      opts.values = {"2", "5"};
    } else if (opts.axis == "words_per_target") {
      opts.values = {"1", "2", "3"};
    } else if (opts.axis == "frame_width") {
      opts.values = {"6", "12", "20"};
    } else if (opts.axis == "corner_size") {
      opts.values = {"20", "30", "40"};
    } else if (opts.axis == "train_size") {
      opts.values = {"10", "20", "30", "40", "50"};
    } else {
      opts.values = {"default", "no_nso", "no_margin"};
    }
  }
  if (opts.axis == "ablation") {
    for (const std::string& v : opts.values) {
      if (v != "default" && v != "no_nso" && v != "no_margin") {
        throw ConfigError("unknown ablation arm '" + v +
                          "' (default, no_nso, no_margin)");
      }
    }
  } else {
    for (const std::string& v : opts.values) {
      parse_positive_int(v, "sweep value");
    }
  }
  if (workers < 1) throw ConfigError("workers: must be >= 1");
  opts.workers = workers;
  return opts;
}

void cmd_dataset(const RunConfig& cfg) {
  const std::string dir = join_path(cfg.output_dir, "dataset");
  AttackDataset ds;
  std::vector<std::string> files;
  std::string manifest_path;

  if (cfg.dataset.kind == "rist" && cfg.dataset.manifest.empty()) {
    const std::vector<std::string> manifests =
        write_demo_tree(cfg, join_path(dir, "rist_demo"));
    for (const std::string& m : manifests) {
      load_rist_manifest(m);  // proves each tree loads
      std::cout << "demo trajectory manifest: " << m << "\n";
    }
    manifest_path = manifests.front();
    ds = load_rist_manifest(manifest_path);
  } else {
    ds = build_dataset(cfg);
    if (cfg.dataset.kind == "rist") {
      manifest_path = cfg.dataset.manifest;  // images already on disk
    } else {
      files.reserve(ds.entries.size());
      for (size_t i = 0; i < ds.entries.size(); ++i) {
        const DatasetEntry& e = ds.entries[i];
        std::ostringstream name;
        name << "images/" << std::setw(4) << std::setfill('0') << i << "_c"
             << e.class_id << "_" << to_string(e.split) << ".ppm";
        save_ppm(e.image, join_path(dir, name.str()));
        files.push_back(name.str());
      }
    }
  }

  write_listing(ds, cfg, dir, files, manifest_path);
  std::cout << "dataset: " << to_string(ds.scenario) << ", "
            << ds.class_ids().size() << " classes, "
            << ds.split_entries(Split::kTrain).size() << " train + "
            << ds.split_entries(Split::kTest).size() << " test images\n"
            << "listing: " << join_path(dir, "listing.json") << "\n";
}

void cmd_train(const RunConfig& cfg) {
  AttackDataset ds = build_dataset(cfg);
  const bool pretrained = cfg.model.weights.empty();
  ToyCaptioner model = resolve_model(cfg, ds);
  BenchmarkResult r = run_attack(ds, std::move(model), cfg.attack);
  r.artifact.config_hash = cfg.hash();
  r.artifact.model_reference = "model_weights.bin";

  const std::string& out = cfg.output_dir;
  r.model.save_weights(join_path(out, "model_weights.bin"));
  save_artifact(r.artifact, join_path(out, "artifact.json"));
  svgplot::write_line_chart(
      join_path(out, "loss_trace.svg"), "attack loss",
      cfg.attack.per_example_trace ? "example step" : "epoch", "loss",
      {{"loss", step_axis(r.artifact.loss_trace.size()),
        r.artifact.loss_trace}},
      "config " + cfg.hash());

  std::cout << "model: "
            << (pretrained ? "pretrained fresh" : "loaded " + cfg.model.weights)
            << " (clean accuracy train " << fmt(r.clean_train_accuracy)
            << ", test " << fmt(r.clean_test_accuracy) << ")\n"
            << "optimize: " << cfg.attack.epochs << " epochs in "
            << fmt(r.optimize_seconds, 1) << " s, final loss "
            << fmt(r.artifact.loss_trace.empty()
                       ? 0.0
                       : r.artifact.loss_trace.back(),
                   4)
            << "\n"
            << "ASR: train " << fmt(r.train_report.overall_asr) << ", test "
            << fmt(r.test_report.overall_asr) << "\n"
            << "artifact: " << join_path(out, "artifact.json") << " (config "
            << cfg.hash() << ")\n";
}

void cmd_eval(const RunConfig& cfg, const std::string& artifact_path) {
  const std::string path = default_artifact_path(cfg, artifact_path);
  PerturbationArtifact artifact = load_artifact(path);
  AttackDataset ds = build_dataset(cfg);
  ToyCaptioner model = model_for_artifact(cfg, artifact, path);
  std::vector<std::string> prompts;
  if (!cfg.eval.prompts_file.empty()) {
    prompts = read_prompts(cfg.eval.prompts_file);
  }

  EvalReport report =
      evaluate(artifact, ds, model, prompts, split_from_name(cfg.eval.split));

  const std::string dir = join_path(cfg.output_dir, "eval_" + cfg.eval.split);
  write_eval_outputs(report, dir, path, cfg, prompts.size());
  std::cout << "split " << report.split << ": overall ASR "
            << fmt(report.overall_asr) << " (raw-delta "
            << fmt(report.raw_delta_asr) << ", quantization gap "
            << fmt(report.quantization_gap) << ")\n"
            << "report: " << join_path(dir, "report.json") << "\n";
}

void cmd_sweep(const RunConfig& cfg, const SweepOptions& opts) {
  const std::vector<SweepPoint> points = expand_points(cfg, opts);
  const std::string sweep_dir =
      join_path(cfg.output_dir, "sweep_" + opts.axis);

  std::vector<PointOutcome> outcomes(points.size());
  const size_t workers = std::min(static_cast<size_t>(opts.workers),
                                  points.size());
  if (workers <= 1) {
    for (size_t i = 0; i < points.size(); ++i) {
      outcomes[i] = run_sweep_point(points[i], sweep_dir);
    }
  } else {
    std::atomic<size_t> next{0};
    auto worker = [&] {
      for (size_t i = next.fetch_add(1); i < points.size();
           i = next.fetch_add(1)) {
        outcomes[i] = run_sweep_point(points[i], sweep_dir);
      }
    };
    std::vector<std::thread> threads;
    for (size_t t = 0; t < workers; ++t) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }

  json report;
  report["axis"] = opts.axis;
  report["config_hash"] = cfg.hash();
  json jpoints = json::array();
  std::vector<double> curve_x, curve_train, curve_test;
  std::vector<svgplot::Series> traces;
  size_t failures = 0;
  for (size_t i = 0; i < points.size(); ++i) {
    const PointOutcome& o = outcomes[i];
    json jp{{"label", points[i].label}, {"value", points[i].value}};
    if (o.ok) {
      jp["status"] = "ok";
      jp["final_loss"] = o.final_loss;
      jp["train_asr"] = o.train_asr;
      jp["test_asr"] = o.test_asr;
      jp["clean_train_accuracy"] = o.clean_train_accuracy;
      jp["clean_test_accuracy"] = o.clean_test_accuracy;
      jp["optimize_seconds"] = o.optimize_seconds;
      curve_x.push_back(points[i].x);
      curve_train.push_back(o.train_asr);
      curve_test.push_back(o.test_asr);
      traces.push_back({points[i].label, step_axis(o.loss_trace.size()),
                        o.loss_trace});
    } else {
      jp["status"] = "failed";
      jp["error"] = o.error;
      ++failures;
    }
    jpoints.push_back(std::move(jp));
  }
  report["points"] = jpoints;

  const std::string meta = "config " + cfg.hash();
  atomic_write(join_path(sweep_dir, "sweep_report.json"),
               report.dump(2) + "\n");
  const std::string table = render_sweep_table(opts, points, outcomes);
  atomic_write(join_path(sweep_dir, "sweep_table.txt"), table);
  svgplot::write_line_chart(join_path(sweep_dir, "sweep_curve.svg"),
                            "ASR over " + opts.axis, opts.axis, "ASR",
                            {{"train ASR", curve_x, curve_train},
                             {"test ASR", curve_x, curve_test}},
                            meta);
  svgplot::write_line_chart(join_path(sweep_dir, "loss_traces.svg"),
                            "loss traces over " + opts.axis, "epoch", "loss",
                            traces, meta);

  std::cout << table << "\nsweep report: "
            << join_path(sweep_dir, "sweep_report.json") << "\n";
  if (failures == points.size()) {
    throw std::runtime_error("all " + std::to_string(failures) +
                             " sweep points failed");
  }
  if (failures > 0) {
    std::cout << failures << " of " << points.size()
              << " points failed (recorded in the report)\n";
  }
}

void cmd_analyze(const RunConfig& cfg, const std::string& artifact_path) {
  const std::string path = default_artifact_path(cfg, artifact_path);
  PerturbationArtifact artifact = load_artifact(path);
  AttackDataset ds = build_dataset(cfg);
  ToyCaptioner model = model_for_artifact(cfg, artifact, path);
  const Split split = split_from_name(cfg.analysis.split);
  const auto split_entries = ds.split_entries(split);
  if (split_entries.empty()) {
    throw InputError("analysis split '" + cfg.analysis.split + "' is empty");
  }

  FeatureStudy study =
      collect_features(ds, artifact, model, split, split_entries.front()->prompt);
  PcaResult p = pca(study.features, 3);
  const int k = static_cast<int>(p.projections.cols());

  const std::string dir = join_path(cfg.output_dir, "analysis");
  const std::string meta = "config " + artifact.config_hash;

  std::vector<std::string> group_names;
  for (int id : study.class_ids) {
    group_names.push_back("class " + std::to_string(id));
  }
  group_names.push_back("anchor");
  std::vector<svgplot::ScatterPoint> pts(study.features.rows());
  for (int i = 0; i < static_cast<int>(study.features.rows()); ++i) {
    svgplot::ScatterPoint& q = pts[i];
    q.x = k > 0 ? p.projections(i, 0) : 0.0;
    q.y = k > 1 ? p.projections(i, 1) : 0.0;
    q.z = k > 2 ? p.projections(i, 2) : 0.0;
    if (i == study.anchor_row) {
      q.group = static_cast<int>(study.class_ids.size());
      q.emphasis = true;
    } else {
      q.group = static_cast<int>(
          std::lower_bound(study.class_ids.begin(), study.class_ids.end(),
                           study.class_labels[i]) -
          study.class_ids.begin());
    }
    q.hollow = study.kinds[i] == FeatureKind::kClean;
  }
  svgplot::write_scatter(join_path(dir, "pca_scatter.svg"),
                         "latent features, PC1 vs PC2 (hollow = clean)",
                         "PC1", "PC2", pts, group_names, meta);
  svgplot::write_scatter3d(join_path(dir, "subclusters_3d.svg"),
                           "latent sub-clusters, PC1-PC3", pts, group_names,
                           meta);

  const Eigen::MatrixXd align = alignment_matrix(study, artifact, model);
  std::vector<std::vector<double>> align_values(
      align.rows(), std::vector<double>(align.cols()));
  double diag_sum = 0.0, off_sum = 0.0;
  int diag_n = 0, off_n = 0;
  for (int r = 0; r < align.rows(); ++r) {
    for (int c = 0; c < align.cols(); ++c) {
      align_values[r][c] = align(r, c);
      if (r == c) {
        diag_sum += align(r, c);
        ++diag_n;
      } else {
        off_sum += align(r, c);
        ++off_n;
      }
    }
  }
  const double mean_diag = diag_n ? diag_sum / diag_n : 0.0;
  const double mean_off = off_n ? off_sum / off_n : 0.0;
  std::vector<std::string> align_rows, align_cols;
  for (int id : study.class_ids) {
    align_rows.push_back("class " + std::to_string(id));
    align_cols.push_back(artifact.targets.count(id) ? artifact.targets.at(id)
                                                    : "target?");
  }
  svgplot::write_heatmap(join_path(dir, "alignment_heatmap.svg"),
                         "target sequence probability by class", align_values,
                         align_rows, align_cols, meta);

  const auto confidence = token_confidence_matrix(artifact, ds, model, split);
  std::vector<std::string> conf_cols;
  for (int id : study.class_ids) {
    if (!artifact.targets.count(id)) continue;
    for (int tok : tokenizer().encode(artifact.targets.at(id))) {
      conf_cols.push_back(tokenizer().word(tok) + "(class" +
                          std::to_string(id) + ")");
    }
  }
  svgplot::write_heatmap(join_path(dir, "token_confidence.svg"),
                         "mean target-token probability", confidence,
                         align_rows, conf_cols, meta);

  const SeparationMetrics metrics = separation_metrics(study);
  json summary;
  summary["config_hash"] = artifact.config_hash;
  summary["split"] = cfg.analysis.split;
  summary["silhouette_perturbed"] = metrics.perturbed_silhouette;
  summary["clean_perturbed_centroid_distance"] =
      metrics.clean_perturbed_centroid_distance;
  summary["anchor_to_perturbed_centroid"] =
      metrics.anchor_to_perturbed_centroid;
  summary["anchor_to_clean_centroid"] = metrics.anchor_to_clean_centroid;
  summary["anchor_nearer_perturbed"] =
      metrics.anchor_to_perturbed_centroid < metrics.anchor_to_clean_centroid;
  summary["alignment_mean_diagonal"] = mean_diag;
  summary["alignment_mean_off_diagonal"] = mean_off;
  summary["alignment_diagonally_dominant"] = mean_diag > mean_off;
  summary["explained_variance_ratio"] = p.explained_variance_ratio;
  atomic_write(join_path(dir, "analysis_summary.json"),
               summary.dump(2) + "\n");

  std::cout << "silhouette (perturbed, class labels): "
            << fmt(metrics.perturbed_silhouette) << "\n"
            << "alignment diagonal " << fmt(mean_diag) << " vs off-diagonal "
            << fmt(mean_off)
            << (mean_diag > mean_off ? " (diagonally dominant)" : "") << "\n"
            << "anchor distance: perturbed centroid "
            << fmt(metrics.anchor_to_perturbed_centroid)
            << ", clean centroid "
            << fmt(metrics.anchor_to_clean_centroid) << "\n"
            << "analysis files: " << dir << "\n";
}

}  // namespace saup::cli
