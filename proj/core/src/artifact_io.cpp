#include "saup/artifact_io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "saup/hash.hpp"

namespace saup {

using nlohmann::json;

namespace {

constexpr int kArtifactVersion = 1;
constexpr int kReportVersion = 1;

json tensor_to_json(const Tensor3& t) {
  json j;
  j["channels"] = t.channels;
  j["height"] = t.height;
  j["width"] = t.width;
  j["values"] = t.data;
  return j;
}

Tensor3 tensor_from_json(const json& j, const std::string& where) {
  Tensor3 t(j.at("channels").get<int>(), j.at("height").get<int>(),
            j.at("width").get<int>());
  std::vector<double> values = j.at("values").get<std::vector<double>>();
  if (values.size() != t.data.size())
    throw SchemaError(where + ".values: expected " +
                      std::to_string(t.data.size()) + " entries, got " +
                      std::to_string(values.size()));
  t.data = std::move(values);
  return t;
}

json config_to_json(const AttackConfig& c) {
  json j;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["momentum"] = c.momentum;
  j["loss"] = {{"lambda", c.loss.lambda},
               {"margin", c.loss.margin},
               {"length_normalize", c.loss.length_normalize}};
  j["seed"] = c.seed;
  j["mask"] = {{"shape", to_string(c.mask.shape)},
               {"reference_width", c.mask.reference_width}};
  j["space"] = to_string(c.space);
  j["batch"] = c.batch;
  j["normalize_gradient"] = c.normalize_gradient;
  j["per_example_trace"] = c.per_example_trace;
  return j;
}

AttackConfig config_from_json(const json& j) {
  AttackConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.momentum = j.at("momentum").get<double>();
  c.loss.lambda = j.at("loss").at("lambda").get<double>();
  c.loss.margin = j.at("loss").at("margin").get<double>();
  c.loss.length_normalize = j.at("loss").at("length_normalize").get<bool>();
  c.seed = j.at("seed").get<uint64_t>();
  c.mask.shape = mask_shape_from_string(j.at("mask").at("shape").get<std::string>());
  c.mask.reference_width = j.at("mask").at("reference_width").get<int>();
  c.space = space_from_string(j.at("space").get<std::string>());
  c.batch = j.at("batch").get<int>();
  c.normalize_gradient = j.at("normalize_gradient").get<bool>();
  c.per_example_trace = j.at("per_example_trace").get<bool>();
  return c;
}

json spec_to_json(const NormalizationSpec& s) {
  json j;
  j["mean"] = s.mean;
  j["std"] = s.std;
  j["input_height"] = s.input_height;
  j["input_width"] = s.input_width;
  return j;
}

NormalizationSpec spec_from_json(const json& j) {
  NormalizationSpec s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.std = j.at("std").get<std::vector<double>>();
  s.input_height = j.at("input_height").get<int>();
  s.input_width = j.at("input_width").get<int>();
  return s;
}

}  // namespace

std::string artifact_to_json(const PerturbationArtifact& a) {
  json j;
  j["schema_version"] = kArtifactVersion;
  j["config"] = config_to_json(a.config);
  j["config_hash"] = a.config_hash;
  j["normalization"] = spec_to_json(a.normalization);
  j["mask"] = {{"shape", to_string(a.mask_spec.shape)},
               {"reference_width", a.mask_spec.reference_width}};

  json targets = json::object();
  for (const auto& [cls, target] : a.targets)
    targets[std::to_string(cls)] = target;
  j["targets"] = std::move(targets);

  j["model"] = {{"reference", a.model_reference},
                {"weights_hash", to_hex(a.model_weights_hash)}};
  j["loss_trace"] = a.loss_trace;
  j["recorded_train_asr"] = a.recorded_train_asr;

  json dn = tensor_to_json(a.delta_normalized.values);
  dn["lower_bound"] = a.delta_normalized.lower_bound;
  dn["upper_bound"] = a.delta_normalized.upper_bound;
  j["delta_normalized"] = std::move(dn);

  // 8-bit grid stored as integers so the round trip is exact by construction.
  json dp;
  dp["channels"] = a.delta_pixel.channels();
  dp["height"] = a.delta_pixel.height();
  dp["width"] = a.delta_pixel.width();
  std::vector<int> bytes;
  bytes.reserve(a.delta_pixel.values.data.size());
  for (double v : a.delta_pixel.values.data)
    bytes.push_back(static_cast<int>(std::lround(v * 255.0)));
  dp["values_8bit"] = std::move(bytes);
  j["delta_pixel"] = std::move(dp);

  return j.dump(2) + "\n";
}

void save_artifact(const PerturbationArtifact& artifact,
                   const std::string& path) {
  atomic_write(path, artifact_to_json(artifact));
}

PerturbationArtifact load_artifact(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open artifact '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("artifact '" + path + "': " + e.what());
  }
  try {
    int version = j.at("schema_version").get<int>();
    if (version != kArtifactVersion)
      throw SchemaError("artifact version " + std::to_string(version) +
                        " unsupported");
    PerturbationArtifact a;
    a.config = config_from_json(j.at("config"));
    a.config_hash = j.at("config_hash").get<std::string>();
    a.normalization = spec_from_json(j.at("normalization"));
    a.mask_spec.shape =
        mask_shape_from_string(j.at("mask").at("shape").get<std::string>());
    a.mask_spec.reference_width =
        j.at("mask").at("reference_width").get<int>();
    for (const auto& [key, value] : j.at("targets").items())
      a.targets[std::stoi(key)] = value.get<std::string>();
    a.model_reference = j.at("model").at("reference").get<std::string>();
    a.model_weights_hash = std::stoull(
        j.at("model").at("weights_hash").get<std::string>(), nullptr, 16);
    a.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    a.recorded_train_asr = j.at("recorded_train_asr").get<double>();

    const json& dn = j.at("delta_normalized");
    a.delta_normalized.values = tensor_from_json(dn, "delta_normalized");
    a.delta_normalized.lower_bound =
        dn.at("lower_bound").get<std::vector<double>>();
    a.delta_normalized.upper_bound =
        dn.at("upper_bound").get<std::vector<double>>();

    const json& dp = j.at("delta_pixel");
    Tensor3 pix(dp.at("channels").get<int>(), dp.at("height").get<int>(),
                dp.at("width").get<int>());
    std::vector<int> bytes = dp.at("values_8bit").get<std::vector<int>>();
    if (bytes.size() != pix.data.size())
      throw SchemaError("delta_pixel.values_8bit: wrong entry count");
    for (size_t i = 0; i < bytes.size(); ++i) {
      if (bytes[i] < 0 || bytes[i] > 255)
        throw SchemaError("delta_pixel.values_8bit: entry outside [0,255]");
      pix.data[i] = bytes[i] / 255.0;
    }
    a.delta_pixel = ImageTensor(std::move(pix));
    return a;
  } catch (const json::exception& e) {
    throw SchemaError("artifact '" + path + "': " + e.what());
  }
}

std::string report_to_json(const EvalReport& r) {
  json j;
  j["schema_version"] = kReportVersion;
  j["split"] = r.split;
  j["config_hash"] = r.config_hash;
  j["overall_asr"] = r.overall_asr;
  j["raw_delta_asr"] = r.raw_delta_asr;
  j["quantization_gap"] = r.quantization_gap;

  json per_class = json::object(), counts = json::object();
  for (const auto& [cls, asr] : r.per_class_asr)
    per_class[std::to_string(cls)] = asr;
  for (const auto& [cls, n] : r.per_class_count)
    counts[std::to_string(cls)] = n;
  j["per_class_asr"] = std::move(per_class);
  j["per_class_count"] = std::move(counts);

  json traj = json::object();
  for (const auto& [id, asr] : r.per_trajectory_asr) traj[id] = asr;
  j["per_trajectory_asr"] = std::move(traj);

  json prompts = json::object();
  for (const auto& [text, asr] : r.per_prompt_asr) prompts[text] = asr;
  j["per_prompt_asr"] = std::move(prompts);

  json confusion = json::object();
  for (const auto& [cls, row] : r.confusion) {
    json jr = json::object();
    for (const auto& [pred, n] : row) jr[std::to_string(pred)] = n;
    confusion[std::to_string(cls)] = std::move(jr);
  }
  j["confusion"] = std::move(confusion);

  j["token_confidence"] = {{"classes", r.token_confidence_classes},
                           {"columns", r.token_confidence_columns},
                           {"matrix", r.token_confidence}};
  return j.dump(2) + "\n";
}

void save_report(const EvalReport& report, const std::string& path) {
  atomic_write(path, report_to_json(report));
}

EvalReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("report '" + path + "': " + e.what());
  }
  try {
    EvalReport r;
    r.split = j.at("split").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.overall_asr = j.at("overall_asr").get<double>();
    r.raw_delta_asr = j.at("raw_delta_asr").get<double>();
    r.quantization_gap = j.at("quantization_gap").get<double>();
    for (const auto& [key, value] : j.at("per_class_asr").items())
      r.per_class_asr[std::stoi(key)] = value.get<double>();
    for (const auto& [key, value] : j.at("per_class_count").items())
      r.per_class_count[std::stoi(key)] = value.get<int>();
    for (const auto& [key, value] : j.at("per_trajectory_asr").items())
      r.per_trajectory_asr[key] = value.get<double>();
    for (const auto& [key, value] : j.at("per_prompt_asr").items())
      r.per_prompt_asr[key] = value.get<double>();
    for (const auto& [key, value] : j.at("confusion").items())
      for (const auto& [pred, n] : value.items())
        r.confusion[std::stoi(key)][std::stoi(pred)] = n.get<int>();
    const json& tc = j.at("token_confidence");
    r.token_confidence_classes = tc.at("classes").get<std::vector<int>>();
    r.token_confidence_columns =
        tc.at("columns").get<std::vector<std::string>>();
    r.token_confidence =
        tc.at("matrix").get<std::vector<std::vector<double>>>();
    return r;
  } catch (const json::exception& e) {
    throw SchemaError("report '" + path + "': " + e.what());
  }
}

void atomic_write(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
      fs::remove(tmp);
      throw IoError("short write to '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, target);
}

}  // namespace saup
