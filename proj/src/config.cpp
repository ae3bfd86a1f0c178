// SPDX-License-Identifier: Apache-2.0
#include "c3po/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace c3po {

using nlohmann::json;

ConfigError::ConfigError(const std::string& what, std::size_t l, std::size_t c)
    : std::runtime_error(l > 0 ? what + " (line " + std::to_string(l) + ", column " +
                                     std::to_string(c) + ")"
                               : what),
      line(l),
      column(c) {}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(lr >= 0.0)) throw std::invalid_argument("train: lr must be >= 0");
  if (augment & ~7u) throw std::invalid_argument("train: unknown augmentation bits");
  if (data.synthetic() && data.train_count == 0)
    throw std::invalid_argument("data: train_count must be positive");
  if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0))
    throw std::invalid_argument("data: train_fraction must be in (0, 1)");
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  synth.validate();
  if (train.data.synthetic() && synth.num_classes() != model.num_classes)
    throw std::invalid_argument("model: num_classes " + std::to_string(model.num_classes) +
                                " does not match the synthetic data (" +
                                std::to_string(synth.num_classes()) + " classes)");
}

// ---------------------------------------------------------------------------
// Serialisation
// ---------------------------------------------------------------------------

json to_json(const ModelConfig& c) {
  return json{{"backbone", c.backbone},
              {"widths", c.widths},
              {"branches", c.branches},
              {"fusion", std::string(fusion_name(c.fusion))},
              {"msf_levels", c.msf_levels},
              {"msf_channels", c.msf_channels},
              {"fused_channels", c.fused_channels},
              {"head", std::string(head_name(c.head))},
              {"num_classes", c.num_classes},
              {"share_backbone", c.share_backbone},
              {"share_info_conv", c.share_info_conv},
              {"share_change_conv", c.share_change_conv},
              {"use_weighted_loss", c.use_weighted_loss},
              {"seed", c.seed}};
}

namespace {

json augment_json(unsigned ops) {
  json a = json::array();
  if (ops & kRot90s) a.push_back("rot90s");
  if (ops & kHflip) a.push_back("hflip");
  if (ops & kColorJitter) a.push_back("color_jitter");
  return a;
}

}  // namespace

json to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"eval_every_epoch", c.eval_every_epoch},
              {"checkpoint_dir", c.checkpoint_dir},
              {"augment", augment_json(c.augment)},
              {"seed", c.seed},
              {"data", json{{"path", c.data.path},
                            {"test_path", c.data.test_path},
                            {"train_count", c.data.train_count},
                            {"test_count", c.data.test_count},
                            {"train_fraction", c.data.train_fraction},
                            {"seed", c.data.seed}}}};
}

json to_json(const SynthConfig& c) {
  json shapes = json::array();
  for (auto k : c.shapes) shapes.push_back(std::string(shape_kind_name(k)));
  return json{{"image_size", c.image_size},
              {"distractors", {c.min_distractors, c.max_distractors}},
              {"changes", {c.min_changes, c.max_changes}},
              {"object_size", {c.min_object_size, c.max_object_size}},
              {"shapes", shapes},
              {"change_probs",
               {{"appear", c.change_probs[0]},
                {"disappear", c.change_probs[1]},
                {"exchange", c.change_probs[2]}}},
              {"background_seed", c.background_seed},
              {"texture_amplitude", c.texture_amplitude},
              {"jitter", c.jitter},
              {"noise_sigma", c.noise_sigma},
              {"misregistration", c.misregistration},
              {"annotation_noise", c.annotation_noise},
              {"multiclass", c.multiclass}};
}

json to_json(const RunConfig& c) {
  return json{{"version", RunConfig::kVersion},
              {"model", to_json(c.model)},
              {"train", to_json(c.train)},
              {"synth", to_json(c.synth)}};
}

namespace {

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
}

void check_keys(const json& j, const std::string& where, std::set<std::string> allowed) {
  require_object(j, where);
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError("unknown key '" + where + "." + key + "' (allowed: " + list + ")");
    }
}

template <typename V>
void read(const json& j, const std::string& where, const char* key, V& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<V>();
  } catch (const json::exception&) {
    throw ConfigError("'" + where + "." + key + "' has the wrong type (" +
                      std::string(it->type_name()) + ")");
  }
}

template <typename Fn>
auto wrap(const std::string& where, Fn fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

void read_range(const json& j, const std::string& where, const char* key, int& lo, int& hi) {
  std::array<int, 2> r{lo, hi};
  read(j, where, key, r);
  lo = r[0];
  hi = r[1];
}

}  // namespace

ModelConfig model_config_from_json(const json& j) {
  const std::string w = "model";
  check_keys(j, w,
             {"backbone", "widths", "branches", "fusion", "msf_levels", "msf_channels",
              "fused_channels", "head", "num_classes", "share_backbone", "share_info_conv",
              "share_change_conv", "use_weighted_loss", "seed"});
  ModelConfig c;
  read(j, w, "backbone", c.backbone);
  read(j, w, "widths", c.widths);
  read(j, w, "branches", c.branches);
  std::string fusion(fusion_name(c.fusion));
  read(j, w, "fusion", fusion);
  c.fusion = wrap(w, [&] { return parse_fusion(fusion); });
  read(j, w, "msf_levels", c.msf_levels);
  read(j, w, "msf_channels", c.msf_channels);
  read(j, w, "fused_channels", c.fused_channels);
  std::string head(head_name(c.head));
  read(j, w, "head", head);
  c.head = wrap(w, [&] { return parse_head(head); });
  read(j, w, "num_classes", c.num_classes);
  read(j, w, "share_backbone", c.share_backbone);
  read(j, w, "share_info_conv", c.share_info_conv);
  read(j, w, "share_change_conv", c.share_change_conv);
  read(j, w, "use_weighted_loss", c.use_weighted_loss);
  read(j, w, "seed", c.seed);
  return c;
}

TrainConfig train_config_from_json(const json& j) {
  const std::string w = "train";
  check_keys(j, w,
             {"epochs", "batch_size", "lr", "eval_every_epoch", "checkpoint_dir", "augment", "seed",
              "data"});
  TrainConfig c;
  read(j, w, "epochs", c.epochs);
  read(j, w, "batch_size", c.batch_size);
  read(j, w, "lr", c.lr);
  read(j, w, "eval_every_epoch", c.eval_every_epoch);
  read(j, w, "checkpoint_dir", c.checkpoint_dir);
  read(j, w, "seed", c.seed);
  if (auto it = j.find("augment"); it != j.end()) {
    std::vector<std::string> ops;
    read(j, w, "augment", ops);
    c.augment = 0;
    for (const auto& op : ops) {
      if (op == "rot90s") c.augment |= kRot90s;
      else if (op == "hflip") c.augment |= kHflip;
      else if (op == "color_jitter") c.augment |= kColorJitter;
      else throw ConfigError("unknown augmentation '" + op + "' (use rot90s, hflip, color_jitter)");
    }
  }
  if (auto it = j.find("data"); it != j.end()) {
    const std::string d = "train.data";
    check_keys(*it, d, {"path", "test_path", "train_count", "test_count", "train_fraction", "seed"});
    read(*it, d, "path", c.data.path);
    read(*it, d, "test_path", c.data.test_path);
    read(*it, d, "train_count", c.data.train_count);
    read(*it, d, "test_count", c.data.test_count);
    read(*it, d, "train_fraction", c.data.train_fraction);
    read(*it, d, "seed", c.data.seed);
  }
  return c;
}

SynthConfig synth_config_from_json(const json& j) {
  const std::string w = "synth";
  check_keys(j, w,
             {"image_size", "distractors", "changes", "object_size", "shapes", "change_probs",
              "background_seed", "texture_amplitude", "jitter", "noise_sigma", "misregistration",
              "annotation_noise", "multiclass"});
  SynthConfig c;
  read(j, w, "image_size", c.image_size);
  read_range(j, w, "distractors", c.min_distractors, c.max_distractors);
  read_range(j, w, "changes", c.min_changes, c.max_changes);
  read_range(j, w, "object_size", c.min_object_size, c.max_object_size);
  if (auto it = j.find("shapes"); it != j.end()) {
    std::vector<std::string> names;
    read(j, w, "shapes", names);
    c.shapes.clear();
    for (const auto& n : names) c.shapes.push_back(wrap(w, [&] { return parse_shape_kind(n); }));
  }
  if (auto it = j.find("change_probs"); it != j.end()) {
    const std::string p = "synth.change_probs";
    check_keys(*it, p, {"appear", "disappear", "exchange"});
    c.change_probs = {0.0, 0.0, 0.0};
    read(*it, p, "appear", c.change_probs[0]);
    read(*it, p, "disappear", c.change_probs[1]);
    read(*it, p, "exchange", c.change_probs[2]);
  }
  read(j, w, "background_seed", c.background_seed);
  read(j, w, "texture_amplitude", c.texture_amplitude);
  read(j, w, "jitter", c.jitter);
  read(j, w, "noise_sigma", c.noise_sigma);
  read(j, w, "misregistration", c.misregistration);
  read(j, w, "annotation_noise", c.annotation_noise);
  read(j, w, "multiclass", c.multiclass);
  return c;
}

RunConfig run_config_from_json(const json& j) {
  check_keys(j, "config", {"version", "model", "train", "synth"});
  auto version = j.find("version");
  if (version == j.end()) throw ConfigError("config lacks the 'version' field (expected 1)");
  if (!version->is_number_integer() || version->get<int>() != RunConfig::kVersion)
    throw ConfigError("unsupported config version " + version->dump() + " (expected 1)");
  RunConfig c;
  if (auto it = j.find("model"); it != j.end()) c.model = model_config_from_json(*it);
  if (auto it = j.find("train"); it != j.end()) c.train = train_config_from_json(*it);
  if (auto it = j.find("synth"); it != j.end()) c.synth = synth_config_from_json(*it);
  wrap("config", [&] {
    c.validate();
    return 0;
  });
  return c;
}

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // Byte offset -> 1-based line/column.
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t end = std::min(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string msg = e.what();
    if (auto pos = msg.find("parse error"); pos != std::string::npos) msg = msg.substr(pos);
    throw ConfigError("invalid JSON: " + msg, line, column);
  }
  return run_config_from_json(j);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::uint64_t config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace c3po
