#include "locref/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "locref/losses.hpp"

namespace locref {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": " + v);
}

template <typename T>
T parse_num(const std::string& key, const std::string& v) {
  try {
    if constexpr (std::is_same_v<T, double>) return std::stod(v);
    if constexpr (std::is_same_v<T, int>) return std::stoi(v);
    if constexpr (std::is_same_v<T, std::uint64_t>) return std::stoull(v);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number for " + key + ": " + v);
  }
  return T{};
}

}  // namespace

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config " + path + ":" + std::to_string(lineno) + ": expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void TrainConfig::validate() const {
  if (lr <= 0) throw std::invalid_argument("config: lr must be positive");
  if (epochs <= 0) throw std::invalid_argument("config: epochs must be positive");
  if (batch_size <= 0) throw std::invalid_argument("config: batch_size must be positive");
  if (optimizer != "adam") throw std::invalid_argument("config: only the adam optimizer is supported");
  loss_mode_from_string(loss);
  if (attention_propagation && !align_attention)
    throw std::invalid_argument("config: attention_propagation requires align_attention");
  if (channel_scale <= 0) throw std::invalid_argument("config: channel_scale must be positive");
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("config: threshold must be in (0,1)");
  if (deep_loss_weight < 0) throw std::invalid_argument("config: deep_loss_weight must be nonnegative");
  if (val_interval <= 0) throw std::invalid_argument("config: val_interval must be positive");
  normalize_mode_from_string(normalize);
}

ModelConfig TrainConfig::model_config() const {
  ModelConfig mc;
  for (auto& c : mc.encoder.channels) c = std::max(1, c / channel_scale);
  mc.encoder.learned_pool = learned_pool;
  mc.encoder.align_attention = align_attention;
  mc.encoder.attention_propagation = attention_propagation;
  mc.deep_supervision = deep_supervision;
  return mc;
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  std::map<std::string, std::string> kv;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", lr);
  kv["lr"] = buf;
  kv["epochs"] = std::to_string(epochs);
  kv["batch_size"] = std::to_string(batch_size);
  kv["optimizer"] = optimizer;
  kv["loss"] = loss;
  kv["learned_pool"] = learned_pool ? "true" : "false";
  kv["align_attention"] = align_attention ? "true" : "false";
  kv["attention_propagation"] = attention_propagation ? "true" : "false";
  kv["deep_supervision"] = deep_supervision ? "true" : "false";
  kv["seed"] = std::to_string(seed);
  kv["data_manifest"] = data_manifest;
  kv["checkpoint_dir"] = checkpoint_dir;
  kv["eval_split"] = eval_split;
  kv["channel_scale"] = std::to_string(channel_scale);
  std::snprintf(buf, sizeof(buf), "%.17g", threshold);
  kv["threshold"] = buf;
  std::snprintf(buf, sizeof(buf), "%.17g", deep_loss_weight);
  kv["deep_loss_weight"] = buf;
  kv["normalize"] = normalize;
  kv["backbone_weights"] = backbone_weights;
  kv["backbone_into_diff"] = backbone_into_diff ? "true" : "false";
  kv["val_interval"] = std::to_string(val_interval);
  return kv;
}

TrainConfig TrainConfig::from_map(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  for (const auto& [key, value] : kv) {
    if (key == "lr")
      c.lr = parse_num<double>(key, value);
    else if (key == "epochs")
      c.epochs = parse_num<int>(key, value);
    else if (key == "batch_size")
      c.batch_size = parse_num<int>(key, value);
    else if (key == "optimizer")
      c.optimizer = value;
    else if (key == "loss")
      c.loss = value;
    else if (key == "learned_pool")
      c.learned_pool = parse_bool(key, value);
    else if (key == "align_attention")
      c.align_attention = parse_bool(key, value);
    else if (key == "attention_propagation")
      c.attention_propagation = parse_bool(key, value);
    else if (key == "deep_supervision")
      c.deep_supervision = parse_bool(key, value);
    else if (key == "seed")
      c.seed = parse_num<std::uint64_t>(key, value);
    else if (key == "data_manifest")
      c.data_manifest = value;
    else if (key == "checkpoint_dir")
      c.checkpoint_dir = value;
    else if (key == "eval_split")
      c.eval_split = value;
    else if (key == "channel_scale")
      c.channel_scale = parse_num<int>(key, value);
    else if (key == "threshold")
      c.threshold = parse_num<double>(key, value);
    else if (key == "deep_loss_weight")
      c.deep_loss_weight = parse_num<double>(key, value);
    else if (key == "normalize")
      c.normalize = value;
    else if (key == "backbone_weights")
      c.backbone_weights = value;
    else if (key == "backbone_into_diff")
      c.backbone_into_diff = parse_bool(key, value);
    else if (key == "val_interval")
      c.val_interval = parse_num<int>(key, value);
    else
      throw std::invalid_argument("config: unknown key " + key);
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::from_file(const std::string& path) {
  auto kv = parse_kv_file(path);
  // Environment overrides: LOCREF_<KEY> with the key upper-cased.
  static const char* kKeys[] = {"lr",
                                "epochs",
                                "batch_size",
                                "optimizer",
                                "loss",
                                "learned_pool",
                                "align_attention",
                                "attention_propagation",
                                "deep_supervision",
                                "seed",
                                "data_manifest",
                                "checkpoint_dir",
                                "eval_split",
                                "channel_scale",
                                "threshold",
                                "deep_loss_weight",
                                "normalize",
                                "backbone_weights",
                                "backbone_into_diff",
                                "val_interval"};
  for (const char* key : kKeys) {
    std::string env = "LOCREF_";
    for (const char* p = key; *p; ++p) env += static_cast<char>(std::toupper(*p));
    if (const char* v = std::getenv(env.c_str())) kv[key] = v;
  }
  return from_map(kv);
}

}  // namespace locref
