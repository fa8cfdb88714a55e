#include "dfd/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "dfd/error.hpp"
#include "dfd/rng.hpp"

namespace dfd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* kind) {
  throw ConfigError("key '" + key + "': expected " + kind + ", got '" + value + "'");
}

int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  if (v.empty()) bad_value(key, v, "a number");
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || !std::isfinite(out)) bad_value(key, v, "a finite number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Prefer the shortest spelling that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    char shorter[64];
    std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Binding {
  ConfigKey info;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define DFD_INT(field, pub, help)                                                              \
  Binding{{#field, std::to_string(TrainConfig{}.field), help, pub},                            \
          [](TrainConfig& c, const std::string& v) { c.field = parse_int(#field, v); },         \
          [](const TrainConfig& c) { return std::to_string(c.field); }}
#define DFD_U64(field, pub, help)                                                              \
  Binding{{#field, std::to_string(TrainConfig{}.field), help, pub},                            \
          [](TrainConfig& c, const std::string& v) { c.field = parse_u64(#field, v); },         \
          [](const TrainConfig& c) { return std::to_string(c.field); }}
#define DFD_DBL(field, pub, help)                                                              \
  Binding{{#field, fmt_double(TrainConfig{}.field), help, pub},                                \
          [](TrainConfig& c, const std::string& v) { c.field = parse_double(#field, v); },      \
          [](const TrainConfig& c) { return fmt_double(c.field); }}
#define DFD_BOOL(field, pub, help)                                                             \
  Binding{{#field, fmt_bool(TrainConfig{}.field), help, pub},                                  \
          [](TrainConfig& c, const std::string& v) { c.field = parse_bool(#field, v); },        \
          [](const TrainConfig& c) { return fmt_bool(c.field); }}
#define DFD_STR(field, pub, help)                                                              \
  Binding{{#field, TrainConfig{}.field, help, pub},                                            \
          [](TrainConfig& c, const std::string& v) { c.field = v; },                            \
          [](const TrainConfig& c) { return c.field; }}

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = {
      DFD_INT(shots, true, "normal training images per category"),
      DFD_INT(n_aug, true, "augmented images generated per shot"),
      DFD_DBL(anomaly_prob, true, "probability that an augmented image receives a defect"),
      DFD_BOOL(rotate, true, "random rotation of augmented images"),
      DFD_DBL(max_rotation, true, "rotation range in degrees (symmetric)"),
      DFD_INT(epochs, true, "training epochs"),
      DFD_INT(batch, true, "batch size"),
      DFD_DBL(lr_adaptor, true, "Adam learning rate of the feature adaptor"),
      DFD_DBL(lr_gauss, true, "Adam learning rate of the Gaussian discriminator"),
      DFD_DBL(lr_perlin, true, "Adam learning rate of the Perlin discriminator"),
      DFD_DBL(theta, true, "hinge margin of the Gaussian and pixel losses"),
      DFD_DBL(lambda_per, true, "weight of the Perlin loss (use 1 for VisA-style runs)"),
      DFD_DBL(lambda_sim, true, "weight of the similarity loss (use 1 for VisA-style runs)"),
      DFD_DBL(noise_mean, true, "mean of the feature-level Gaussian noise"),
      DFD_DBL(noise_std, false, "standard deviation of the feature-level Gaussian noise"),
      DFD_INT(resolution, true, "square input resolution in pixels"),
      DFD_U64(seed, false, "root seed of every random stream"),
      DFD_BOOL(mfic, true, "multi-frequency split into low and high bands"),
      DFD_BOOL(gaussian_disc, true, "train and score with the Gaussian discriminator"),
      DFD_BOOL(perlin_disc, true, "train and score with the Perlin discriminator"),
      DFD_BOOL(sim_loss, true, "enable the similarity loss"),
      DFD_BOOL(literal_pixel_loss, false, "apply the pixel-loss mask inside the hinge"),
      DFD_DBL(sim_sign, false, "similarity loss is 1 - sim_sign * cos (+1 or -1)"),
      DFD_STR(loss_kind, true, "hinge | ce | focal | mse"),
      DFD_STR(score_norm, false, "min-max bounds of score maps: set (shared by the scored set) | image"),
      DFD_DBL(perlin_threshold, false, "binarization threshold of the Perlin field"),
      DFD_DBL(beta_min, false, "lower bound of the blending opacity"),
      DFD_DBL(beta_max, false, "upper bound of the blending opacity"),
      DFD_STR(texture_mode, false, "procedural | folder"),
      DFD_STR(texture_dir, false, "texture image folder for texture_mode = folder"),
      DFD_STR(backbone, false, "random-conv | imported"),
      DFD_U64(backbone_seed, false, "seed of the random-conv backbone weights"),
      DFD_STR(backbone_weights, false, "DFDW weight file for backbone = imported"),
      DFD_INT(aggregation, false, "local feature aggregation neighborhood (odd)"),
      DFD_INT(perlin_width, false, "token width of the Perlin discriminator"),
      DFD_INT(perlin_heads, false, "attention heads of the Perlin discriminator"),
      DFD_INT(perlin_mlp_ratio, false, "MLP expansion ratio of the Perlin discriminator"),
  };
  return table;
}

const Binding& find_binding(const std::string& key) {
  for (const auto& b : bindings()) {
    if (b.info.name == key) return b;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) { find_binding(key).set(*this, value); }

std::string TrainConfig::get(const std::string& key) const { return find_binding(key).get(*this); }

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(shots >= 1 && shots <= 16, "shots must be in [1, 16]");
  require(n_aug >= 1, "n_aug must be positive");
  require(anomaly_prob >= 0.0 && anomaly_prob <= 1.0, "anomaly_prob must be in [0, 1]");
  require(epochs >= 0, "epochs must be non-negative");
  require(batch >= 1, "batch must be positive");
  require(lr_adaptor > 0 && lr_gauss > 0 && lr_perlin > 0, "learning rates must be positive");
  require(theta >= 0.0, "theta must be non-negative");
  require(lambda_per >= 0.0 && lambda_sim >= 0.0, "loss weights must be non-negative");
  require(noise_std >= 0.0, "noise_std must be non-negative");
  require(resolution >= 16 && resolution % 16 == 0, "resolution must be a positive multiple of 16");
  require(gaussian_disc || perlin_disc, "at least one discriminator must be enabled");
  require(sim_sign == 1.0 || sim_sign == -1.0, "sim_sign must be +1 or -1");
  require(loss_kind == "hinge" || loss_kind == "ce" || loss_kind == "focal" || loss_kind == "mse",
          "loss_kind must be hinge, ce, focal or mse");
  require(score_norm == "set" || score_norm == "image", "score_norm must be set or image");
  require(beta_min >= 0.0 && beta_min <= beta_max && beta_max <= 1.0, "need 0 <= beta_min <= beta_max <= 1");
  require(texture_mode == "procedural" || texture_mode == "folder", "texture_mode must be procedural or folder");
  require(texture_mode != "folder" || !texture_dir.empty(), "texture_mode = folder needs texture_dir");
  require(backbone == "random-conv" || backbone == "imported", "backbone must be random-conv or imported");
  require(backbone != "imported" || !backbone_weights.empty(), "backbone = imported needs backbone_weights");
  require(aggregation >= 1 && aggregation % 2 == 1, "aggregation must be odd and positive");
  require(perlin_width >= 1 && perlin_heads >= 1 && perlin_width % perlin_heads == 0,
          "perlin_width must be a positive multiple of perlin_heads");
  require(perlin_mlp_ratio >= 1, "perlin_mlp_ratio must be positive");
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& b : bindings()) out.push_back(b.info);
    return out;
  }();
  return keys;
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

TrainConfig parse_config(const std::string& text) {
  TrainConfig cfg;
  for (const auto& [k, v] : parse_key_values(text)) cfg.set(k, v);
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_overrides(TrainConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    cfg.set(trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
  }
}

std::string to_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& b : bindings()) out += b.info.name + " = " + b.get(cfg) + "\n";
  return out;
}

std::uint64_t config_hash(const TrainConfig& cfg) { return fnv1a64(to_text(cfg)); }

}  // namespace dfd
