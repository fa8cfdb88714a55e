#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dfd {

/// Flat run configuration. Every field has a `key = value` spelling listed by
/// config_keys(); unknown keys raise ConfigError.
struct TrainConfig {
  int shots = 2;
  int n_aug = 80;  ///< augmented images per shot
  double anomaly_prob = 0.7;
  bool rotate = true;
  double max_rotation = 90.0;
  int epochs = 80;
  int batch = 8;
  double lr_adaptor = 5e-4;
  double lr_gauss = 2e-4;
  double lr_perlin = 1e-4;
  double theta = 0.8;
  double lambda_per = 2.0;
  double lambda_sim = 0.02;
  double noise_mean = 0.0;
  double noise_std = 0.015;
  int resolution = 256;
  std::uint64_t seed = 0;

  bool mfic = true;
  bool gaussian_disc = true;
  bool perlin_disc = true;
  bool sim_loss = true;
  bool literal_pixel_loss = false;
  double sim_sign = 1.0;
  std::string loss_kind = "hinge";
  std::string score_norm = "set";

  double perlin_threshold = 0.5;
  double beta_min = 0.15;
  double beta_max = 1.0;
  std::string texture_mode = "procedural";
  std::string texture_dir;

  std::string backbone = "random-conv";
  std::uint64_t backbone_seed = 0;
  std::string backbone_weights;
  int aggregation = 3;

  int perlin_width = 128;
  int perlin_heads = 4;
  int perlin_mlp_ratio = 2;

  /// Throws ConfigError on unknown key or unparsable value.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  /// Range and consistency checks (ConfigError).
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
  bool published;  ///< default taken from the published training recipe
};

const std::vector<ConfigKey>& config_keys();

/// Parses `key = value` lines; '#' starts a comment.
std::map<std::string, std::string> parse_key_values(const std::string& text);
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);
/// Applies "key=value" strings in order.
void apply_overrides(TrainConfig& cfg, const std::vector<std::string>& overrides);
/// One `key = value` line per key, in config_keys() order.
std::string to_text(const TrainConfig& cfg);
std::uint64_t config_hash(const TrainConfig& cfg);

}  // namespace dfd
