#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dfd/feature_map.hpp"
#include "dfd/image.hpp"

namespace dfd {

/// Gradient-lattice noise sampled on an h x w pixel grid. `period` is the
/// number of lattice cells per axis.
struct PerlinField {
  int height = 0;
  int width = 0;
  int period = 0;
  std::uint64_t seed = 0;
  std::vector<float> data;

  float at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Image-level pseudo-anomaly. `normal` is the clean source the defect was
/// blended into (the rotated shot), kept for feature pairing.
struct AnomalySample {
  Image image;
  Image normal;
  Mask mask;
  double beta = 0.0;
  bool is_anomalous = false;
};

struct NoiseSpec {
  double mean = 0.0;
  double std = 0.015;
  std::uint64_t seed = 0;
};

/// Sampling policy for augment(). Defaults mirror the training defaults.
struct AugmentPolicy {
  int count = 80;
  double anomaly_prob = 0.7;
  bool rotate = true;
  double max_rotation_deg = 90.0;
  double perlin_threshold = 0.5;
  std::vector<int> perlin_periods{2, 4, 8, 16, 32};
  double beta_min = 0.15;
  double beta_max = 1.0;
  int mask_attempts = 8;
  std::string texture_mode = "procedural";
  std::filesystem::path texture_dir;
};

PerlinField perlin(int h, int w, int period, std::uint64_t seed);
/// 1 where field > threshold.
Mask perlin_mask(const PerlinField& p, double threshold);
/// Element-wise AND of two equally sized masks.
Mask compose_mask(const Mask& foreground, const Mask& noise);

/// I_a = (1-M) I + (1-beta) M I + beta M I_t. Pixels outside the mask are
/// copied, so they stay bit-identical to `img`.
AnomalySample blend_anomaly(const Image& img, const Image& texture, const Mask& mask, double beta);

/// Multi-octave Perlin color texture in [0,1].
Image procedural_texture(int h, int w, std::uint64_t seed);
/// Sorted list of PNG/PPM files in `dir`.
std::vector<std::filesystem::path> list_texture_files(const std::filesystem::path& dir);
/// "procedural" or "folder". Folder mode picks a file uniformly by seed and
/// resizes it to h x w.
Image texture_source(const std::string& mode, std::uint64_t seed, int h, int w,
                     const std::filesystem::path& dir = {});
/// Index that texture_source would pick among `count` files.
std::size_t texture_pick(std::uint64_t seed, std::size_t count);

/// Emits policy.count samples from one normal image. Sample k depends only on
/// (seed, k), so samples may be generated in any order or in parallel.
std::vector<AnomalySample> augment(const Image& img, const AugmentPolicy& policy, std::uint64_t seed);
AnomalySample augment_one(const Image& img, const AugmentPolicy& policy, std::uint64_t seed,
                          std::size_t index);

/// Draws `count` i.i.d. N(mean, std^2) values.
std::vector<float> gaussian_noise(std::size_t count, const NoiseSpec& spec);
FeatureMap perturb_features(const FeatureMap& q, const NoiseSpec& spec);

/// Writes image/mask PNG pairs plus manifest.txt
/// (`image_path mask_path is_anomalous beta`, one line per sample).
void export_samples(const std::vector<AnomalySample>& samples, const std::filesystem::path& dir,
                    const std::string& prefix = "sample");

}  // namespace dfd
