#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dfd/backbone.hpp"
#include "dfd/config.hpp"
#include "dfd/discriminators.hpp"
#include "dfd/image.hpp"
#include "dfd/losses.hpp"
#include "dfd/synth.hpp"

namespace dfd {

/// Everything needed to score images: frozen backbone (rebuilt from its spec),
/// trained adaptor and both discriminators, the training grid and the config.
struct ModelBundle {
  TrainConfig config;
  Backbone backbone{BackboneSpec{}};
  FeatureAdaptor<float> adaptor;
  GaussianDiscriminator<float> gauss;
  PerlinDiscriminator<float> perlin;
  int grid_h = 0;
  int grid_w = 0;

  std::vector<ad::NamedArray> arrays() const;
  /// FNV-1a over the encoded checkpoint bytes.
  std::uint64_t parameter_hash() const;
};

BackboneSpec backbone_spec(const TrainConfig& cfg);
/// Untrained bundle: identity adaptor, freshly initialized discriminators.
ModelBundle init_model(const TrainConfig& cfg);

/// Writes `dir/model.dfdw` and `dir/config.txt`.
void save_model(const ModelBundle& model, const std::filesystem::path& dir);
ModelBundle load_model(const std::filesystem::path& dir);

AugmentPolicy augment_policy(const TrainConfig& cfg);
/// Seed of the augmented set drawn from shot `shot`.
std::uint64_t augment_seed(const TrainConfig& cfg, std::size_t shot);

struct TrainOptions {
  /// When set, one CSV row per optimizer step (`step,sim,gau,pix,cls,per,total`).
  std::filesystem::path loss_csv;
};

struct TrainResult {
  ModelBundle model;
  std::vector<LossBundle> history;  ///< one entry per step
  int steps_per_epoch = 0;
};

/// Few-shot training. Throws ArgumentError on an empty shot list and
/// NumericError (naming the step) on a non-finite loss.
TrainResult train(const std::vector<Image>& shots, const TrainConfig& cfg, const TrainOptions& opts = {});

struct ScoreResult {
  Image map;          ///< S, 1 channel, at model resolution, in [0,1]
  double image_score = 0.0;  ///< S_A = max(S)
  Image gaussian;     ///< scaled S'_Gau on the feature grid (empty when disabled)
  Image perlin;       ///< scaled S'_Per on the feature grid (empty when disabled)
};

/// Min-max scaling to [0,1]; a range below 1e-12 yields all zeros.
std::vector<float> minmax_scale(const std::vector<float>& raw);

/// Negated discriminator outputs summed over bands, on the feature grid.
/// A map is empty when its discriminator is disabled.
struct RawScores {
  std::vector<float> gaussian;
  std::vector<float> perlin;
};

/// Resizes to the model resolution, extracts, adapts and evaluates the
/// enabled discriminators.
RawScores raw_scores(const Image& img, const ModelBundle& model);

/// Min-max scales each discriminator map, averages the enabled ones and
/// upsamples to the model resolution. With score_norm = "image" the bounds
/// come from each map alone; with "set" they are shared by every map in
/// `raw`, so scores stay comparable across images. A single image gives the
/// same result under both.
std::vector<ScoreResult> fuse_scores(const std::vector<RawScores>& raw, const ModelBundle& model);

/// raw_scores over a batch followed by fuse_scores.
std::vector<ScoreResult> score_images(const std::vector<Image>& imgs, const ModelBundle& model);

/// Scores one image on its own (identical under both normalizations).
ScoreResult score_image(const Image& img, const ModelBundle& model);

/// DFDS: magic "DFDS", u32 h, u32 w, row-major little-endian f32.
void write_score_map(const Image& map, const std::filesystem::path& path);
Image read_score_map(const std::filesystem::path& path);
/// Jet-style heat map alpha-blended over `img` (both resized to the map size).
Image heat_overlay(const Image& img, const Image& map, double alpha = 0.5);

/// Structured report: header, `key = value` config snapshot, metrics, hash.
struct RunReport {
  std::string command;
  TrainConfig config;
  std::map<std::string, double> metrics;
  std::string checkpoint_hash;  ///< hex FNV-1a of the DFDW bytes
  std::string timestamp;        ///< omitted when empty
};

std::string hex64(std::uint64_t v);
std::string file_hash(const std::filesystem::path& path);
std::string format_report(const RunReport& report);
RunReport parse_report(const std::string& text);
void run_manifest(const RunReport& report, const std::filesystem::path& path);
/// True when the checkpoint's hash equals the one recorded in the report.
bool verify_checkpoint(const std::filesystem::path& report, const std::filesystem::path& checkpoint);

inline constexpr const char* kScorePolarity = "negated";
inline constexpr const char* kVersion = "0.1.0";

}  // namespace dfd
