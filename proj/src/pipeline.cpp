#include "dfd/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "dfd/error.hpp"
#include "dfd/frequency.hpp"
#include "dfd/parallel.hpp"
#include "dfd/rng.hpp"
#include "dfd/synth.hpp"

namespace dfd {

namespace {

constexpr const char* kModelFile = "model.dfdw";
constexpr const char* kConfigFile = "config.txt";

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

PerlinDiscriminatorShape perlin_shape(const TrainConfig& cfg, int channels, int grid) {
  PerlinDiscriminatorShape s;
  s.channels = channels;
  s.width = cfg.perlin_width;
  s.heads = cfg.perlin_heads;
  s.mlp_ratio = cfg.perlin_mlp_ratio;
  s.grid_h = grid;
  s.grid_w = grid;
  return s;
}

template <typename T>
std::vector<const ad::Parameter<T>*> as_const(const std::vector<ad::Parameter<T>*>& ps) {
  return {ps.begin(), ps.end()};
}

/// Backbone features of one band set (one entry without the frequency split).
std::vector<FeatureMap> band_features(const Image& img, const Backbone& backbone, bool mfic) {
  const Image standardized = standardize(img);
  if (!mfic) return {backbone.extract(standardized)};
  const FeaturePair pair = extract_pair(standardized, backbone);
  return {pair.low, pair.high};
}

struct SampleFeatures {
  std::vector<FeatureMap> anomalous;  ///< per band
  std::vector<FeatureMap> normal;     ///< per band
  Mask pooled;
  bool is_anomalous = false;
};

ad::Tensor<float> mask_tensor(const std::vector<const SampleFeatures*>& batch) {
  std::vector<float> v;
  for (const auto* s : batch) {
    for (auto m : s->pooled.data) v.push_back(static_cast<float>(m));
  }
  return ad::Tensor<float>::constant({batch.size(), batch.front()->pooled.data.size()}, std::move(v));
}

bool all_finite(const LossBundle& b) {
  return std::isfinite(b.sim) && std::isfinite(b.gau) && std::isfinite(b.pix) && std::isfinite(b.cls) &&
         std::isfinite(b.per) && std::isfinite(b.total);
}

}  // namespace

std::vector<ad::NamedArray> ModelBundle::arrays() const {
  std::vector<const ad::Parameter<float>*> params{&adaptor.weight};
  if (adaptor.bias) params.push_back(&*adaptor.bias);
  auto out = to_arrays<float>(params);
  for (auto& a : to_arrays<float>(gauss.parameters())) out.push_back(std::move(a));
  for (auto& a : to_arrays<float>(perlin.parameters())) out.push_back(std::move(a));
  out.push_back({"meta.grid", {2}, {static_cast<float>(grid_h), static_cast<float>(grid_w)}});
  return out;
}

std::uint64_t ModelBundle::parameter_hash() const { return fnv1a64(ad::encode_checkpoint(arrays())); }

BackboneSpec backbone_spec(const TrainConfig& cfg) {
  BackboneSpec spec;
  spec.kind = cfg.backbone;
  spec.seed = cfg.backbone_seed;
  spec.aggregation = cfg.aggregation;
  spec.weights = cfg.backbone_weights;
  return spec;
}

ModelBundle init_model(const TrainConfig& cfg) {
  cfg.validate();
  ModelBundle m{cfg, Backbone(backbone_spec(cfg)), {}, {}, {}, 0, 0};
  const int grid = m.backbone.grid_size(cfg.resolution);
  const int c = m.backbone.channels();
  m.grid_h = grid;
  m.grid_w = grid;
  m.adaptor = FeatureAdaptor<float>::identity(c);
  m.gauss = GaussianDiscriminator<float>::create(c, derive_seed(cfg.seed, "gauss"));
  m.perlin = PerlinDiscriminator<float>::create(perlin_shape(cfg, c, grid), derive_seed(cfg.seed, "perlin"));
  return m;
}

void save_model(const ModelBundle& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ad::write_checkpoint(dir / kModelFile, model.arrays());
  write_file(dir / kConfigFile, to_text(model.config));
}

ModelBundle load_model(const std::filesystem::path& dir) {
  ModelBundle m = init_model(load_config(dir / kConfigFile));
  const auto arrays = ad::read_checkpoint(dir / kModelFile);
  load_arrays<float>(m.adaptor.parameters(), arrays);
  load_arrays<float>(m.gauss.parameters(), arrays);
  load_arrays<float>(m.perlin.parameters(), arrays);
  const auto grid = std::find_if(arrays.begin(), arrays.end(), [](const auto& a) { return a.name == "meta.grid"; });
  if (grid == arrays.end() || grid->values.size() != 2) throw ConfigError("checkpoint lacks meta.grid");
  if (static_cast<int>(grid->values[0]) != m.grid_h || static_cast<int>(grid->values[1]) != m.grid_w) {
    throw ConfigError("checkpoint grid does not match the configured resolution");
  }
  return m;
}

AugmentPolicy augment_policy(const TrainConfig& cfg) {
  AugmentPolicy policy;
  policy.count = cfg.n_aug;
  policy.anomaly_prob = cfg.anomaly_prob;
  policy.rotate = cfg.rotate;
  policy.max_rotation_deg = cfg.max_rotation;
  policy.perlin_threshold = cfg.perlin_threshold;
  policy.beta_min = cfg.beta_min;
  policy.beta_max = cfg.beta_max;
  policy.texture_mode = cfg.texture_mode;
  policy.texture_dir = cfg.texture_dir;
  return policy;
}

std::uint64_t augment_seed(const TrainConfig& cfg, std::size_t shot) {
  return derive_seed(derive_seed(cfg.seed, "augment"), shot);
}

TrainResult train(const std::vector<Image>& shots, const TrainConfig& cfg, const TrainOptions& opts) {
  if (shots.empty()) throw ArgumentError("train: no shot images");
  if (shots.size() > 16) throw ArgumentError("train: at most 16 shot images");
  TrainResult result{init_model(cfg), {}, 0};
  ModelBundle& model = result.model;
  const int bands = cfg.mfic ? 2 : 1;
  const auto kind = parse_loss_kind(cfg.loss_kind);
  const float theta = static_cast<float>(cfg.theta);

  std::ofstream csv;
  if (!opts.loss_csv.empty()) {
    if (opts.loss_csv.has_parent_path()) std::filesystem::create_directories(opts.loss_csv.parent_path());
    csv.open(opts.loss_csv);
    if (!csv) throw IoError("cannot write " + opts.loss_csv.string());
    csv << "step,sim,gau,pix,cls,per,total\n";
  }
  if (cfg.epochs == 0) return result;

  const AugmentPolicy policy = augment_policy(cfg);

  // The augmented set is fixed for the whole run, so features are computed once.
  std::vector<AnomalySample> samples;
  for (std::size_t s = 0; s < shots.size(); ++s) {
    const Image shot = resize(shots[s], cfg.resolution, cfg.resolution);
    for (auto& a : augment(shot, policy, augment_seed(cfg, s))) samples.push_back(std::move(a));
  }
  std::vector<SampleFeatures> feats(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    const auto& s = samples[i];
    auto& f = feats[i];
    f.anomalous = band_features(s.image, model.backbone, cfg.mfic);
    f.normal = s.is_anomalous ? band_features(s.normal, model.backbone, cfg.mfic) : f.anomalous;
    f.pooled = pool_mask(s.mask, model.grid_h, model.grid_w);
    f.is_anomalous = s.is_anomalous;
  });
  samples.clear();

  const ad::AdamOptions adam_adaptor{cfg.lr_adaptor};
  const ad::AdamOptions adam_gauss{cfg.lr_gauss};
  const ad::AdamOptions adam_perlin{cfg.lr_perlin};
  const auto shuffle_root = derive_seed(cfg.seed, "shuffle");
  const auto noise_root = derive_seed(cfg.seed, "noise");
  const std::size_t batch = static_cast<std::size_t>(cfg.batch);
  result.steps_per_epoch = static_cast<int>((feats.size() + batch - 1) / batch);

  std::vector<std::size_t> order(feats.size());
  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = make_rng(derive_seed(shuffle_root, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

    for (std::size_t start = 0; start < order.size(); start += batch, ++step) {
      std::vector<const SampleFeatures*> members;
      for (std::size_t k = start; k < std::min(start + batch, order.size()); ++k) members.push_back(&feats[order[k]]);
      const std::size_t b = members.size();
      TotalLoss<float> loss;
      try {
        const auto mask = mask_tensor(members);
        std::vector<float> tau_v(b);
        for (std::size_t k = 0; k < b; ++k) tau_v[k] = members[k]->pooled.empty_set() ? 0.0f : 1.0f;
        const auto tau = ad::Tensor<float>::constant({b}, std::move(tau_v));

        std::vector<ad::Tensor<float>> qa, qn, sn, snoise, sa;
        for (int band = 0; band < bands; ++band) {
          std::vector<const FeatureMap*> pa, pn;
          for (const auto* m : members) {
            pa.push_back(&m->anomalous[band]);
            pn.push_back(&m->normal[band]);
          }
          qa.push_back(model.adaptor(to_tensor<float>(pa)));
          qn.push_back(model.adaptor(to_tensor<float>(pn)));
          if (cfg.gaussian_disc) {
            NoiseSpec ns{cfg.noise_mean, cfg.noise_std,
                         derive_seed(noise_root, static_cast<std::uint64_t>(step * bands + band))};
            const auto noise = ad::Tensor<float>::constant(qn.back().shape(), gaussian_noise(qn.back().numel(), ns));
            sn.push_back(model.gauss(qn.back()));
            snoise.push_back(model.gauss(ad::add(qn.back(), noise)));
          }
          if (cfg.perlin_disc) sa.push_back(model.perlin(qa.back()));
        }
        ad::Tensor<float> gau, pix, cls, sim;
        if (cfg.gaussian_disc) gau = gaussian_loss<float>(sn, snoise, theta, kind);
        if (cfg.perlin_disc) {
          pix = pixel_loss<float>(sa, mask, theta, cfg.literal_pixel_loss, kind);
          cls = cls_loss<float>(sa, tau);
        }
        if (cfg.sim_loss) sim = similarity_loss<float>(qa, qn, mask, static_cast<float>(cfg.sim_sign));
        loss = total_loss<float>(gau, pix, cls, sim, static_cast<float>(cfg.lambda_per),
                                 static_cast<float>(cfg.lambda_sim));
      } catch (const NumericError& e) {
        throw NumericError("step " + std::to_string(step) + ": " + e.what());
      }
      if (!all_finite(loss.values)) throw NumericError("non-finite loss at step " + std::to_string(step));

      ad::backward(loss.total);
      if (model.adaptor.weight.value.has_grad()) {
        ad::adam_step<float>(model.adaptor.parameters(), adam_adaptor);
      }
      if (cfg.gaussian_disc) ad::adam_step<float>(model.gauss.parameters(), adam_gauss);
      if (cfg.perlin_disc) ad::adam_step<float>(model.perlin.parameters(), adam_perlin);

      result.history.push_back(loss.values);
      if (csv) {
        const auto& v = loss.values;
        char line[256];
        std::snprintf(line, sizeof line, "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", static_cast<long long>(step), v.sim,
                      v.gau, v.pix, v.cls, v.per, v.total);
        csv << line;
      }
    }
  }
  return result;
}

std::vector<float> minmax_scale(const std::vector<float>& raw) {
  std::vector<float> out(raw.size(), 0.0f);
  if (raw.empty()) return out;
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double range = static_cast<double>(*hi) - static_cast<double>(*lo);
  if (!(range >= 1e-12)) return out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = static_cast<float>((static_cast<double>(raw[i]) - *lo) / range);
  }
  return out;
}

RawScores raw_scores(const Image& img, const ModelBundle& model) {
  const auto& cfg = model.config;
  const Image input = resize(img, cfg.resolution, cfg.resolution);
  const auto bands = band_features(input, model.backbone, cfg.mfic);
  if (bands.front().grid_h != model.grid_h || bands.front().grid_w != model.grid_w) {
    throw ConfigError("score_image: feature grid does not match the trained grid");
  }
  const std::size_t positions = bands.front().positions();
  RawScores out;
  if (cfg.gaussian_disc) out.gaussian.assign(positions, 0.0f);
  if (cfg.perlin_disc) out.perlin.assign(positions, 0.0f);
  for (const auto& band : bands) {
    const auto q = model.adaptor(to_tensor<float>({&band}));
    if (cfg.gaussian_disc) {
      const auto s = model.gauss(q);
      for (std::size_t i = 0; i < positions; ++i) out.gaussian[i] -= s.data()[i];
    }
    if (cfg.perlin_disc) {
      const auto s = model.perlin(q);
      for (std::size_t i = 0; i < positions; ++i) out.perlin[i] -= s.data()[i];
    }
  }
  return out;
}

namespace {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

Range range_of(const std::vector<const std::vector<float>*>& maps) {
  Range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto* m : maps) {
    for (float v : *m) {
      r.lo = std::min(r.lo, static_cast<double>(v));
      r.hi = std::max(r.hi, static_cast<double>(v));
    }
  }
  return r;
}

std::vector<float> scale_with(const std::vector<float>& raw, Range r) {
  std::vector<float> out(raw.size(), 0.0f);
  const double range = r.hi - r.lo;
  if (!(range >= 1e-12)) return out;
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = static_cast<float>((raw[i] - r.lo) / range);
  return out;
}

}  // namespace

std::vector<ScoreResult> fuse_scores(const std::vector<RawScores>& raw, const ModelBundle& model) {
  const auto& cfg = model.config;
  const bool per_image = cfg.score_norm == "image";
  auto band_range = [&](std::size_t k, bool gaussian) {
    std::vector<const std::vector<float>*> maps;
    if (per_image) {
      maps.push_back(gaussian ? &raw[k].gaussian : &raw[k].perlin);
    } else {
      for (const auto& r : raw) maps.push_back(gaussian ? &r.gaussian : &r.perlin);
    }
    return range_of(maps);
  };
  const Range set_g = per_image || !cfg.gaussian_disc ? Range{} : band_range(0, true);
  const Range set_p = per_image || !cfg.perlin_disc ? Range{} : band_range(0, false);

  std::vector<ScoreResult> results;
  results.reserve(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    const std::size_t positions = static_cast<std::size_t>(model.grid_h) * model.grid_w;
    ScoreResult out;
    std::vector<float> combined(positions, 0.0f);
    int enabled = 0;
    auto accumulate = [&](const std::vector<float>& values, Range r, Image& slot) {
      if (values.size() != positions) throw ArgumentError("fuse_scores: raw map does not match the model grid");
      slot = Image(model.grid_h, model.grid_w, 1);
      slot.data = scale_with(values, r);
      for (std::size_t i = 0; i < positions; ++i) combined[i] += slot.data[i];
      ++enabled;
    };
    if (cfg.gaussian_disc) accumulate(raw[k].gaussian, per_image ? band_range(k, true) : set_g, out.gaussian);
    if (cfg.perlin_disc) accumulate(raw[k].perlin, per_image ? band_range(k, false) : set_p, out.perlin);
    for (auto& v : combined) v /= static_cast<float>(enabled);
    Image grid(model.grid_h, model.grid_w, 1);
    grid.data = std::move(combined);
    out.map = resize(grid, cfg.resolution, cfg.resolution);
    out.image_score = *std::max_element(out.map.data.begin(), out.map.data.end());
    results.push_back(std::move(out));
  }
  return results;
}

std::vector<ScoreResult> score_images(const std::vector<Image>& imgs, const ModelBundle& model) {
  std::vector<RawScores> raw(imgs.size());
  parallel_for(imgs.size(), [&](std::size_t i) { raw[i] = raw_scores(imgs[i], model); });
  return fuse_scores(raw, model);
}

ScoreResult score_image(const Image& img, const ModelBundle& model) {
  return fuse_scores({raw_scores(img, model)}, model).front();
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const std::string& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

}  // namespace

void write_score_map(const Image& map, const std::filesystem::path& path) {
  if (map.channels != 1) throw ArgumentError("write_score_map: expected a 1-channel map");
  std::string bytes = "DFDS";
  put_u32(bytes, static_cast<std::uint32_t>(map.height));
  put_u32(bytes, static_cast<std::uint32_t>(map.width));
  for (float f : map.data) put_u32(bytes, std::bit_cast<std::uint32_t>(f));
  write_file(path, bytes);
}

Image read_score_map(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 12 || bytes.compare(0, 4, "DFDS") != 0) throw DecodeError("not a DFDS file: " + path.string());
  const auto h = get_u32(bytes, 4), w = get_u32(bytes, 8);
  const std::size_t n = static_cast<std::size_t>(h) * w;
  if (bytes.size() != 12 + 4 * n) throw DecodeError("truncated DFDS file: " + path.string());
  Image out(static_cast<int>(h), static_cast<int>(w), 1);
  for (std::size_t i = 0; i < n; ++i) out.data[i] = std::bit_cast<float>(get_u32(bytes, 12 + 4 * i));
  return out;
}

Image heat_overlay(const Image& img, const Image& map, double alpha) {
  const Image base = resize(img, map.height, map.width);
  Image out(map.height, map.width, 3);
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const double v = std::clamp(static_cast<double>(map.at(y, x)), 0.0, 1.0);
      const double heat[3] = {std::clamp(1.5 - std::abs(4 * v - 3), 0.0, 1.0),
                              std::clamp(1.5 - std::abs(4 * v - 2), 0.0, 1.0),
                              std::clamp(1.5 - std::abs(4 * v - 1), 0.0, 1.0)};
      for (int c = 0; c < 3; ++c) {
        const double g = base.channels == 1 ? base.at(y, x) : base.at(y, x, c);
        out.at(y, x, c) = static_cast<float>((1 - alpha) * g + alpha * heat[c]);
      }
    }
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_hash(const std::filesystem::path& path) { return hex64(fnv1a64(read_file(path))); }

std::string format_report(const RunReport& r) {
  std::string out = "# dfd run report\n";
  out += "version = " + std::string(kVersion) + "\n";
  out += "command = " + r.command + "\n";
  out += "seed = " + std::to_string(r.config.seed) + "\n";
  out += "score_polarity = " + std::string(kScorePolarity) + "\n";
  if (!r.timestamp.empty()) out += "timestamp = " + r.timestamp + "\n";
  out += "[config]\n" + to_text(r.config);
  out += "[metrics]\n";
  for (const auto& [k, v] : r.metrics) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += k + " = " + buf + "\n";
  }
  out += "[checkpoint]\nhash = " + r.checkpoint_hash + "\n";
  return out;
}

RunReport parse_report(const std::string& text) {
  RunReport r;
  std::istringstream in(text);
  std::string line, section, config_text;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    if (section == "config") {
      config_text += line + "\n";
      continue;
    }
    const auto kv = parse_key_values(line);
    if (kv.empty()) continue;
    const auto& [k, v] = *kv.begin();
    if (section.empty()) {
      if (k == "command") r.command = v;
      if (k == "timestamp") r.timestamp = v;
    } else if (section == "metrics") {
      r.metrics[k] = std::strtod(v.c_str(), nullptr);
    } else if (section == "checkpoint" && k == "hash") {
      r.checkpoint_hash = v;
    }
  }
  r.config = parse_config(config_text);
  return r;
}

void run_manifest(const RunReport& report, const std::filesystem::path& path) {
  write_file(path, format_report(report));
}

bool verify_checkpoint(const std::filesystem::path& report, const std::filesystem::path& checkpoint) {
  const RunReport r = parse_report(read_file(report));
  return !r.checkpoint_hash.empty() && r.checkpoint_hash == file_hash(checkpoint);
}

}  // namespace dfd
