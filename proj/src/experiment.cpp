#include "dfd/experiment.hpp"

#include <chrono>

#include "dfd/error.hpp"
#include "dfd/parallel.hpp"

namespace dfd {

std::vector<Image> load_shots(const CategoryLayout& layout, int shots) {
  if (shots < 1) throw ArgumentError("load_shots: shots must be positive");
  if (layout.train_good.size() < static_cast<std::size_t>(shots)) {
    throw ArgumentError("load_shots: category '" + layout.name + "' has " + std::to_string(layout.train_good.size()) +
                        " training images, " + std::to_string(shots) + " requested");
  }
  std::vector<Image> out;
  for (int i = 0; i < shots; ++i) out.push_back(load_image(layout.train_good[static_cast<std::size_t>(i)]));
  return out;
}

LabeledScores score_category(const CategoryLayout& layout, const ModelBundle& model) {
  std::vector<Image> images(layout.test.size());
  parallel_for(images.size(), [&](std::size_t i) { images[i] = load_image(layout.test[i].image); });
  auto results = score_images(images, model);
  LabeledScores out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& rec = layout.test[i];
    auto& res = results[i];
    out.image_scores.push_back(res.image_score);
    out.labels.push_back(rec.label);
    out.masks.push_back(rec.mask ? resize_mask(load_mask(*rec.mask), res.map.height, res.map.width)
                                 : Mask(res.map.height, res.map.width));
    out.maps.push_back(std::move(res.map));
  }
  return out;
}

CategoryRun run_category(const CategoryLayout& layout, const TrainConfig& cfg) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  const auto trained = train(load_shots(layout, cfg.shots), cfg);
  const auto t1 = Clock::now();
  CategoryRun run;
  run.row = evaluate(score_category(layout, trained.model), layout.name, cfg.shots, cfg.seed);
  run.train_seconds = std::chrono::duration<double>(t1 - t0).count();
  run.total_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return run;
}

void AblationRow::apply(TrainConfig& cfg) const {
  cfg.gaussian_disc = gaussian_disc;
  cfg.perlin_disc = perlin_disc;
  cfg.rotate = rotate;
  cfg.mfic = mfic;
  cfg.sim_loss = sim_loss;
}

const std::vector<AblationRow>& ablation_rows() {
  static const std::vector<AblationRow> rows{
      {"gaussian", true, false, false, false, false},
      {"gaussian+perlin", true, true, false, false, false},
      {"gaussian+perlin+da", true, true, true, false, false},
      {"gaussian+perlin+da+mfic", true, true, true, true, false},
      {"gaussian+perlin+da+sim", true, true, true, false, true},
      {"full-without-perlin", true, false, true, true, true},
      {"full-without-gaussian", false, true, true, true, true},
      {"full", true, true, true, true, true},
  };
  return rows;
}

}  // namespace dfd
