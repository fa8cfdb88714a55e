#pragma once

#include <string>
#include <vector>

#include "dfd/config.hpp"
#include "dfd/eval.hpp"
#include "dfd/pipeline.hpp"

namespace dfd {

/// The first `shots` training images of a category (ArgumentError if fewer).
std::vector<Image> load_shots(const CategoryLayout& layout, int shots);

/// Scores the whole test split as one set. Good images without a mask get an
/// all-zero mask at the score-map size.
LabeledScores score_category(const CategoryLayout& layout, const ModelBundle& model);

struct CategoryRun {
  MetricRow row;
  double train_seconds = 0.0;
  double total_seconds = 0.0;
};

/// train on load_shots, then score_category and evaluate.
CategoryRun run_category(const CategoryLayout& layout, const TrainConfig& cfg);

/// One row of the component ablation table.
struct AblationRow {
  std::string name;
  bool gaussian_disc = true;
  bool perlin_disc = true;
  bool rotate = true;  ///< rotation data augmentation
  bool mfic = true;
  bool sim_loss = true;

  void apply(TrainConfig& cfg) const;
};

/// Eight rows, from the Gaussian-only baseline to the full model (last).
const std::vector<AblationRow>& ablation_rows();

}  // namespace dfd
