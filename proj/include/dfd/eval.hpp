#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfd/image.hpp"

namespace dfd {

/// Mann-Whitney AUROC with midranks for ties. Labels are 0/1; both classes
/// must be present (MetricError otherwise).
double auroc(std::span<const double> scores, std::span<const int> labels);

/// AUROC over the pooled pixels of all maps (1-channel, same dims as the masks).
double pixel_auroc(const std::vector<Image>& maps, const std::vector<Mask>& gts);

/// Labels 8-connected components 1..n (0 = background); returns n.
int connected_components(const Mask& m, std::vector<int>& labels);

struct ProOptions {
  double fpr_limit = 0.3;
  int thresholds = 200;
};

/// One point of the per-region-overlap curve.
struct ProPoint {
  double fpr = 0.0;
  double overlap = 0.0;
};

/// Curve for predictions `map > t` at `thresholds` evenly spaced t over
/// [min, max] of all scores, preceded by the origin and sorted by FPR.
std::vector<ProPoint> pro_curve(const std::vector<Image>& maps, const std::vector<Mask>& gts, int thresholds);
/// Trapezoid area under `curve` up to `fpr_limit` (linear interpolation at the
/// limit, last point held when the curve stops short), divided by the limit.
double pro_area(std::vector<ProPoint> curve, double fpr_limit);
/// MetricError when the masks contain no anomalous region.
double pro(const std::vector<Image>& maps, const std::vector<Mask>& gts, const ProOptions& opts = {});

struct TestRecord {
  std::filesystem::path image;
  std::string defect;  ///< "good" for normal images
  int label = 0;
  std::optional<std::filesystem::path> mask;
};

struct CategoryLayout {
  std::string name;
  std::filesystem::path root;
  std::vector<std::filesystem::path> train_good;
  std::vector<TestRecord> test;
};

/// `<root>/train/good`, `<root>/test/<defect|good>`, `<root>/ground_truth/<defect>`.
/// Masks are matched as `<stem>_mask.png` (or the same file name).
CategoryLayout ingest_category(const std::filesystem::path& root);
/// `root` may be a single category or a directory of categories.
std::vector<CategoryLayout> ingest_mvtec_layout(const std::filesystem::path& root);

struct MetricRow {
  std::string category;
  int shots = 0;
  std::uint64_t seed = 0;
  double auroc_i = 0.0;
  double auroc_p = 0.0;
  double pro = 0.0;
};

/// Scores of one category's test set, in record order.
struct LabeledScores {
  std::vector<double> image_scores;
  std::vector<int> labels;
  std::vector<Image> maps;
  std::vector<Mask> masks;
};

/// Computes AUROC_i, AUROC_p and PRO for one category.
MetricRow evaluate(const LabeledScores& s, const std::string& category, int shots, std::uint64_t seed,
                   const ProOptions& opts = {});

/// `metric = value` lines.
std::string metrics_report(const std::vector<MetricRow>& rows);
/// `category,shots,seed,auroc_i,auroc_p,pro` with a header row.
std::string metrics_csv(const std::vector<MetricRow>& rows);

struct FixtureSpec {
  int size = 64;
  int train_good = 4;
  int test_good = 10;
  int test_defect = 10;
  std::uint64_t seed = 0;
  std::vector<std::string> categories{"weave", "granite", "tile", "disc", "carpet"};
};

/// Names accepted in FixtureSpec::categories.
const std::vector<std::string>& fixture_categories();
/// Normal image of a procedural category.
Image fixture_normal(const std::string& category, int size, std::uint64_t seed);
struct FixtureDefect {
  Image image;
  Mask mask;
  std::string kind;  ///< scratch | blob | stain
};
FixtureDefect fixture_defect(const Image& normal, std::uint64_t seed);

/// Writes the synthetic-texture dataset in the layout read by ingest_category.
void write_fixture(const std::filesystem::path& root, const FixtureSpec& spec);

}  // namespace dfd
