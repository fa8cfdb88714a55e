#include "dfd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "dfd/error.hpp"

namespace dfd {

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ArgumentError("auroc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw ArgumentError("auroc: labels must be 0 or 1");
    n_pos += static_cast<std::size_t>(l);
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw MetricError("auroc undefined: only one class present");
  for (double s : scores) {
    if (!std::isfinite(s)) throw MetricError("auroc: non-finite score");
  }

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of 1-based midranks of the positives.
  long double rank_sum = 0.0L;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    std::size_t pos_in_run = 0;
    while (j < n && scores[idx[j]] == scores[idx[i]]) pos_in_run += static_cast<std::size_t>(labels[idx[j++]]);
    const long double midrank = (static_cast<long double>(i + 1) + static_cast<long double>(j)) / 2.0L;
    rank_sum += midrank * static_cast<long double>(pos_in_run);
    i = j;
  }
  const long double np = static_cast<long double>(n_pos);
  const long double u = rank_sum - np * (np + 1.0L) / 2.0L;
  return static_cast<double>(u / (np * static_cast<long double>(n_neg)));
}

namespace {

void check_pairs(const std::vector<Image>& maps, const std::vector<Mask>& gts, const char* what) {
  if (maps.size() != gts.size() || maps.empty()) {
    throw ArgumentError(std::string(what) + ": need equally many (>0) maps and masks");
  }
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (maps[i].channels != 1 || maps[i].height != gts[i].height || maps[i].width != gts[i].width) {
      throw ArgumentError(std::string(what) + ": map " + std::to_string(i) + " does not match its mask");
    }
  }
}

}  // namespace

double pixel_auroc(const std::vector<Image>& maps, const std::vector<Mask>& gts) {
  check_pairs(maps, gts, "pixel_auroc");
  std::vector<double> s;
  std::vector<int> l;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    for (std::size_t p = 0; p < maps[i].data.size(); ++p) {
      s.push_back(maps[i].data[p]);
      l.push_back(gts[i].data[p] ? 1 : 0);
    }
  }
  return auroc(s, l);
}

int connected_components(const Mask& m, std::vector<int>& labels) {
  labels.assign(m.data.size(), 0);
  int next = 0;
  std::vector<int> stack;
  for (int y0 = 0; y0 < m.height; ++y0) {
    for (int x0 = 0; x0 < m.width; ++x0) {
      const int start = y0 * m.width + x0;
      if (!m.data[start] || labels[start]) continue;
      labels[start] = ++next;
      stack.push_back(start);
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        const int cy = cur / m.width, cx = cur % m.width;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int y = cy + dy, x = cx + dx;
            if (y < 0 || y >= m.height || x < 0 || x >= m.width) continue;
            const int k = y * m.width + x;
            if (m.data[k] && !labels[k]) {
              labels[k] = next;
              stack.push_back(k);
            }
          }
        }
      }
    }
  }
  return next;
}

std::vector<ProPoint> pro_curve(const std::vector<Image>& maps, const std::vector<Mask>& gts, int thresholds) {
  check_pairs(maps, gts, "pro");
  if (thresholds < 2) throw ArgumentError("pro: need at least 2 thresholds");
  struct Region {
    std::size_t image;
    std::vector<std::size_t> pixels;
  };
  std::vector<Region> regions;
  std::size_t normal_pixels = 0;
  float lo = maps[0].data[0], hi = lo;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    std::vector<int> labels;
    const int n = connected_components(gts[i], labels);
    const std::size_t first = regions.size();
    for (int r = 0; r < n; ++r) regions.push_back({i, {}});
    for (std::size_t p = 0; p < labels.size(); ++p) {
      if (labels[p]) {
        regions[first + labels[p] - 1].pixels.push_back(p);
      } else {
        ++normal_pixels;
      }
    }
    for (float v : maps[i].data) {
      if (!std::isfinite(v)) throw MetricError("pro: non-finite score");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (regions.empty()) throw MetricError("pro undefined: no anomalous regions");
  if (normal_pixels == 0) throw MetricError("pro undefined: no normal pixels");

  std::vector<ProPoint> curve{{0.0, 0.0}};
  for (int k = 0; k < thresholds; ++k) {
    // Compared at the maps' own precision so a score equal to a threshold is never above it.
    const float t = static_cast<float>(lo + (static_cast<double>(hi) - lo) * k / (thresholds - 1));
    std::size_t false_pos = 0;
    for (std::size_t i = 0; i < maps.size(); ++i) {
      for (std::size_t p = 0; p < maps[i].data.size(); ++p) {
        if (!gts[i].data[p] && maps[i].data[p] > t) ++false_pos;
      }
    }
    double overlap = 0.0;
    for (const auto& r : regions) {
      std::size_t hit = 0;
      for (auto p : r.pixels) hit += maps[r.image].data[p] > t ? 1 : 0;
      overlap += static_cast<double>(hit) / static_cast<double>(r.pixels.size());
    }
    curve.push_back({static_cast<double>(false_pos) / static_cast<double>(normal_pixels),
                     overlap / static_cast<double>(regions.size())});
  }
  return curve;
}

double pro_area(std::vector<ProPoint> curve, double fpr_limit) {
  if (!(fpr_limit > 0.0)) throw ArgumentError("pro: fpr_limit must be positive");
  if (curve.empty()) return 0.0;
  std::sort(curve.begin(), curve.end(), [](const ProPoint& a, const ProPoint& b) {
    return a.fpr < b.fpr || (a.fpr == b.fpr && a.overlap < b.overlap);
  });
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const auto& a = curve[i - 1];
    const auto& b = curve[i];
    if (a.fpr >= fpr_limit) break;
    if (b.fpr > fpr_limit) {
      const double w = (fpr_limit - a.fpr) / (b.fpr - a.fpr);
      const double y = a.overlap + w * (b.overlap - a.overlap);
      area += (fpr_limit - a.fpr) * (a.overlap + y) / 2.0;
      return area / fpr_limit;
    }
    area += (b.fpr - a.fpr) * (a.overlap + b.overlap) / 2.0;
  }
  const auto& last = curve.back();
  if (last.fpr < fpr_limit) area += (fpr_limit - last.fpr) * last.overlap;
  return area / fpr_limit;
}

double pro(const std::vector<Image>& maps, const std::vector<Mask>& gts, const ProOptions& opts) {
  return pro_area(pro_curve(maps, gts, opts.thresholds), opts.fpr_limit);
}

MetricRow evaluate(const LabeledScores& s, const std::string& category, int shots, std::uint64_t seed,
                   const ProOptions& opts) {
  MetricRow row;
  row.category = category;
  row.shots = shots;
  row.seed = seed;
  row.auroc_i = auroc(s.image_scores, s.labels);
  row.auroc_p = pixel_auroc(s.maps, s.masks);
  row.pro = pro(s.maps, s.masks, opts);
  return row;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string metrics_report(const std::vector<MetricRow>& rows) {
  std::string out;
  double sum_i = 0, sum_p = 0, sum_pro = 0;
  for (const auto& r : rows) {
    const std::string prefix = r.category + ".";
    out += prefix + "auroc_i = " + fmt(r.auroc_i) + "\n";
    out += prefix + "auroc_p = " + fmt(r.auroc_p) + "\n";
    out += prefix + "pro = " + fmt(r.pro) + "\n";
    sum_i += r.auroc_i;
    sum_p += r.auroc_p;
    sum_pro += r.pro;
  }
  if (!rows.empty()) {
    const double n = static_cast<double>(rows.size());
    out += "mean.auroc_i = " + fmt(sum_i / n) + "\n";
    out += "mean.auroc_p = " + fmt(sum_p / n) + "\n";
    out += "mean.pro = " + fmt(sum_pro / n) + "\n";
  }
  return out;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = "category,shots,seed,auroc_i,auroc_p,pro\n";
  for (const auto& r : rows) {
    out += r.category + "," + std::to_string(r.shots) + "," + std::to_string(r.seed) + "," + fmt(r.auroc_i) + "," +
           fmt(r.auroc_p) + "," + fmt(r.pro) + "\n";
  }
  return out;
}

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm";
}

std::vector<fs::path> sorted_images(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<fs::path> sorted_dirs(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

CategoryLayout ingest_category(const fs::path& root) {
  CategoryLayout c;
  c.root = root;
  c.name = root.filename().string();
  if (c.name.empty()) c.name = root.parent_path().filename().string();
  const fs::path train = root / "train" / "good";
  const fs::path test = root / "test";
  const fs::path gt = root / "ground_truth";
  if (!fs::is_directory(train)) throw LayoutError("missing " + train.string());
  if (!fs::is_directory(test)) throw LayoutError("missing " + test.string());
  c.train_good = sorted_images(train);
  for (const auto& defect_dir : sorted_dirs(test)) {
    const std::string defect = defect_dir.filename().string();
    const bool good = defect == "good";
    if (!good && !fs::is_directory(gt / defect)) {
      throw LayoutError("missing ground truth directory " + (gt / defect).string());
    }
    for (const auto& img : sorted_images(defect_dir)) {
      TestRecord r{img, defect, good ? 0 : 1, std::nullopt};
      if (!good) {
        const fs::path named = gt / defect / (img.stem().string() + "_mask.png");
        const fs::path same = gt / defect / img.filename();
        if (fs::exists(named)) {
          r.mask = named;
        } else if (fs::exists(same)) {
          r.mask = same;
        } else {
          throw LayoutError("no ground truth mask for " + img.string());
        }
      }
      c.test.push_back(std::move(r));
    }
  }
  if (c.test.empty()) throw LayoutError("empty test directory " + test.string());
  return c;
}

std::vector<CategoryLayout> ingest_mvtec_layout(const fs::path& root) {
  if (!fs::is_directory(root)) throw LayoutError("not a directory: " + root.string());
  if (fs::is_directory(root / "test")) return {ingest_category(root)};
  std::vector<CategoryLayout> out;
  for (const auto& dir : sorted_dirs(root)) {
    if (fs::is_directory(dir / "test")) out.push_back(ingest_category(dir));
  }
  if (out.empty()) throw LayoutError("no categories under " + root.string());
  return out;
}

}  // namespace dfd
