#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dfd/config.hpp"
#include "dfd/error.hpp"
#include "dfd/eval.hpp"
#include "dfd/experiment.hpp"
#include "dfd/frequency.hpp"
#include "dfd/grad_suite.hpp"
#include "dfd/pipeline.hpp"
#include "dfd/synth.hpp"

namespace fs = std::filesystem;
using namespace dfd;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out = "runs";
  bool timestamp = false;
};

TrainConfig resolve(const Common& c) {
  TrainConfig cfg = c.config.empty() ? TrainConfig{} : load_config(c.config);
  apply_overrides(cfg, c.overrides);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

fs::path make_run_dir(const Common& c, const std::string& verb, const TrainConfig& cfg) {
  const fs::path dir =
      fs::path(c.out) / (verb + "-" + std::to_string(cfg.seed) + "-" + hex64(config_hash(cfg)).substr(0, 8));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create run directory " + dir.string());
  return dir;
}

std::string now_utc() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

void write_report(const Common& c, const fs::path& dir, const std::string& command, const TrainConfig& cfg,
                  std::map<std::string, double> metrics, const std::string& checkpoint_hash = {}) {
  RunReport r;
  r.command = command;
  r.config = cfg;
  r.metrics = std::move(metrics);
  r.checkpoint_hash = checkpoint_hash;
  if (c.timestamp) r.timestamp = now_utc();
  write_text(dir / "report.txt", format_report(r));
}

bool is_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".png" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm";
}

// (relative path, absolute path) of every image under `input`, sorted.
std::vector<std::pair<fs::path, fs::path>> collect_images(const fs::path& input) {
  std::vector<std::pair<fs::path, fs::path>> out;
  if (fs::is_regular_file(input)) {
    out.emplace_back(input.filename(), input);
  } else if (fs::is_directory(input)) {
    for (const auto& e : fs::recursive_directory_iterator(input)) {
      if (e.is_regular_file() && is_image(e.path())) out.emplace_back(fs::relative(e.path(), input), e.path());
    }
  } else {
    throw NotFoundError("input not found: " + input.string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string flatten(const fs::path& rel) {
  std::string s = rel.parent_path().empty() ? rel.stem().string()
                                            : (rel.parent_path() / rel.stem()).generic_string();
  std::replace(s.begin(), s.end(), '/', '_');
  return s;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string keys_footer() {
  std::ostringstream os;
  os << "Config keys (key=value overrides, applied after --config; --seed wins last):\n";
  std::size_t width = 0;
  for (const auto& k : config_keys()) width = std::max(width, k.name.size() + k.default_value.size() + 3);
  for (const auto& k : config_keys()) {
    const std::string head = k.name + " = " + (k.default_value.empty() ? "\"\"" : k.default_value);
    os << "  " << head << std::string(width + 2 > head.size() ? width + 2 - head.size() : 1, ' ')
       << (k.published ? "[published default] " : "[artifact default]  ") << k.help << "\n";
  }
  os << "\nExit codes: 0 success, 2 configuration error, 3 numeric failure, 1 other errors.\n"
        "DFD_THREADS caps the worker count. Artifacts go to <out>/<verb>-<seed>-<hash>/.";
  return os.str();
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "config file of `key = value` lines");
  sub->add_option("--seed", c.seed, "root seed (overrides config and key=value)");
  sub->add_option("--out", c.out, "parent directory of run directories")->capture_default_str();
  sub->add_flag("--timestamp", c.timestamp, "record the wall-clock time in report.txt");
  sub->add_option("overrides", c.overrides, "key=value config overrides");
  sub->footer(keys_footer());
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string augment;
  int size = 64;
  int train_good = 4;
  int test_good = 10;
  int test_defect = 10;
  std::vector<std::string> categories;
};

void cmd_synth(const Common& c, const SynthArgs& a) {
  const TrainConfig cfg = resolve(c);
  const fs::path dir = make_run_dir(c, "synth", cfg);
  std::map<std::string, double> metrics;
  if (!a.augment.empty()) {
    const Image img = resize(load_image(a.augment), cfg.resolution, cfg.resolution);
    const auto samples = augment(img, augment_policy(cfg), augment_seed(cfg, 0));
    fs::remove_all(dir / "augment");
    export_samples(samples, dir / "augment");
    metrics["images"] = static_cast<double>(samples.size());
    metrics["anomalous"] = static_cast<double>(
        std::count_if(samples.begin(), samples.end(), [](const AnomalySample& s) { return s.is_anomalous; }));
  } else {
    FixtureSpec spec;
    spec.size = a.size;
    spec.train_good = a.train_good;
    spec.test_good = a.test_good;
    spec.test_defect = a.test_defect;
    spec.seed = cfg.seed;
    if (!a.categories.empty()) spec.categories = a.categories;
    const fs::path root = dir / "fixture";
    fs::remove_all(root);
    write_fixture(root, spec);
    // manifest: `image label mask` with paths relative to the fixture root.
    std::ostringstream manifest;
    std::size_t count = 0;
    for (const auto& cat : ingest_mvtec_layout(root)) {
      for (const auto& p : cat.train_good) {
        manifest << fs::relative(p, root).generic_string() << " 0 -\n";
        ++count;
      }
      for (const auto& r : cat.test) {
        manifest << fs::relative(r.image, root).generic_string() << " " << r.label << " "
                 << (r.mask ? fs::relative(*r.mask, root).generic_string() : std::string("-")) << "\n";
        ++count;
      }
    }
    write_text(root / "manifest.txt", manifest.str());
    metrics["images"] = static_cast<double>(count);
  }
  write_report(c, dir, "synth", cfg, metrics);
  std::cout << dir.string() << "\n";
}

// ---------------------------------------------------------------- analyze

void write_profile(const fs::path& path, const RadialProfile& p) {
  std::ostringstream os;
  os << "radius,energy\n";
  for (std::size_t i = 0; i < p.radius.size(); ++i) os << p.radius[i] << "," << fmt(p.energy[i]) << "\n";
  write_text(path, os.str());
}

template <typename Hist>
void write_histogram(const fs::path& path, const Hist& h) {
  std::ostringstream os;
  os << "bin,count\n";
  for (std::size_t i = 0; i < h.size(); ++i) os << i << "," << fmt(static_cast<double>(h[i])) << "\n";
  write_text(path, os.str());
}

void cmd_analyze(const Common& c, const std::vector<std::string>& inputs) {
  const TrainConfig cfg = resolve(c);
  if (inputs.empty()) throw ArgumentError("analyze: at least one --input set is required");
  const fs::path dir = make_run_dir(c, "analyze", cfg);
  std::map<std::string, double> metrics;
  std::vector<SetSpectrum> sets;
  std::vector<std::string> labels;
  std::set<std::string> used;
  for (const auto& in : inputs) {
    const auto files = collect_images(in);
    if (files.empty()) throw ArgumentError("analyze: no images under " + in);
    std::string label = fs::path(in).filename().string();
    if (label.empty() || label == ".") label = "set";
    for (int k = 2; used.count(label); ++k) label = fs::path(in).filename().string() + "_" + std::to_string(k);
    used.insert(label);
    std::vector<Image> images;
    for (const auto& [rel, abs] : files) {
      images.push_back(load_image(abs));
      write_profile(dir / label / (flatten(rel) + "_energy.csv"), radial_energy_of(images.back()));
      write_histogram(dir / label / (flatten(rel) + "_hist.csv"), gray_histogram(images.back()));
    }
    sets.push_back(analyze_set(images));
    write_profile(dir / (label + "_mean_energy.csv"), sets.back().mean_profile);
    write_histogram(dir / (label + "_mean_hist.csv"), sets.back().mean_histogram);
    metrics[label + ".high_band_energy"] = sets.back().high_band;
    metrics[label + ".images"] = static_cast<double>(sets.back().images);
    labels.push_back(label);
  }
  std::ostringstream summary;
  summary << "set,images,high_band_energy\n";
  for (std::size_t i = 0; i < sets.size(); ++i) {
    summary << labels[i] << "," << sets[i].images << "," << fmt(sets[i].high_band) << "\n";
  }
  write_text(dir / "summary.csv", summary.str());
  if (sets.size() >= 2 && sets[0].mean_profile.radius == sets[1].mean_profile.radius) {
    const double base = sets[0].high_band;
    metrics["high_band_relative_gap"] = base > 0 ? std::abs(sets[1].high_band - base) / base : 0.0;
    metrics["histogram_l1"] = histogram_l1(sets[0].mean_histogram, sets[1].mean_histogram);
  }
  write_report(c, dir, "analyze", cfg, metrics);
  for (const auto& [k, v] : metrics) std::cout << k << " = " << fmt(v) << "\n";
  std::cout << dir.string() << "\n";
}

// ---------------------------------------------------------------- train

std::vector<Image> training_images(const std::string& data, const std::vector<std::string>& images, int shots) {
  if (!data.empty()) return load_shots(ingest_category(data), shots);
  if (images.empty()) throw ArgumentError("train: give --data <category> or --images");
  std::vector<Image> out;
  for (const auto& p : images) out.push_back(load_image(p));
  return out;
}

void cmd_train(const Common& c, const std::string& data, const std::vector<std::string>& images) {
  const TrainConfig cfg = resolve(c);
  const auto shots = training_images(data, images, cfg.shots);
  const fs::path dir = make_run_dir(c, "train", cfg);
  TrainOptions opts;
  opts.loss_csv = dir / "loss.csv";
  const auto result = train(shots, cfg, opts);
  save_model(result.model, dir / "model");
  std::map<std::string, double> metrics{{"steps", static_cast<double>(result.history.size())},
                                        {"shots", static_cast<double>(shots.size())}};
  if (!result.history.empty()) {
    const auto& last = result.history.back();
    metrics["loss.total"] = last.total;
    metrics["loss.gau"] = last.gau;
    metrics["loss.per"] = last.per;
    metrics["loss.sim"] = last.sim;
  }
  write_report(c, dir, "train", cfg, metrics, file_hash(dir / "model" / "model.dfdw"));
  std::cout << dir.string() << "\n";
}

// ---------------------------------------------------------------- infer

// Loads a model and applies scoring-time overrides; only score_norm may change.
ModelBundle load_for_scoring(const Common& c, const std::string& model_dir) {
  ModelBundle model = load_model(model_dir);
  TrainConfig cfg = model.config;
  apply_overrides(cfg, c.overrides);
  if (c.seed) cfg.seed = *c.seed;
  TrainConfig cmp = cfg;
  cmp.score_norm = model.config.score_norm;
  cmp.seed = model.config.seed;
  if (!(cmp == model.config)) throw ConfigError("only score_norm and seed may be overridden for a trained model");
  cfg.validate();
  model.config = cfg;
  return model;
}

void cmd_infer(const Common& c, const std::string& model_dir, const std::vector<std::string>& inputs, double alpha) {
  if (!c.config.empty()) throw ConfigError("infer: the configuration comes from the model directory");
  const ModelBundle model = load_for_scoring(c, model_dir);
  std::vector<std::pair<fs::path, fs::path>> files;
  for (const auto& in : inputs) {
    for (auto& f : collect_images(in)) files.push_back(std::move(f));
  }
  if (files.empty()) throw ArgumentError("infer: no input images");
  const fs::path dir = make_run_dir(c, "infer", model.config);
  std::vector<Image> images;
  for (const auto& f : files) images.push_back(load_image(f.second));
  const auto results = score_images(images, model);
  std::ostringstream csv;
  csv << "image,score\n";
  double max_score = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const fs::path rel = files[i].first;
    fs::path base = dir / "maps" / rel;
    base.replace_extension();
    fs::create_directories(base.parent_path());
    write_score_map(results[i].map, base.string() + ".dfds");
    save_png(heat_overlay(images[i], results[i].map, alpha), base.string() + "_heat.png");
    csv << rel.generic_string() << "," << fmt(results[i].image_score) << "\n";
    max_score = std::max(max_score, results[i].image_score);
  }
  write_text(dir / "scores.csv", csv.str());
  write_report(c, dir, "infer", model.config,
               {{"images", static_cast<double>(results.size())}, {"max_image_score", max_score}},
               file_hash(fs::path(model_dir) / "model.dfdw"));
  std::cout << dir.string() << "\n";
}

// ---------------------------------------------------------------- eval

LabeledScores scores_from_predictions(const CategoryLayout& layout, const fs::path& pred_root) {
  LabeledScores out;
  for (const auto& rec : layout.test) {
    fs::path rel = fs::relative(rec.image, layout.root / "test");
    rel.replace_extension(".dfds");
    const Image map = read_score_map(pred_root / rel);
    out.image_scores.push_back(*std::max_element(map.data.begin(), map.data.end()));
    out.labels.push_back(rec.label);
    out.masks.push_back(rec.mask ? resize_mask(load_mask(*rec.mask), map.height, map.width)
                                 : Mask(map.height, map.width));
    out.maps.push_back(map);
  }
  return out;
}

void finish_eval(const Common& c, const fs::path& dir, const TrainConfig& cfg, const std::vector<MetricRow>& rows,
                 const std::string& checkpoint = {}) {
  write_text(dir / "metrics.csv", metrics_csv(rows));
  const std::string text = metrics_report(rows);
  write_text(dir / "metrics.txt", text);
  std::map<std::string, double> metrics;
  for (const auto& [k, v] : parse_key_values(text)) metrics[k] = std::stod(v);
  write_report(c, dir, "eval", cfg, metrics, checkpoint);
  std::cout << text << dir.string() << "\n";
}

void cmd_eval(const Common& c, const std::string& data, const std::string& model_dir, const std::string& predictions) {
  if (data.empty()) throw ArgumentError("eval: --data is required");
  const auto layouts = ingest_mvtec_layout(data);
  std::vector<MetricRow> rows;
  if (!predictions.empty() || !model_dir.empty()) {
    if (layouts.size() != 1) throw ArgumentError("eval: --model/--predictions need a single category");
    if (!predictions.empty()) {
      const TrainConfig cfg = resolve(c);
      const fs::path dir = make_run_dir(c, "eval", cfg);
      rows.push_back(evaluate(scores_from_predictions(layouts[0], predictions), layouts[0].name, 0, cfg.seed));
      finish_eval(c, dir, cfg, rows);
      return;
    }
    const ModelBundle model = load_for_scoring(c, model_dir);
    const fs::path dir = make_run_dir(c, "eval", model.config);
    rows.push_back(evaluate(score_category(layouts[0], model), layouts[0].name, model.config.shots,
                            model.config.seed));
    finish_eval(c, dir, model.config, rows, file_hash(fs::path(model_dir) / "model.dfdw"));
    return;
  }
  const TrainConfig cfg = resolve(c);
  const fs::path dir = make_run_dir(c, "eval", cfg);
  for (const auto& layout : layouts) {
    const auto run = run_category(layout, cfg);
    std::cerr << layout.name << ": " << fmt(run.total_seconds) << " s\n";
    rows.push_back(run.row);
  }
  finish_eval(c, dir, cfg, rows);
}

// ---------------------------------------------------------------- ablate

void cmd_ablate(const Common& c, const std::string& data, std::vector<int> row_ids, std::vector<std::uint64_t> seeds) {
  TrainConfig cfg = resolve(c);
  if (data.empty()) throw ArgumentError("ablate: --data is required");
  const auto layouts = ingest_mvtec_layout(data);
  const auto& table = ablation_rows();
  if (row_ids.empty()) {
    for (std::size_t i = 0; i < table.size(); ++i) row_ids.push_back(static_cast<int>(i) + 1);
  }
  for (int id : row_ids) {
    if (id < 1 || id > static_cast<int>(table.size())) throw ConfigError("ablate: row ids run 1.." + std::to_string(table.size()));
  }
  if (seeds.empty()) seeds.push_back(cfg.seed);
  const fs::path dir = make_run_dir(c, "ablate", cfg);

  std::ostringstream summary, runs;
  summary << "row,name,gaussian_disc,perlin_disc,rotate,mfic,sim_loss,runs,auroc_i,auroc_p,pro\n";
  runs << "row,name,category,seed,auroc_i,auroc_p,pro\n";
  std::map<std::string, double> metrics;
  for (int id : row_ids) {
    const auto& row = table[static_cast<std::size_t>(id - 1)];
    TrainConfig rc = cfg;
    row.apply(rc);
    double si = 0, sp = 0, spro = 0;
    int n = 0;
    for (auto seed : seeds) {
      rc.seed = seed;
      for (const auto& layout : layouts) {
        const auto r = run_category(layout, rc).row;
        runs << id << "," << row.name << "," << r.category << "," << seed << "," << fmt(r.auroc_i) << ","
             << fmt(r.auroc_p) << "," << fmt(r.pro) << "\n";
        si += r.auroc_i;
        sp += r.auroc_p;
        spro += r.pro;
        ++n;
      }
    }
    summary << id << "," << row.name << "," << row.gaussian_disc << "," << row.perlin_disc << "," << row.rotate << ","
            << row.mfic << "," << row.sim_loss << "," << n << "," << fmt(si / n) << "," << fmt(sp / n) << ","
            << fmt(spro / n) << "\n";
    metrics["row" + std::to_string(id) + ".auroc_i"] = si / n;
    metrics["row" + std::to_string(id) + ".auroc_p"] = sp / n;
    metrics["row" + std::to_string(id) + ".pro"] = spro / n;
    std::cerr << row.name << ": " << fmt(si / n) << " / " << fmt(sp / n) << " / " << fmt(spro / n) << "\n";
  }
  write_text(dir / "ablation.csv", summary.str());
  write_text(dir / "runs.csv", runs.str());
  write_report(c, dir, "ablate", cfg, metrics);
  std::cout << summary.str() << dir.string() << "\n";
}

// ---------------------------------------------------------------- gradcheck

void cmd_gradcheck(const Common& c, bool small, double tol, std::size_t coords) {
  const TrainConfig cfg = resolve(c);
  GradSuiteOptions opts = small ? GradSuiteOptions{} : default_net_suite(cfg.seed);
  opts.seed = cfg.seed;
  opts.tol = tol;
  if (coords > 0) opts.max_coords = coords;
  const auto entries = run_grad_suite(opts);
  const fs::path dir = make_run_dir(c, "gradcheck", cfg);
  std::ostringstream csv;
  csv << "name,max_rel_error,max_abs_error,coordinates,passed\n";
  double worst = 0.0;
  std::vector<std::string> failed;
  for (const auto& e : entries) {
    csv << e.name << "," << fmt(e.report.max_rel_error) << "," << fmt(e.report.max_abs_error) << ","
        << e.report.coordinates << "," << (e.report.passed ? 1 : 0) << "\n";
    std::printf("%-28s max_rel_error %.3e  coords %zu  %s\n", e.name.c_str(), e.report.max_rel_error,
                e.report.coordinates, e.report.passed ? "ok" : "FAILED");
    worst = std::max(worst, e.report.max_rel_error);
    if (!e.report.passed) failed.push_back(e.name);
  }
  write_text(dir / "gradcheck.csv", csv.str());
  write_report(c, dir, "gradcheck", cfg,
               {{"max_rel_error", worst}, {"checks", static_cast<double>(entries.size())},
                {"failed", static_cast<double>(failed.size())}});
  std::printf("max_rel_error = %.3e (tolerance %.1e)\n%s\n", worst, tol, dir.string().c_str());
  if (!failed.empty()) throw NumericError("gradcheck: " + std::to_string(failed.size()) + " checks exceed tolerance");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-discriminator few-shot anomaly detection"};
  app.set_version_flag("--version", std::string("dfd ") + kVersion);
  app.require_subcommand(1);
  app.footer(keys_footer());

  Common common;

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "write the synthetic-texture fixture or an augmented pseudo-anomaly set");
  add_common(synth, common);
  synth->add_option("--augment", synth_args.augment, "emit n_aug augmented samples of this image instead");
  synth->add_option("--size", synth_args.size, "fixture image size")->capture_default_str();
  synth->add_option("--train-good", synth_args.train_good, "normal training images per category")->capture_default_str();
  synth->add_option("--test-good", synth_args.test_good, "normal test images per category")->capture_default_str();
  synth->add_option("--test-defect", synth_args.test_defect, "defective test images per category")->capture_default_str();
  synth->add_option("--categories", synth_args.categories, "subset of weave, granite, tile, disc, carpet")->delimiter(',');

  std::vector<std::string> analyze_inputs;
  auto* analyze = app.add_subcommand("analyze", "radial energy profiles and gray histograms of image sets");
  add_common(analyze, common);
  analyze->add_option("--input", analyze_inputs, "image file or directory; repeat for several sets")->required();

  std::string data, model_dir, predictions;
  std::vector<std::string> images;
  auto* train_cmd = app.add_subcommand("train", "few-shot training; writes model/, loss.csv and report.txt");
  add_common(train_cmd, common);
  train_cmd->add_option("--data", data, "category directory (first `shots` images of train/good)");
  train_cmd->add_option("--images", images, "explicit training images");

  std::vector<std::string> infer_inputs;
  double alpha = 0.5;
  auto* infer = app.add_subcommand("infer", "score images with a trained model");
  add_common(infer, common);
  infer->add_option("--model", model_dir, "model directory written by train")->required();
  infer->add_option("--input", infer_inputs, "image file or directory (scored together as one set)")->required();
  infer->add_option("--alpha", alpha, "heat overlay opacity")->capture_default_str();

  auto* eval = app.add_subcommand("eval", "AUROC_i, AUROC_p and PRO on MVTec-style categories");
  add_common(eval, common);
  eval->add_option("--data", data, "category or dataset root")->required();
  eval->add_option("--model", model_dir, "score with this trained model instead of training per category");
  eval->add_option("--predictions", predictions, "directory of .dfds maps mirroring the test/ layout");

  std::vector<int> row_ids;
  std::vector<std::uint64_t> seeds;
  auto* ablate = app.add_subcommand("ablate", "component ablation table, one metrics row per configuration");
  add_common(ablate, common);
  ablate->add_option("--data", data, "category or dataset root")->required();
  ablate->add_option("--rows", row_ids, "row ids 1..8 (default all)")->delimiter(',');
  ablate->add_option("--seeds", seeds, "seeds averaged per row (default --seed)")->delimiter(',');

  bool small = false;
  double tol = 1e-4;
  std::size_t coords = 0;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of primitives, networks and losses");
  add_common(gradcheck, common);
  gradcheck->add_flag("--small", small, "small networks, every coordinate probed");
  gradcheck->add_option("--tol", tol, "maximum relative error")->capture_default_str();
  gradcheck->add_option("--coords", coords, "coordinates probed per tensor (0 keeps the suite default)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) cmd_synth(common, synth_args);
    if (*analyze) cmd_analyze(common, analyze_inputs);
    if (*train_cmd) cmd_train(common, data, images);
    if (*infer) cmd_infer(common, model_dir, infer_inputs, alpha);
    if (*eval) cmd_eval(common, data, model_dir, predictions);
    if (*ablate) cmd_ablate(common, data, row_ids, seeds);
    if (*gradcheck) cmd_gradcheck(common, small, tol, coords);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
