#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "hemaclass/pipeline.hpp"

namespace hemaclass {

struct ExperimentConfig {
  std::filesystem::path manifest;
  std::filesystem::path backbone;
  std::filesystem::path image_root;  // defaults to the manifest's directory
  std::vector<double> fractions{0.01, 0.025, 0.05, 0.075, 0.10, 0.20, 0.30};
  std::size_t test_count = 4000;
  std::uint64_t seed = 42;
  std::vector<HeadKind> heads{HeadKind::Svm, HeadKind::Gbt, HeadKind::Knn, HeadKind::Forest};
  std::filesystem::path grid;  // optional grid file
  std::size_t folds = 5;
  std::size_t batch = kDefaultBatchSize;
  std::size_t jobs = 0;
  std::string backbone_label = "ResNet50";
  std::string highlight = "erythroblast";
  std::filesystem::path output_dir = "results";

  void validate() const {
    if (fractions.empty()) throw ConfigError("config: no train fractions");
    for (double f : fractions) {
      if (!(f > 0.0 && f <= 1.0)) throw ConfigError("config: train fraction " + std::to_string(f) + " outside (0,1]");
    }
    if (heads.empty()) throw ConfigError("config: no heads");
    if (batch == 0) throw ConfigError("config: batch must be >= 1");
  }
};

// Relative paths in the file are resolved against the file's directory.
inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) -> std::filesystem::path {
    std::filesystem::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  ExperimentConfig c;
  try {
    c.manifest = resolve(j.at("manifest").get<std::string>());
    c.backbone = resolve(j.at("backbone").get<std::string>());
    if (j.contains("image_root")) c.image_root = resolve(j["image_root"].get<std::string>());
    if (j.contains("fractions")) c.fractions = j["fractions"].get<std::vector<double>>();
    if (j.contains("test_count")) c.test_count = j["test_count"].get<std::size_t>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("heads")) {
      c.heads.clear();
      for (const auto& h : j["heads"]) c.heads.push_back(parse_head_kind(h.get<std::string>()));
    }
    if (j.contains("grid")) c.grid = resolve(j["grid"].get<std::string>());
    if (j.contains("folds")) c.folds = j["folds"].get<std::size_t>();
    if (j.contains("batch")) c.batch = j["batch"].get<std::size_t>();
    if (j.contains("jobs")) c.jobs = j["jobs"].get<std::size_t>();
    if (j.contains("backbone_label")) c.backbone_label = j["backbone_label"].get<std::string>();
    if (j.contains("highlight")) c.highlight = j["highlight"].get<std::string>();
    if (j.contains("output_dir")) c.output_dir = resolve(j["output_dir"].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  c.validate();
  return c;
}

struct CurvePoint {
  double fraction = 0.0;
  HeadKind head = HeadKind::Knn;
  double test_accuracy = 0.0;
};

struct CurveResult {
  std::vector<CurvePoint> points;
  std::vector<EvalReport> reports;
};

inline std::string curve_csv(const std::vector<CurvePoint>& points) {
  std::string out = "fraction,head,test_accuracy\n";
  for (const auto& p : points) out += format_real(p.fraction) + "," + head_kind_name(p.head) + "," + format_real(p.test_accuracy) + "\n";
  return out;
}

// Full sweep: one split per fraction (shared test set), a single feature
// extraction over every row any split needs, grid search per head, and
// evaluation on the test partition. Writes plans, CV tables, reports and
// curve.csv under output_dir.
inline CurveResult run_curve(const ExperimentConfig& cfg, std::ostream& log = std::cerr) {
  namespace fs = std::filesystem;
  cfg.validate();
  const auto manifest = read_manifest(cfg.manifest);
  const auto image_root = cfg.image_root.empty() ? cfg.manifest.parent_path() : cfg.image_root;
  fs::create_directories(cfg.output_dir);

  std::vector<SplitPlan> plans;
  std::set<std::size_t> needed;
  for (double f : cfg.fractions) {
    auto plan = make_split(manifest, {f, cfg.test_count, cfg.seed});
    plan.manifest_path = cfg.manifest.string();
    const auto check = verify_split(plan, manifest);
    if (!check.ok) throw SplitError("split verification failed: " + check.problems.front());
    write_file_text(cfg.output_dir / ("plan_" + fraction_label(f) + ".json"), split_plan_to_text(plan));
    needed.insert(plan.train_indices.begin(), plan.train_indices.end());
    needed.insert(plan.test_indices.begin(), plan.test_indices.end());
    plans.push_back(std::move(plan));
  }

  const auto backbone = Backbone::load(cfg.backbone);
  const std::vector<std::size_t> rows(needed.begin(), needed.end());
  log << "extracting " << rows.size() << " images with " << cfg.backbone.filename().string() << " (D=" << backbone.feature_dim() << ")\n";
  const auto all = extract_rows(backbone, manifest, image_root, rows, cfg.batch, cfg.jobs);
  std::map<std::size_t, std::size_t> row_of;
  for (std::size_t r = 0; r < rows.size(); ++r) row_of[rows[r]] = r;
  auto gather = [&](const std::vector<std::size_t>& idx, const SplitPlan& plan, const char* partition) {
    std::vector<std::size_t> local;
    for (auto i : idx) local.push_back(row_of.at(i));
    auto fm = subset_rows(all, local);
    fm.metadata["partition"] = partition;
    fm.metadata["plan_sha256"] = sha256_hex(split_plan_to_text(plan));
    return fm;
  };

  nlohmann::json grid_file = nlohmann::json::object();
  if (!cfg.grid.empty()) grid_file = nlohmann::json::parse(read_file_text(cfg.grid));

  CurveResult result;
  for (const auto& plan : plans) {
    const auto label = fraction_label(plan.spec.train_fraction);
    const auto train = gather(plan.train_indices, plan, "train");
    const auto test = gather(plan.test_indices, plan, "test");
    for (auto kind : cfg.heads) {
      log << label << " " << head_kind_name(kind) << ": grid search on " << train.rows << " rows\n";
      const auto grid = load_grid(grid_file, kind, cfg.folds, cfg.seed);
      auto cv = grid_search(train, grid, cfg.jobs);
      const auto stem = std::string(head_kind_name(kind)) + "_" + label;
      write_file_text(cfg.output_dir / ("cv_" + stem + ".csv"), cv_result_csv(cv));
      auto ev = evaluate_head(cv.model, test, label, head_display_name(kind, cfg.backbone_label), cfg.highlight);
      result.points.push_back({plan.spec.train_fraction, kind, ev.report.accuracy});
      result.reports.push_back(std::move(ev.report));
    }
  }
  write_file_text(cfg.output_dir / "curve.csv", curve_csv(result.points));
  write_file_text(cfg.output_dir / "report.md", render_markdown(result.reports));
  write_file_text(cfg.output_dir / "report.csv", render_csv(result.reports));
  return result;
}

}  // namespace hemaclass
