#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "hemaclass/hemaclass.hpp"

namespace fs = std::filesystem;
using namespace hemaclass;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kIo = 3, kTraining = 4, kMismatch = 5 };

fs::path resolve_manifest(const SplitPlan& plan, const fs::path& plan_path, const std::string& override_path) {
  if (!override_path.empty()) return override_path;
  if (plan.manifest_path.empty()) throw ConfigError("plan has no manifest_path; pass --manifest");
  fs::path p(plan.manifest_path);
  if (p.is_absolute() || fs::exists(p)) return p;
  return plan_path.parent_path() / p;
}

int cmd_ingest(const std::string& root, const std::string& out, bool verify) {
  IngestOptions opts;
  opts.verify_decode = verify;
  const auto m = ingest_directory(root, opts);
  write_manifest(out, m);
  std::cerr << "ingested " << m.size() << " images in " << m.num_classes() << " classes";
  if (m.skipped_files > 0) std::cerr << ", skipped " << m.skipped_files << " files";
  std::cerr << "\n";
  return kOk;
}

int cmd_split(const std::string& manifest_path, double frac, std::size_t test_count, std::uint64_t seed, const std::string& out) {
  const auto manifest = read_manifest(manifest_path);
  auto plan = make_split(manifest, {frac, test_count, seed});
  plan.manifest_path = manifest_path;
  const auto check = verify_split(plan, manifest);
  if (!check.ok) throw SplitError("split verification failed: " + check.problems.front());
  write_file_text(out, split_plan_to_text(plan));
  std::cerr << check.table(manifest.class_names);
  return kOk;
}

struct ExtractArgs {
  std::string model, plan, partition = "test", out, manifest, image_root;
  std::size_t batch = kDefaultBatchSize, jobs = 0;
};

int cmd_extract(const ExtractArgs& a) {
  const auto plan = read_split_plan(a.plan);
  const auto manifest_path = resolve_manifest(plan, a.plan, a.manifest);
  const auto manifest = read_manifest(manifest_path);
  if (plan.manifest_sha256 != manifest_hash(manifest)) {
    throw ConfigError("plan " + a.plan + " was made from a different manifest than " + manifest_path.string());
  }
  const auto& rows = plan.partition(a.partition);
  const fs::path root = a.image_root.empty() ? manifest_path.parent_path() : fs::path(a.image_root);
  const auto backbone = Backbone::load(a.model);
  auto fm = extract_rows(backbone, manifest, root, rows, a.batch, a.jobs);
  fm.metadata["partition"] = a.partition;
  fm.metadata["plan_sha256"] = sha256_file_hex(a.plan);
  write_featb(a.out, fm);
  std::cerr << "wrote " << fm.rows << " x " << fm.dim << " features to " << a.out << "\n";
  return kOk;
}

struct TrainArgs {
  std::string features, head, grid, out, cv_csv;
  std::size_t folds = 5, jobs = 0;
  std::uint64_t seed = 42;
};

int cmd_train(const TrainArgs& a) {
  const auto kind = parse_head_kind(a.head);
  nlohmann::json grid_file = nlohmann::json::object();
  if (!a.grid.empty()) {
    try {
      grid_file = nlohmann::json::parse(read_file_text(a.grid));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("grid " + a.grid + ": " + e.what());
    }
  }
  const auto fm = read_featb(a.features);
  const auto grid = load_grid(grid_file, kind, a.folds, a.seed);
  auto cv = grid_search(fm, grid, a.jobs);
  for (const char* key : {"backbone_sha256", "manifest_sha256", "plan_sha256", "preprocessing", "class_names"}) {
    if (fm.metadata.contains(key)) cv.model.metadata[key] = fm.metadata[key];
  }
  cv.model.metadata["features_sha256"] = sha256_file_hex(a.features);
  write_head(a.out, cv.model);
  const auto csv = cv_result_csv(cv);
  if (!a.cv_csv.empty()) write_file_text(a.cv_csv, csv);
  std::cerr << head_kind_name(kind) << ": chose " << params_to_json(cv.chosen().params).dump() << " (cv mean "
            << cv.chosen().mean_accuracy << ")\n";
  return kOk;
}

struct EvaluateArgs {
  std::string model, features, report, csv, json, split = "test", misclassified, backbone_label = "ResNet50",
                                                     highlight = "erythroblast";
};

int cmd_evaluate(const EvaluateArgs& a) {
  const auto head = read_head(a.model);
  const auto fm = read_featb(a.features);
  auto ev = evaluate_head(head, fm, a.split, head_display_name(head.kind(), a.backbone_label), a.highlight);
  ev.report.provenance["model_sha256"] = sha256_file_hex(a.model);
  ev.report.provenance["features_sha256"] = sha256_file_hex(a.features);
  const std::vector<EvalReport> reports{ev.report};
  const auto md = render_markdown(reports);
  if (!a.report.empty()) write_file_text(a.report, md);
  else std::cout << md;
  if (!a.csv.empty()) write_file_text(a.csv, render_csv(reports));
  if (!a.json.empty()) write_file_text(a.json, report_to_json(ev.report).dump(1) + "\n");
  if (!a.misclassified.empty()) {
    std::string text;
    for (const auto& line : ev.misclassified) text += line + "\n";
    write_file_text(a.misclassified, text);
  }
  return kOk;
}

int cmd_curve(const std::string& config) {
  const auto cfg = load_experiment_config(config);
  const auto r = run_curve(cfg);
  std::cout << curve_csv(r.points);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hemaclass: CNN features + classical heads for blood cell images"};
  app.require_subcommand(1);

  std::string ingest_root, ingest_out;
  bool ingest_verify = false;
  auto* ingest = app.add_subcommand("ingest", "scan <root>/<class>/<image> into a manifest CSV");
  ingest->add_option("root", ingest_root, "dataset root")->required();
  ingest->add_option("--out", ingest_out, "manifest CSV")->required();
  ingest->add_flag("--verify-decode", ingest_verify, "fully decode every image");

  std::string split_manifest, split_out;
  double split_frac = 0.0;
  std::size_t split_test = 4000;
  std::uint64_t split_seed = 42;
  auto* split = app.add_subcommand("split", "make a stratified train/val/test plan");
  split->add_option("manifest", split_manifest, "manifest CSV")->required();
  split->add_option("--train-frac", split_frac, "training fraction in (0,1]")->required();
  split->add_option("--test-count", split_test, "fixed test set size");
  split->add_option("--seed", split_seed, "shuffle seed");
  split->add_option("--out", split_out, "plan JSON")->required();

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "embed one partition of a plan with an ONNX backbone");
  extract->add_option("--model", ex.model, "ONNX backbone")->required();
  extract->add_option("--plan", ex.plan, "split plan JSON")->required();
  extract->add_option("--partition", ex.partition, "train|val|test");
  extract->add_option("--batch", ex.batch, "inference batch size");
  extract->add_option("--out", ex.out, "FEATB output")->required();
  extract->add_option("--manifest", ex.manifest, "manifest CSV (default: path recorded in the plan)");
  extract->add_option("--image-root", ex.image_root, "image directory (default: manifest directory)");
  extract->add_option("--jobs", ex.jobs, "decode workers (0 = all cores)");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "grid search + refit a classifier head");
  train->add_option("--features", tr.features, "training FEATB")->required();
  train->add_option("--head", tr.head, "knn|svm|forest|gbt")->required();
  train->add_option("--grid", tr.grid, "grid JSON keyed by head");
  train->add_option("--folds", tr.folds, "cross-validation folds");
  train->add_option("--seed", tr.seed, "fold and forest seed");
  train->add_option("--out", tr.out, "model container")->required();
  train->add_option("--cv-csv", tr.cv_csv, "per-point CV table");
  train->add_option("--jobs", tr.jobs, "worker threads (0 = all cores)");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "score a model on a feature file");
  evaluate->add_option("--model", ev.model, "model container")->required();
  evaluate->add_option("--features", ev.features, "test FEATB")->required();
  evaluate->add_option("--report", ev.report, "markdown report (default: stdout)");
  evaluate->add_option("--csv", ev.csv, "CSV report");
  evaluate->add_option("--json", ev.json, "JSON report with confusion matrix");
  evaluate->add_option("--split", ev.split, "split label for the table");
  evaluate->add_option("--backbone-label", ev.backbone_label, "classifier name prefix");
  evaluate->add_option("--highlight", ev.highlight, "class shown in the table");
  evaluate->add_option("--misclassified", ev.misclassified, "write misclassified paths here");

  std::string curve_config;
  auto* curve = app.add_subcommand("curve", "run the full training-size sweep");
  curve->add_option("--config", curve_config, "experiment JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_root, ingest_out, ingest_verify);
    if (*split) return cmd_split(split_manifest, split_frac, split_test, split_seed, split_out);
    if (*extract) return cmd_extract(ex);
    if (*train) return cmd_train(tr);
    if (*evaluate) return cmd_evaluate(ev);
    if (*curve) return cmd_curve(curve_config);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kTraining;
  } catch (const DimensionMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMismatch;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
  return kOther;
}
