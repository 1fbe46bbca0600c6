#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "smoe/checkpoint.hpp"
#include "smoe/dataset.hpp"
#include "smoe/errors.hpp"
#include "smoe/eval_suite.hpp"
#include "smoe/explain.hpp"
#include "smoe/gradient_suite.hpp"
#include "smoe/inference.hpp"
#include "smoe/report.hpp"
#include "smoe/trainer.hpp"

namespace smoe::cli {

namespace fs = std::filesystem;

namespace {

struct TrainArgs {
  std::string data, config, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, batch_size, depth, base_channels;
  std::optional<double> lr;
  bool no_smoe = false;
};

struct InferArgs {
  std::string ckpt, image, out;
  bool unet_head = false;
};

struct EvalArgs {
  std::string pred_dir, gt_dir, out, method = "pred", ckpt, image_dir;
  std::size_t thresholds = 33;
  double tolerance = 0.0;
  bool unet_head = false;
};

struct ExplainArgs {
  std::string ckpt, image, out;
};

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::size_t seeds = 20;
};

std::string to_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Config file first, then every flag that was given on the command line.
TrainConfig resolve_train_config(const TrainArgs& a) {
  TrainConfig cfg;
  if (!a.config.empty()) cfg = load_train_config(a.config);
  if (a.seed) apply_config_value(cfg, "seed", std::to_string(*a.seed));
  if (a.epochs) apply_config_value(cfg, "epochs", std::to_string(*a.epochs));
  if (a.batch_size) apply_config_value(cfg, "batch_size", std::to_string(*a.batch_size));
  if (a.depth) apply_config_value(cfg, "depth", std::to_string(*a.depth));
  if (a.base_channels) apply_config_value(cfg, "base_channels", std::to_string(*a.base_channels));
  if (a.lr) apply_config_value(cfg, "lr", to_text(*a.lr));
  if (a.no_smoe) cfg.model.smoe_enabled = false;
  cfg.out_dir = a.out;
  cfg.validate();
  cfg.model.validate();
  return cfg;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainConfig cfg;
  try {
    cfg = resolve_train_config(a);
  } catch (const DataError&) {
    throw;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  if (!fs::is_directory(a.data)) throw DataError("dataset directory not found: " + a.data);
  const auto train_set = load_dataset(a.data, Split::train);
  if (train_set.empty()) throw DataError("no training images in " + (fs::path(a.data) / "train" / "images").string());
  const auto val_set = load_dataset(a.data, Split::val);
  out << "training on " << train_set.size() << " images (" << val_set.size() << " validation), "
      << cfg.epochs << " epochs, seed " << cfg.seed << "\n";
  const auto result = train(cfg, train_set, val_set, [&](const EpochRecord& r) {
    out << "epoch " << r.epoch << " train_loss " << to_text(r.train_loss);
    if (!std::isnan(r.val_loss)) out << " val_loss " << to_text(r.val_loss);
    out << " (" << r.seconds << " s)\n";
    out.flush();
  });
  out << "best epoch " << result.best_epoch << "; wrote " << (cfg.out_dir / "last.ckpt").string() << "\n";
  return kOk;
}

int cmd_infer(const InferArgs& a, std::ostream& out) {
  const auto model = load_checkpoint(a.ckpt).model;
  const Image image = read_png(a.image);
  const Image prob = edge_probability(model, image, a.unet_head ? OutputHead::unet : OutputHead::fuzzy);
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw DataError("cannot create " + a.out + ": " + ec.message());
  const auto path = fs::path(a.out) / (fs::path(a.image).stem().string() + ".png");
  write_png(path, prob);
  out << "wrote " << path.string() << "\n";
  return kOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  if (a.thresholds == 0) {
    err << "error: --thresholds must be >= 1\n";
    return kUsage;
  }
  if (a.method == "model" && a.ckpt.empty()) {
    err << "error: --method model requires --ckpt\n";
    return kUsage;
  }
  EvalOptions opt;
  opt.thresholds = default_thresholds(a.thresholds);
  opt.tolerance_px = a.tolerance;
  const std::string image_dir = a.image_dir.empty() ? a.pred_dir : a.image_dir;
  EvalReport report;
  if (a.method == "pred") {
    const auto samples = load_eval_set(a.pred_dir, {}, a.gt_dir);
    std::vector<Image> probs;
    for (const auto& s : samples) probs.push_back(to_luma(read_png(fs::path(a.pred_dir) / (s.id + ".png"))));
    report = evaluate_probability_maps(samples, probs, opt);
  } else if (a.method == "sobel") {
    report = evaluate_sobel(load_eval_set(image_dir, image_dir, a.gt_dir), opt);
  } else if (a.method == "canny") {
    report = evaluate_canny(load_eval_set(image_dir, image_dir, a.gt_dir), opt);
  } else {
    const auto model = load_checkpoint(a.ckpt).model;
    const auto samples = load_eval_set(image_dir, image_dir, a.gt_dir);
    std::vector<Image> images;
    for (const auto& s : samples) images.push_back(s.image);
    const auto head = a.unet_head ? OutputHead::unet : OutputHead::fuzzy;
    report = evaluate_probability_maps(samples, edge_probabilities(model, images, head), opt, "model");
  }
  const fs::path json_path = a.out;
  if (json_path.has_parent_path()) fs::create_directories(json_path.parent_path());
  auto csv_path = json_path;
  csv_path.replace_extension(".csv");
  auto plot_path = json_path;
  plot_path.replace_filename(json_path.stem().string() + "_pr.png");
  write_report_json(json_path, report);
  write_report_csv(csv_path, report);
  write_pr_plot(plot_path, {&report});
  char line[160];
  std::snprintf(line, sizeof line, "%s: ODS %.4f (t=%.4f) OIS %.4f AP %.4f\n", report.method.c_str(), report.ods_f,
                report.ods_threshold, report.ois_f, report.ap);
  out << line << "wrote " << json_path.string() << ", " << csv_path.string() << ", " << plot_path.string() << "\n";
  return kOk;
}

int cmd_explain(const ExplainArgs& a, std::ostream& out) {
  const auto model = load_checkpoint(a.ckpt).model;
  for (const auto& p : write_explain_artifacts(model, read_png(a.image), a.out)) out << "wrote " << p.string() << "\n";
  return kOk;
}

int cmd_export_rules(const ExplainArgs& a, std::ostream& out) {
  const auto model = load_checkpoint(a.ckpt).model;
  const fs::path path = a.out;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  for (const auto& p : export_rulebase(model.tsk(), path)) out << "wrote " << p.string() << "\n";
  return kOk;
}

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  SuiteOptions opt;
  opt.first_seed = a.seed;
  opt.seeds = a.seeds;
  std::size_t failed = 0, total = 0;
  run_gradient_suite(opt, [&](const SuiteCase& c) {
    ++total;
    if (!c.report.passed) {
      ++failed;
      out << "FAIL " << c.name << " seed " << c.seed << ": " << c.report.summary() << "\n";
    }
  });
  out << (total - failed) << "/" << total << " gradient checks passed over " << a.seeds << " seeds\n";
  return failed == 0 ? kOk : kNumericError;
}

// Maps library exceptions onto the exit code contract.
int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Boundary detection with a U-Net, a spatial mixture-of-experts skip block and a fuzzy rule head", "smoe"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model on <data>/train (and <data>/val when present)");
  train_cmd->add_option("--data", ta.data, "Dataset root with train/images and train/gt")->required();
  train_cmd->add_option("--config", ta.config, "key = value config file; flags override its values");
  train_cmd->add_option("--out", ta.out, "Output directory for log.csv, config.txt and checkpoints")->required();
  train_cmd->add_option("--seed", ta.seed, "Seed for initialisation and batch order");
  train_cmd->add_option("--epochs", ta.epochs, "Number of epochs");
  train_cmd->add_option("--lr", ta.lr, "Adam learning rate");
  train_cmd->add_option("--batch-size", ta.batch_size, "Samples per step");
  train_cmd->add_option("--depth", ta.depth, "U-Net depth");
  train_cmd->add_option("--base-channels", ta.base_channels, "Channels of the first encoder level");
  train_cmd->add_flag("--no-smoe", ta.no_smoe, "Plain skip connections (U-Net baseline)");

  InferArgs ia;
  auto* infer_cmd = app.add_subcommand("infer", "Write the boundary probability PNG for one image");
  infer_cmd->add_option("--ckpt", ia.ckpt, "Checkpoint file")->required();
  infer_cmd->add_option("--image", ia.image, "Input PNG")->required();
  infer_cmd->add_option("--out", ia.out, "Output directory; the map is written as <image stem>.png")->required();
  auto* fuzzy = infer_cmd->add_flag("--fuzzy", "Use the fuzzy head output (default)");
  infer_cmd->add_flag("--unet-head", ia.unet_head, "Use the main U-Net head instead")->excludes(fuzzy);

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Benchmark boundary maps against annotator ground truth");
  eval_cmd->add_option("--pred-dir", ea.pred_dir,
                       "Probability maps (method pred) or source images (canny, sobel, model)")
      ->required();
  eval_cmd->add_option("--gt-dir", ea.gt_dir, "Ground truth as <stem>.png or <stem>_<k>.png per annotator")
      ->required();
  eval_cmd->add_option("--out", ea.out, "Report JSON; the CSV and <stem>_pr.png are written next to it")->required();
  eval_cmd->add_option("--thresholds", ea.thresholds, "Number of thresholds k/(N+1)")->capture_default_str();
  eval_cmd->add_option("--method", ea.method, "pred, canny, sobel or model")
      ->check(CLI::IsMember({"pred", "canny", "sobel", "model"}))
      ->capture_default_str();
  eval_cmd->add_option("--ckpt", ea.ckpt, "Checkpoint for --method model");
  eval_cmd->add_option("--image-dir", ea.image_dir, "Source images (defaults to --pred-dir)");
  eval_cmd->add_option("--tolerance", ea.tolerance, "Matching radius in pixels; 0 uses 0.0075 of the diagonal")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  eval_cmd->add_flag("--unet-head", ea.unet_head, "With --method model, score the main head");

  ExplainArgs xa;
  auto* explain_cmd = app.add_subcommand("explain", "Write strategy maps, rule firing maps and the rule base");
  explain_cmd->add_option("--ckpt", xa.ckpt, "Checkpoint file")->required();
  explain_cmd->add_option("--image", xa.image, "Input PNG")->required();
  explain_cmd->add_option("--out", xa.out, "Output directory")->required();

  ExplainArgs ra;
  auto* rules_cmd = app.add_subcommand("export-rules", "Write the fuzzy rule base as JSON plus membership curves");
  rules_cmd->add_option("--ckpt", ra.ckpt, "Checkpoint file")->required();
  rules_cmd->add_option("--out", ra.out, "Rule base JSON path")->required();

  GradcheckArgs ga;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Run the finite-difference gradient suite");
  grad_cmd->add_option("--seed", ga.seed, "First seed")->capture_default_str();
  grad_cmd->add_option("--seeds", ga.seeds, "Number of seeds")->check(CLI::PositiveNumber)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  return guarded(
      [&] {
        if (*train_cmd) return cmd_train(ta, out, err);
        if (*infer_cmd) return cmd_infer(ia, out);
        if (*eval_cmd) return cmd_eval(ea, out, err);
        if (*explain_cmd) return cmd_explain(xa, out);
        if (*rules_cmd) return cmd_export_rules(ra, out);
        return cmd_gradcheck(ga, out);
      },
      err);
}

}  // namespace smoe::cli
