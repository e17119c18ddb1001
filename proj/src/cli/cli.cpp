#include "biogan/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "biogan/checkpoint.hpp"
#include "biogan/config.hpp"
#include "biogan/dataset.hpp"
#include "biogan/eval/coco.hpp"
#include "biogan/image.hpp"
#include "biogan/perceptual.hpp"
#include "biogan/report.hpp"
#include "biogan/training.hpp"

namespace biogan::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json config_json(const TrainingConfig& cfg) {
  json o = json::object();
  for (const auto& [k, v] : config_entries(cfg)) o[k] = v;
  return o;
}

// Record of one command invocation, kept current on disk.
class Manifest {
 public:
  Manifest(fs::path out_dir, const std::string& command, const std::vector<std::string>& args)
      : path_(out_dir / "manifest.json") {
    data_ = {{"tool", "biogan"},
             {"version", kToolVersion},
             {"command", command},
             {"args", args},
             {"out_dir", out_dir.string()},
             {"config", nullptr},
             {"seed", nullptr},
             {"inputs", json::array()},
             {"outputs", json::array()},
             {"started", utc_now()},
             {"finished", nullptr},
             {"status", "running"},
             {"exit_code", nullptr}};
    fs::create_directories(out_dir);
    write();
  }

  void set_config(const TrainingConfig& cfg) {
    data_["config"] = config_json(cfg);
    data_["seed"] = cfg.seed;
    write();
  }
  void add_input(const fs::path& p) { data_["inputs"].push_back(p.string()); }
  void add_output(const fs::path& p) { data_["outputs"].push_back(p.string()); }
  void finish(int code, const std::string& error = {}) {
    data_["finished"] = utc_now();
    data_["status"] = code == kExitOk ? "ok" : "failed";
    data_["exit_code"] = code;
    if (!error.empty()) data_["error"] = error;
    write();
  }

 private:
  void write() const { write_file_atomic(path_, data_.dump(2) + "\n"); }

  fs::path path_;
  json data_;
};

// Resolved training config: defaults < file < environment < overrides.
TrainingConfig resolve_config(const std::string& config_path, const std::vector<std::string>& overrides) {
  TrainingConfig cfg;
  if (!config_path.empty()) {
    cfg = load_config(config_path);
    const fs::path base = fs::path(config_path).parent_path();
    for (fs::path* p : {&cfg.source_dir, &cfg.target_dir, &cfg.descriptor_weights}) {
      if (!p->empty() && p->is_relative()) *p = base / *p;
    }
  }
  apply_environment(cfg);
  for (const auto& o : overrides) apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

std::vector<std::string> without_out(const std::vector<std::string>& args) {
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--out" || a == "--output") {
      ++i;
      continue;
    }
    if (a.rfind("--out=", 0) == 0 || a.rfind("--output=", 0) == 0) continue;
    kept.push_back(a);
  }
  return kept;
}

std::string sha256_of(const fs::path& p) { return sha256_file(p); }

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> args;  // after the subcommand name, without --out
};

int cmd_train(const Context& ctx, const std::string& config_path,
              const std::vector<std::string>& overrides, const fs::path& out_dir) {
  const TrainingConfig cfg = resolve_config(config_path, overrides);
  Manifest manifest(out_dir, "train", ctx.args);
  manifest.set_config(cfg);
  try {
    const UnpairedDataset dataset = load_dataset(cfg.source_dir, cfg.target_dir);
    for (const auto& p : dataset.source_images) manifest.add_input(p);
    for (const auto& p : dataset.target_images) manifest.add_input(p);
    const FeatureDescriptor descriptor = FeatureDescriptor::load(cfg.descriptor_weights, cfg.descriptor_sha256);
    write_file_atomic(out_dir / "config.resolved", format_config(cfg));

    TrainOptions options;
    options.out_dir = out_dir;
    int last_epoch = -1;
    options.on_iteration = [&](const IterationRecord& r) {
      if (r.epoch != last_epoch && r.index == 0 && r.iteration == 0) {
        last_epoch = r.epoch;
        ctx.out << "epoch " << r.epoch + 1 << "/" << cfg.epochs << "  total " << r.losses.total
                << "  discriminator " << r.losses.discriminator << "\n";
      }
    };
    const TrainingRun run = train(cfg, dataset, descriptor, options);
    manifest.add_output(out_dir / "config.resolved");
    manifest.add_output(out_dir / "losses.jsonl");
    for (const auto& [epoch, path] : run.checkpoints) manifest.add_output(path);
    ctx.out << "trained " << run.epoch_losses.size() << " iterations in " << run.wall_time
            << " s; " << run.checkpoints.size() << " checkpoints under " << (out_dir / "checkpoints").string()
            << "\n";
    manifest.finish(kExitOk);
    return kExitOk;
  } catch (const Error& e) {
    manifest.finish(exit_code_for(e.kind()), e.what());
    throw;
  }
}

int cmd_translate(const Context& ctx, const fs::path& checkpoint, const fs::path& input_dir,
                  const fs::path& out_dir) {
  Manifest manifest(out_dir, "translate", ctx.args);
  try {
    const auto inputs = list_images(input_dir);
    for (const auto& p : inputs) manifest.add_input(p);
    const auto outputs = translate(checkpoint, inputs, out_dir);
    for (const auto& p : outputs) manifest.add_output(p);
    ctx.out << "translated " << outputs.size() << " images into " << out_dir.string() << "\n";
    manifest.finish(kExitOk);
    return kExitOk;
  } catch (const Error& e) {
    manifest.finish(exit_code_for(e.kind()), e.what());
    throw;
  }
}

int cmd_evaluate(const Context& ctx, const fs::path& gt, const fs::path& det, const fs::path& out_dir,
                 const eval::EvaluateOptions& options) {
  Manifest manifest(out_dir, "evaluate", ctx.args);
  try {
    manifest.add_input(gt);
    manifest.add_input(det);
    const eval::MetricReport report = eval::evaluate(gt, det, options);
    const std::string text = eval::report_text(report);
    write_file_atomic(out_dir / "report.json", eval::report_json(report));
    write_file_atomic(out_dir / "report.txt", text);
    manifest.add_output(out_dir / "report.json");
    manifest.add_output(out_dir / "report.txt");
    ctx.out << text;
    manifest.finish(kExitOk);
    return kExitOk;
  } catch (const Error& e) {
    manifest.finish(exit_code_for(e.kind()), e.what());
    throw;
  }
}

int cmd_report(const Context& ctx, const fs::path& losses, const fs::path& metrics, const fs::path& out_dir) {
  if (losses.empty() && metrics.empty()) throw UsageError("report needs --losses and/or --metrics");
  // Parse everything before touching the output directory.
  std::optional<std::vector<IterationRecord>> records;
  std::optional<eval::MetricReport> report;
  if (!losses.empty()) records = parse_loss_log(read_text(losses), losses.string());
  if (!metrics.empty()) report = eval::parse_report_json(read_text(metrics), metrics.string());

  Manifest manifest(out_dir, "report", ctx.args);
  std::vector<fs::path> written;
  if (records) {
    manifest.add_input(losses);
    for (auto& p : write_loss_report(*records, out_dir)) written.push_back(p);
  }
  if (report) {
    manifest.add_input(metrics);
    for (auto& p : write_pr_report(*report, out_dir)) written.push_back(p);
  }
  for (const auto& p : written) {
    manifest.add_output(p);
    ctx.out << "wrote " << p.string() << "\n";
  }
  manifest.finish(kExitOk);
  return kExitOk;
}

std::string label_number(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

int cmd_sweep(const Context& ctx, const std::string& config_path, const std::vector<std::string>& overrides,
              const fs::path& input, const fs::path& checkpoint, std::vector<double> lambda_adv,
              std::vector<double> lambda_style, std::vector<double> lambda_content,
              std::optional<int> epochs, const fs::path& out_dir) {
  TrainingConfig base = resolve_config(config_path, overrides);
  if (lambda_adv.empty()) lambda_adv = {base.lambda_adv};
  if (lambda_style.empty()) lambda_style = {base.lambda_style};
  if (lambda_content.empty()) lambda_content = {base.lambda_content};
  if (epochs) base.epochs = *epochs;
  if (checkpoint.empty() && base.epochs == 0) {
    throw UsageError("sweep without --checkpoint needs a training budget (epochs > 0)");
  }

  Manifest manifest(out_dir, "sweep", ctx.args);
  manifest.set_config(base);
  try {
    manifest.add_input(input);
    if (!checkpoint.empty()) manifest.add_input(checkpoint);
    const ImageTensor sample = load_image(input);
    std::optional<UnpairedDataset> dataset;
    std::optional<FeatureDescriptor> descriptor;
    if (base.epochs > 0) {
      dataset = load_dataset(base.source_dir, base.target_dir);
      descriptor = FeatureDescriptor::load(base.descriptor_weights, base.descriptor_sha256);
    }

    const int label_h = 22;
    const int rows = static_cast<int>(lambda_adv.size() * lambda_style.size());
    const int cols = static_cast<int>(lambda_content.size());
    cv::Mat sheet(rows * (sample.height() + label_h), cols * sample.width(), CV_8UC3,
                  cv::Scalar(255, 255, 255));
    json cells = json::array();
    int row = 0;
    for (std::size_t a = 0; a < lambda_adv.size(); ++a) {
      for (std::size_t s = 0; s < lambda_style.size(); ++s, ++row) {
        for (std::size_t c = 0; c < lambda_content.size(); ++c) {
          TrainingConfig cfg = base;
          cfg.lambda_adv = lambda_adv[a];
          cfg.lambda_style = lambda_style[s];
          cfg.lambda_content = lambda_content[c];
          cfg.validate();
          const std::string name = "cell_a" + std::to_string(a) + "_s" + std::to_string(s) + "_c" + std::to_string(c);
          const fs::path cell_dir = out_dir / "cells" / name;

          Generator g = checkpoint.empty() ? Generator::build({cfg.generator, cfg.width_multiplier, cfg.unet_dropout}, cfg.seed)
                                           : load_checkpoint(checkpoint).generator;
          if (cfg.epochs > 0) {
            TrainOptions options;
            options.out_dir = cell_dir;
            options.initial_checkpoint = checkpoint;
            const TrainingRun run = train(cfg, *dataset, *descriptor, options);
            g = load_checkpoint(run.checkpoints.back().second).generator;
          }
          const ImageTensor y = translate_image(g, sample);
          const fs::path image = out_dir / "cells" / (name + ".png");
          fs::create_directories(image.parent_path());
          save_image(y, image);
          manifest.add_output(image);

          const cv::Mat panel = cv::imread(image.string(), cv::IMREAD_COLOR);
          const int x0 = static_cast<int>(c) * sample.width();
          const int y0 = row * (sample.height() + label_h);
          panel.copyTo(sheet(cv::Rect(x0, y0 + label_h, sample.width(), sample.height())));
          const std::string label = "A=" + label_number(cfg.lambda_adv) + " S=" + label_number(cfg.lambda_style) +
                                    " C=" + label_number(cfg.lambda_content);
          cv::putText(sheet, label, {x0 + 3, y0 + 15}, cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(30, 30, 30), 1,
                      cv::LINE_AA);
          cells.push_back({{"lambda_adv", cfg.lambda_adv},
                           {"lambda_style", cfg.lambda_style},
                           {"lambda_content", cfg.lambda_content},
                           {"image", image.string()},
                           {"sha256", sha256_of(image)}});
          ctx.out << name << "  " << label << "\n";
        }
      }
    }
    std::vector<unsigned char> png;
    cv::imencode(".png", sheet, png);
    write_file_atomic(out_dir / "contact_sheet.png", std::string(png.begin(), png.end()));
    write_file_atomic(out_dir / "sweep.json", json({{"cells", cells}}).dump(2) + "\n");
    manifest.add_output(out_dir / "contact_sheet.png");
    manifest.add_output(out_dir / "sweep.json");
    manifest.finish(kExitOk);
    return kExitOk;
  } catch (const Error& e) {
    manifest.finish(exit_code_for(e.kind()), e.what());
    throw;
  }
}

int cmd_make_descriptor(const Context& ctx, const fs::path& out, std::uint64_t seed, double width) {
  const FeatureDescriptor d = FeatureDescriptor::synthetic(seed, width);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  d.save(out);
  ctx.out << "wrote synthetic descriptor weights to " << out.string() << " (sha256 " << sha256_file(out)
          << ")\n";
  return kExitOk;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cmd_replay(const fs::path& manifest_path, const std::string& out_override, std::ostream& out,
               std::ostream& err) {
  json m;
  try {
    m = json::parse(read_text(manifest_path));
  } catch (const json::parse_error& e) {
    throw ParseError(manifest_path.string() + ": invalid JSON: " + e.what());
  }
  if (!m.contains("command") || !m["command"].is_string() || !m.contains("args") || !m["args"].is_array() ||
      !m.contains("out_dir") || !m["out_dir"].is_string()) {
    throw ParseError(manifest_path.string() + ": not a run manifest");
  }
  std::vector<std::string> args = {m["command"].get<std::string>()};
  for (const auto& a : m["args"]) args.push_back(a.get<std::string>());
  args.push_back("--out");
  args.push_back(out_override.empty() ? m["out_dir"].get<std::string>() : out_override);
  return dispatch(args, out, err);
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"BioGAN: unpaired image translation with perceptual losses, plus detection metrics", "biogan"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", std::string("biogan ") + kToolVersion);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;

  auto* train_cmd = app.add_subcommand("train", "Train a generator/discriminator pair");
  train_cmd->add_option("--config", config_path, "Config file of key = value lines");
  train_cmd->add_option("--override", overrides, "key=value, applied after the config file")->take_all();
  train_cmd->add_option("--out", out_dir, "Run directory")->required();

  std::string checkpoint;
  std::string input;
  auto* translate_cmd = app.add_subcommand("translate", "Translate every image of a directory");
  translate_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  translate_cmd->add_option("--input", input, "Directory of input images")->required();
  translate_cmd->add_option("--output,--out", out_dir, "Output directory")->required();

  std::string gt;
  std::string det;
  double iou_thr = eval::kDefaultIouThreshold;
  double conf_thr = eval::kDefaultConfidenceThreshold;
  bool eleven_point = false;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Detection metrics against COCO ground truth");
  evaluate_cmd->add_option("--gt", gt, "COCO annotation JSON")->required();
  evaluate_cmd->add_option("--detections", det, "COCO results JSON")->required();
  evaluate_cmd->add_option("--iou-thr", iou_thr, "IoU matching threshold")->capture_default_str();
  evaluate_cmd->add_option("--conf-thr", conf_thr, "Confidence threshold for P/R/F1")->capture_default_str();
  evaluate_cmd->add_flag("--eleven-point", eleven_point, "11-point interpolated AP");
  evaluate_cmd->add_option("--out", out_dir, "Run directory")->required();

  std::string losses;
  std::string metrics;
  auto* report_cmd = app.add_subcommand("report", "Plot loss curves and precision-recall curves");
  report_cmd->add_option("--losses", losses, "Loss log (losses.jsonl)");
  report_cmd->add_option("--metrics", metrics, "Metric report (report.json)");
  report_cmd->add_option("--out", out_dir, "Output directory")->required();

  std::vector<double> lambda_adv;
  std::vector<double> lambda_style;
  std::vector<double> lambda_content;
  std::optional<int> epochs;
  auto* sweep_cmd = app.add_subcommand("sweep", "Contact sheet over a lambda grid");
  sweep_cmd->add_option("--config", config_path, "Config file");
  sweep_cmd->add_option("--override", overrides, "key=value")->take_all();
  sweep_cmd->add_option("--input", input, "Sample image to translate")->required();
  sweep_cmd->add_option("--checkpoint", checkpoint, "Start every cell from this checkpoint");
  sweep_cmd->add_option("--lambda-adv", lambda_adv, "Adversarial weights")->delimiter(',');
  sweep_cmd->add_option("--lambda-style", lambda_style, "Style weights")->delimiter(',');
  sweep_cmd->add_option("--lambda-content", lambda_content, "Content weights")->delimiter(',');
  sweep_cmd->add_option("--epochs", epochs, "Training epochs per cell");
  sweep_cmd->add_option("--out", out_dir, "Run directory")->required();

  std::string manifest;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay_cmd->add_option("manifest", manifest, "manifest.json")->required();
  replay_cmd->add_option("--out", out_dir, "Run directory (defaults to the recorded one)");

  std::string descriptor_out;
  std::uint64_t seed = 0;
  double width = 1.0;
  auto* make_desc_cmd =
      app.add_subcommand("make-descriptor", "Write seeded synthetic descriptor weights (testing only)");
  make_desc_cmd->add_option("--out", descriptor_out, "Weights file")->required();
  make_desc_cmd->add_option("--seed", seed, "Seed")->capture_default_str();
  make_desc_cmd->add_option("--width", width, "Width multiplier")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      app.exit(e, out, err);
      return kExitOk;
    }
    const auto picked = app.get_subcommands();
    err << "biogan: usage error: " << e.what() << "\n\n"
        << (picked.empty() ? app.help() : picked.front()->help());
    return kExitUsage;
  }

  const std::vector<std::string> rest(args.begin() + 1, args.end());
  const Context ctx{out, err, without_out(rest)};
  if (*train_cmd) return cmd_train(ctx, config_path, overrides, out_dir);
  if (*translate_cmd) return cmd_translate(ctx, checkpoint, input, out_dir);
  if (*evaluate_cmd) {
    eval::EvaluateOptions options{iou_thr, conf_thr,
                                  eleven_point ? eval::ApInterpolation::kElevenPoint : eval::ApInterpolation::kAllPoints};
    return cmd_evaluate(ctx, gt, det, out_dir, options);
  }
  if (*report_cmd) return cmd_report(ctx, losses, metrics, out_dir);
  if (*sweep_cmd) {
    return cmd_sweep(ctx, config_path, overrides, input, checkpoint, lambda_adv, lambda_style, lambda_content,
                     epochs, out_dir);
  }
  if (*replay_cmd) return cmd_replay(manifest, out_dir, out, err);
  if (*make_desc_cmd) return cmd_make_descriptor(ctx, descriptor_out, seed, width);
  return kExitUsage;
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
    case ErrorKind::kArgument:
      return kExitUsage;
    case ErrorKind::kNumeric:
    case ErrorKind::kUndefinedStatistic:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const Error& e) {
    err << "biogan: " << to_string(e.kind()) << " error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "biogan: io error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace biogan::cli
