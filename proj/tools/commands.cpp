#include "commands.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "wsol/checkpoint.hpp"
#include "wsol/config.hpp"
#include "wsol/errors.hpp"
#include "wsol/formats.hpp"
#include "wsol/metrics.hpp"
#include "wsol/model.hpp"
#include "wsol/trainer.hpp"

namespace fs = std::filesystem;

namespace wsol::cli {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::vector<double> parse_deltas(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double d = 0.0;
    try {
      d = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError("bad IoU threshold '" + item + "'");
    out.push_back(d);
  }
  if (out.empty()) throw ConfigError("--deltas needs at least one value");
  return out;
}

}  // namespace

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = load_config(args.config);
    apply_overrides(cfg, args.overrides);
    if (args.seed) cfg.train.seed = *args.seed;
    if (!args.ablation.empty()) cfg.train.flags = parse_ablation(args.ablation);
    cfg.finalize();
  } catch (const ConfigError& e) {
    err << "config error: " << args.config.string() << ": " << e.what() << "\n";
    return kBadConfig;
  }

  try {
    make_dir(args.out);
    write_text(args.out / "config.txt", cfg.to_text());
    err << "training " << ablation_name(cfg.train.flags) << " for " << cfg.train.epochs << " epochs\n";
    TrainResult result = train(cfg.train, cfg.synth, [&](const EpochMetrics& m) {
      err << "epoch " << m.epoch << " l_cls=" << m.l_cls << " l_ca=" << m.l_ca << " l_fc=" << m.l_fc
          << " maxboxaccv2=" << fmt(m.maxboxaccv2) << " top1_loc=" << fmt(m.top1_loc)
          << " top1_cls=" << fmt(m.top1_cls) << "\n";
    });
    save_checkpoint(args.out / "checkpoint.wsck", result.model);
    write_text(args.out / "metrics.csv", history_csv(result.history));
    const EpochMetrics& last = result.history.back();
    out << "maxboxaccv2=" << fmt(last.maxboxaccv2) << "\n"
        << "top1_loc=" << fmt(last.top1_loc) << "\n"
        << "top1_cls=" << fmt(last.top1_cls) << "\n";
    return kOk;
  } catch (const NonFiniteLossError& e) {
    err << "training aborted: " << e.what() << "\n";
    return kNonFinite;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

int cmd_score(const ScoreArgs& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    if (args.config) cfg = load_config(*args.config);
    apply_overrides(cfg, args.overrides);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kBadConfig;
  }

  TinyBackbone model;
  try {
    model = load_checkpoint(args.checkpoint);
  } catch (const FormatError& e) {
    err << "corrupt checkpoint " << args.checkpoint.string() << ": " << e.what() << "\n";
    return kBadFile;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }

  try {
    cfg.synth.seed = args.data_seed;
    cfg.synth.n_classes = model.shape.n_classes;
    cfg.synth.validate();
    const std::vector<SynthSample> test = generate_split(cfg.synth, Split::test);
    make_dir(args.out / "maps");
    std::string predictions = "image_id,class\n";
    for (const auto& s : test) {
      const Inference inf = forward_infer(model, s.image);
      write_score_map(args.out / "maps" / (s.image_id + ".wsm"), inf.score_map);
      predictions += s.image_id + "," + std::to_string(inf.predicted) + "\n";
    }
    write_text(args.out / "predictions.csv", predictions);
    write_gt_boxes(args.out / "gt.txt", ground_truth(test));
    out << "n_maps=" << test.size() << "\n";
    return kOk;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  EvalConfig ec;
  try {
    ec.iou_deltas = parse_deltas(args.deltas);
    ec.n_thresholds = args.n_thresholds;
    ec.validate();
  } catch (const std::exception& e) {
    err << "bad arguments: " << e.what() << "\n";
    return kBadConfig;
  }

  std::vector<ScoreMap> maps;
  BoxSets gt;
  try {
    maps = read_score_map_dir(args.maps);
    gt = read_gt_boxes(args.gt);
  } catch (const FormatError& e) {
    err << "bad input file: " << e.what() << "\n";
    return kBadFile;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }

  std::set<std::string> map_ids;
  for (const auto& m : maps) map_ids.insert(m.image_id);
  std::vector<std::string> no_gt, no_map;
  for (const auto& id : map_ids)
    if (!gt.count(id)) no_gt.push_back(id);
  for (const auto& [id, boxes] : gt)
    if (!map_ids.count(id)) no_map.push_back(id);
  if (!no_gt.empty() || !no_map.empty()) {
    for (const auto& id : no_gt) err << "missing ground truth: " << id << "\n";
    for (const auto& id : no_map) err << "missing score map: " << id << "\n";
    return kIdMismatch;
  }
  if (maps.empty()) {
    err << "no score maps in " << args.maps.string() << "\n";
    return kIdMismatch;
  }

  try {
    const MaxBoxAccV2 result = max_box_acc_v2(maps, gt, ec);
    if (args.out) write_text(*args.out, format_report(result));
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", result.mean);
    out << buf << "\n";
    return kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

int cmd_export_heatmap(const ExportArgs& args, std::ostream&, std::ostream& err) {
  Tensor map;
  try {
    map = read_score_map(args.map);
  } catch (const FormatError& e) {
    err << "bad score map " << args.map.string() << ": " << e.what() << "\n";
    return kBadFile;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  try {
    write_pgm(args.out, map);
    return kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weakly supervised object localization on synthetic images"};
  app.require_subcommand(1);

  TrainArgs train_args;
  std::uint64_t seed = 0;
  auto* train = app.add_subcommand("train", "train a model on the synthetic benchmark");
  train->add_option("--config", train_args.config, "run configuration (key = value lines)")->required();
  train->add_option("--out", train_args.out, "output directory")->required();
  auto* seed_opt = train->add_option("--seed", seed, "training seed (overrides train.seed)");
  train->add_option("--ablation", train_args.ablation, "no-ca, no-fc, no-nonlocal, no-dfg or cls-only");
  train->add_option("--set", train_args.overrides, "key=value config override (repeatable)");

  ScoreArgs score_args;
  std::string score_config;
  auto* score = app.add_subcommand("score", "write score maps for the test split");
  score->add_option("--checkpoint", score_args.checkpoint)->required();
  score->add_option("--data-seed", score_args.data_seed)->required();
  score->add_option("--out", score_args.out)->required();
  score->add_option("--config", score_config, "synthetic-data settings");
  score->add_option("--set", score_args.overrides, "key=value config override (repeatable)");

  EvalArgs eval_args;
  std::string eval_out;
  auto* eval = app.add_subcommand("eval", "MaxBoxAcc / MaxBoxAccV2 of a directory of score maps");
  eval->add_option("--maps", eval_args.maps)->required();
  eval->add_option("--gt", eval_args.gt)->required();
  eval->add_option("--deltas", eval_args.deltas);
  eval->add_option("--thresholds", eval_args.n_thresholds, "number of CAM thresholds");
  eval->add_option("--out", eval_out, "report file");

  ExportArgs export_args;
  auto* heat = app.add_subcommand("export-heatmap", "convert a score map to an 8-bit PGM");
  heat->add_option("--map", export_args.map)->required();
  heat->add_option("--out", export_args.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kBadConfig;
  }

  if (train->parsed()) {
    if (seed_opt->count()) train_args.seed = seed;
    return cmd_train(train_args, out, err);
  }
  if (score->parsed()) {
    if (!score_config.empty()) score_args.config = score_config;
    return cmd_score(score_args, out, err);
  }
  if (eval->parsed()) {
    if (!eval_out.empty()) eval_args.out = eval_out;
    return cmd_eval(eval_args, out, err);
  }
  return cmd_export_heatmap(export_args, out, err);
}

}  // namespace wsol::cli
