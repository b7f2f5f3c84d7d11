// canfuse — CAN-bus / video fusion pipeline CLI.
//
// Subcommands cover the pipeline end to end: decode raw CAN logs into dense
// feature rows, place frame manifests on a unified clock, synchronize the
// two streams into a training dataset, generate synthetic datasets, train
// and evaluate steering models, and run the with/without-CAN comparison.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "canfuse/canfuse.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t pos = csv.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(csv.substr(start));
      break;
    }
    out.push_back(csv.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::set<int> parse_group_set(const std::string& csv) {
  std::set<int> out;
  for (const auto& item : split_list(csv)) out.insert(std::stoi(item));
  return out;
}

std::map<int, int> parse_group_map(const std::string& spec) {
  std::map<int, int> out;
  if (spec.empty()) return out;
  for (const auto& item : split_list(spec)) {
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("--group-map entries must look like SEGMENT=GROUP");
    }
    out[std::stoi(item.substr(0, eq))] = std::stoi(item.substr(eq + 1));
  }
  return out;
}

json error_json(const canfuse::Error& e) {
  return {{"error", e.what()}, {"code", static_cast<int>(e.code())}};
}

// ---------------------------------------------------------------------------
// decode: CAN log -> dense rows CSV
// ---------------------------------------------------------------------------

struct DecodeArgs {
  std::string in, out;
  std::string signals = "Voltage,Current,Power,SteeringSpeed,Speed,SteeringAngle";
  double tick_ms = 1.0;
  double t_start = -1.0;
  double t_end = -1.0;
};

int run_decode(const DecodeArgs& args) {
  std::ifstream in(args.in);
  if (!in) {
    std::cerr << "cannot open '" << args.in << "'\n";
    return 1;
  }
  const auto updates = canfuse::parse_can_log(in);

  const auto names_list = split_list(args.signals);
  if (names_list.size() != 6) {
    std::cerr << "--signals must list 6 names: voltage,current,power,"
                 "steering_speed,speed,steering_angle sources\n";
    return 1;
  }
  canfuse::SignalNames names;
  names.voltage = names_list[0];
  names.current = names_list[1];
  names.power = names_list[2];
  names.steering_speed = names_list[3];
  names.speed = names_list[4];
  names.steering_angle = names_list[5];

  const auto series = canfuse::select_signals(updates, names.as_set());

  // default window: from the latest first-update to just past the latest
  // last-update, so every tick has a value to hold
  double t_start = args.t_start;
  double t_end = args.t_end;
  if (t_start < 0.0 || t_end < 0.0) {
    double latest_first = 0.0;
    double latest_last = 0.0;
    for (const auto& [name, s] : series) {
      if (s.empty()) {
        std::cerr << "signal '" << name << "' has no updates\n";
        return 1;
      }
      latest_first = std::max(latest_first, s.front().first);
      latest_last = std::max(latest_last, s.back().first);
    }
    if (t_start < 0.0) t_start = latest_first;
    if (t_end < 0.0) t_end = latest_last + args.tick_ms;
  }

  const auto rows = canfuse::sample_and_hold(series, args.tick_ms, t_start, t_end, names);
  std::ofstream out(args.out);
  if (!out) {
    std::cerr << "cannot open '" << args.out << "' for writing\n";
    return 1;
  }
  canfuse::write_rows_csv(out, rows);
  std::cerr << "decode: " << rows.size() << " rows [" << t_start << ", " << t_end
            << ") ms -> " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// frames: per-segment manifest -> unified-clock manifest
// ---------------------------------------------------------------------------

struct FramesArgs {
  std::string manifest, out;
  double gap_ms = 203000.0;
};

int run_frames(const FramesArgs& args) {
  std::ifstream in(args.manifest);
  if (!in) {
    std::cerr << "cannot open '" << args.manifest << "'\n";
    return 1;
  }
  const auto records = canfuse::load_manifest(in);
  const auto unified = canfuse::concatenate_segments(records, args.gap_ms);
  std::ofstream out(args.out);
  if (!out) {
    std::cerr << "cannot open '" << args.out << "' for writing\n";
    return 1;
  }
  canfuse::write_manifest(out, unified);
  std::cerr << "frames: " << unified.size() << " records on unified clock -> "
            << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// sync: rows + unified manifest + images -> dataset
// ---------------------------------------------------------------------------

struct SyncArgs {
  std::string rows, frames, frames_dir, out, report;
  std::string group_map;
  std::size_t factor = 25;
  double tol_ms = 30.0;
  double eps = 1e-6;
  std::size_t min_run = 5;
  double delta_thresh = 0.02;
  std::size_t height = 66;
  std::size_t width = 200;
};

std::vector<canfuse::TimedFrame> load_frames(const std::string& manifest_path,
                                             const std::string& frames_dir,
                                             std::size_t height, std::size_t width) {
  std::ifstream in(manifest_path);
  if (!in) canfuse::fail(canfuse::errc::truncated_file, "cannot open '" + manifest_path + "'");
  const auto records = canfuse::load_manifest(in);
  std::vector<canfuse::TimedFrame> frames;
  frames.reserve(records.size());
  for (const auto& rec : records) {
    fs::path p(rec.path);
    if (p.is_relative() && !frames_dir.empty()) p = fs::path(frames_dir) / p;
    canfuse::Image img = canfuse::load_image(p.string());
    frames.push_back({rec, canfuse::resize_bilinear(img, height, width)});
  }
  return frames;
}

int run_sync(const SyncArgs& args) {
  std::ifstream rows_in(args.rows);
  if (!rows_in) {
    std::cerr << "cannot open '" << args.rows << "'\n";
    return 1;
  }
  const auto raw_rows = canfuse::read_rows_csv(rows_in);
  const auto frames = load_frames(args.frames, args.frames_dir, args.height, args.width);

  // landmarks on the raw tick grid for millisecond placement
  const double can_landmark = canfuse::detect_zero_speed_landmark(raw_rows, args.eps, args.min_run);
  const double video_landmark = canfuse::detect_still_frames(frames, args.delta_thresh, args.min_run);
  const double offset = canfuse::align(can_landmark, video_landmark);

  const auto rows = canfuse::downsample(raw_rows, args.factor);
  const auto joined = canfuse::join(frames, rows, offset, args.tol_ms,
                                    parse_group_map(args.group_map));
  if (joined.samples.empty()) {
    std::cerr << "sync: no frame matched a CAN row within tolerance\n";
    return 1;
  }
  canfuse::save_dataset(args.out, joined.samples);

  canfuse::SyncReport report;
  report.offset_ms = offset;
  report.matched = joined.matched;
  report.dropped = joined.dropped;
  for (const auto& s : joined.samples) ++report.groups[s.group_id];

  json group_counts;
  for (const auto& [gid, count] : report.groups) group_counts[std::to_string(gid)] = count;
  const json j = {{"offset_ms", report.offset_ms},
                  {"matched", report.matched},
                  {"dropped", report.dropped},
                  {"groups", group_counts}};
  const std::string report_path =
      args.report.empty() ? args.out + ".report.json" : args.report;
  canfuse::write_json_atomic(report_path, j);
  std::cerr << "sync: offset " << offset << " ms, matched " << joined.matched
            << ", dropped " << joined.dropped << " -> " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// synth: generate a synthetic dataset
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 1;
  std::size_t n = 200;
  double beta = 0.05;
};

int run_synth(const SynthArgs& args) {
  canfuse::SynthConfig config;
  config.seed = args.seed;
  config.n_per_group = args.n;
  config.beta = args.beta;
  const auto samples = canfuse::generate_synthetic(config);
  canfuse::save_dataset(args.out, samples);
  std::cerr << "synth: " << samples.size() << " samples (seed " << args.seed
            << ", beta " << args.beta << ") -> " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// build-dataset: decode + frames + sync in one pass
// ---------------------------------------------------------------------------

struct BuildArgs {
  DecodeArgs decode;
  FramesArgs frames;
  SyncArgs sync;
};

int run_build_dataset(BuildArgs args) {
  const fs::path tmp_dir = fs::temp_directory_path();
  const std::string rows_path = (tmp_dir / "canfuse-rows.csv").string();
  const std::string unified_path = (tmp_dir / "canfuse-unified.csv").string();

  args.decode.out = rows_path;
  if (const int rc = run_decode(args.decode); rc != 0) return rc;
  args.frames.out = unified_path;
  if (const int rc = run_frames(args.frames); rc != 0) return rc;
  args.sync.rows = rows_path;
  args.sync.frames = unified_path;
  return run_sync(args.sync);
}

// ---------------------------------------------------------------------------
// train / eval / compare
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string dataset, out, history;
  canfuse::ExperimentConfig config;
  bool with_can = false;
  bool no_can = false;
};

canfuse::Variant variant_from_flags(bool with_can, bool no_can) {
  if (with_can == no_can) {
    throw CLI::ValidationError("pass exactly one of --with-can / --no-can");
  }
  return with_can ? canfuse::Variant::fused : canfuse::Variant::vision_only;
}

int run_train(TrainArgs& args) {
  args.config.dataset_path = args.dataset;
  const auto variant = variant_from_flags(args.with_can, args.no_can);
  const auto samples = canfuse::load_dataset(args.dataset);
  const auto result = canfuse::train(args.config, variant, samples);
  canfuse::save_checkpoint(args.out, result.model, result.adam);
  if (!args.history.empty()) {
    canfuse::write_json_atomic(args.history,
                               canfuse::history_to_json(result.history, result.best_epoch));
  }
  const auto& best = result.history[result.best_epoch];
  std::cerr << "train: " << canfuse::variant_name(variant) << ", best epoch "
            << result.best_epoch + 1 << "/" << args.config.epochs << ", val RMSE "
            << best.val_rmse << " -> " << args.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string dataset, checkpoint, out, dump_predictions;
};

int run_eval(const EvalArgs& args) {
  const auto samples = canfuse::load_dataset(args.dataset);
  const auto ckpt = canfuse::load_checkpoint(args.checkpoint);
  const double value = canfuse::evaluate(ckpt.model, samples);

  if (!args.dump_predictions.empty()) {
    const auto preds = canfuse::predict_all(ckpt.model, samples);
    json rows = json::array();
    for (std::size_t i = 0; i < preds.size(); ++i) {
      rows.push_back({{"prediction", preds[i]}, {"target", samples[i].steering_angle}});
    }
    canfuse::write_json_atomic(args.dump_predictions, rows);
  }
  const json j = {{"rmse", value},
                  {"variant", canfuse::variant_name(ckpt.model.config.variant)},
                  {"samples", samples.size()}};
  if (!args.out.empty()) {
    canfuse::write_json_atomic(args.out, j);
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

struct CompareArgs {
  std::string dataset;
  std::string out = "report.json";
  canfuse::ExperimentConfig config;
};

int run_compare(CompareArgs& args) {
  args.config.dataset_path = args.dataset;
  const auto samples = canfuse::load_dataset(args.dataset);
  const auto report = canfuse::compare(args.config, samples);
  canfuse::write_json_atomic(args.out, canfuse::report_to_json(report));
  std::cerr << "compare: without " << report.without_can.rmse_val << ", with "
            << report.with_can.rmse_val << " val RMSE; decrease "
            << report.percent_decrease_val << "% -> " << args.out << "\n";
  return 0;
}

void add_experiment_flags(CLI::App* cmd, canfuse::ExperimentConfig& config,
                          std::string& val_groups_csv) {
  cmd->add_option("--seed", config.seed, "experiment seed");
  cmd->add_option("--epochs", config.epochs, "training epochs")->check(CLI::PositiveNumber);
  cmd->add_option("--batch-size", config.batch_size, "mini-batch size")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--lr", config.lr, "Adam learning rate");
  cmd->add_option("--val-groups", val_groups_csv, "validation group ids, comma separated");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CAN-bus / video sensor fusion pipeline"};
  app.require_subcommand(1);

  DecodeArgs decode_args;
  auto* decode = app.add_subcommand("decode", "parse a CAN log into dense feature rows");
  decode->add_option("--in", decode_args.in, "CAN log CSV")->required();
  decode->add_option("--signals", decode_args.signals,
                     "six source signal names, comma separated");
  decode->add_option("--tick-ms", decode_args.tick_ms, "sample-and-hold tick");
  decode->add_option("--t-start", decode_args.t_start, "window start (ms)");
  decode->add_option("--t-end", decode_args.t_end, "window end (ms, exclusive)");
  decode->add_option("--out", decode_args.out, "output rows CSV")->required();

  FramesArgs frames_args;
  auto* frames = app.add_subcommand("frames", "place segment manifests on one clock");
  frames->add_option("--manifest", frames_args.manifest, "per-segment manifest CSV")->required();
  frames->add_option("--gap-ms", frames_args.gap_ms, "inter-segment save gap (ms)");
  frames->add_option("--out", frames_args.out, "unified manifest CSV")->required();

  SyncArgs sync_args;
  auto* sync = app.add_subcommand("sync", "synchronize rows and frames into a dataset");
  sync->add_option("--rows", sync_args.rows, "dense rows CSV")->required();
  sync->add_option("--frames", sync_args.frames, "unified manifest CSV")->required();
  sync->add_option("--frames-dir", sync_args.frames_dir, "base directory for frame paths");
  sync->add_option("--factor", sync_args.factor, "block-mean downsample factor");
  sync->add_option("--tol-ms", sync_args.tol_ms, "join tolerance (ms)");
  sync->add_option("--eps", sync_args.eps, "zero-speed threshold");
  sync->add_option("--min-run", sync_args.min_run, "minimum landmark run length");
  sync->add_option("--delta-thresh", sync_args.delta_thresh,
                   "still-frame mean-absolute-difference threshold");
  sync->add_option("--height", sync_args.height, "dataset image height");
  sync->add_option("--width", sync_args.width, "dataset image width");
  sync->add_option("--group-map", sync_args.group_map,
                   "segment to group mapping, e.g. 1=1,2=1,3=2");
  sync->add_option("--out", sync_args.out, "output dataset (.cfz)")->required();
  sync->add_option("--report", sync_args.report, "sync report JSON path");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--seed", synth_args.seed, "generator seed");
  synth->add_option("--n", synth_args.n, "samples per group")->check(CLI::PositiveNumber);
  synth->add_option("--beta", synth_args.beta, "weight of the CAN-only label term");
  synth->add_option("--out", synth_args.out, "output dataset (.cfz)")->required();

  BuildArgs build_args;
  auto* build = app.add_subcommand("build-dataset", "decode + frames + sync in one pass");
  build->add_option("--log", build_args.decode.in, "CAN log CSV")->required();
  build->add_option("--signals", build_args.decode.signals, "six source signal names");
  build->add_option("--tick-ms", build_args.decode.tick_ms, "sample-and-hold tick");
  build->add_option("--manifest", build_args.frames.manifest, "per-segment manifest")->required();
  build->add_option("--gap-ms", build_args.frames.gap_ms, "inter-segment save gap (ms)");
  build->add_option("--frames-dir", build_args.sync.frames_dir, "base directory for frames");
  build->add_option("--factor", build_args.sync.factor, "downsample factor");
  build->add_option("--tol-ms", build_args.sync.tol_ms, "join tolerance (ms)");
  build->add_option("--eps", build_args.sync.eps, "zero-speed threshold");
  build->add_option("--min-run", build_args.sync.min_run, "minimum landmark run length");
  build->add_option("--delta-thresh", build_args.sync.delta_thresh, "still-frame threshold");
  build->add_option("--height", build_args.sync.height, "dataset image height");
  build->add_option("--width", build_args.sync.width, "dataset image width");
  build->add_option("--group-map", build_args.sync.group_map, "segment to group mapping");
  build->add_option("--out", build_args.sync.out, "output dataset (.cfz)")->required();
  build->add_option("--report", build_args.sync.report, "sync report JSON path");

  TrainArgs train_args;
  std::string train_val_groups;
  auto* train = app.add_subcommand("train", "train one variant on a dataset");
  train->add_option("--dataset", train_args.dataset, "dataset (.cfz)")->required();
  add_experiment_flags(train, train_args.config, train_val_groups);
  train->add_flag("--with-can", train_args.with_can, "train the fused variant");
  train->add_flag("--no-can", train_args.no_can, "train the vision-only variant");
  train->add_option("--out", train_args.out, "output checkpoint")->required();
  train->add_option("--history", train_args.history, "per-epoch history JSON");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval->add_option("--dataset", eval_args.dataset, "dataset (.cfz)")->required();
  eval->add_option("--checkpoint", eval_args.checkpoint, "model checkpoint")->required();
  eval->add_option("--out", eval_args.out, "evaluation JSON path");
  eval->add_option("--dump-predictions", eval_args.dump_predictions,
                   "write per-sample predictions JSON");

  CompareArgs compare_args;
  std::string compare_val_groups;
  auto* compare = app.add_subcommand("compare", "train and evaluate both variants");
  compare->add_option("--dataset", compare_args.dataset, "dataset (.cfz)")->required();
  add_experiment_flags(compare, compare_args.config, compare_val_groups);
  compare->add_option("--out", compare_args.out, "report JSON path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*decode) return run_decode(decode_args);
    if (*frames) return run_frames(frames_args);
    if (*sync) return run_sync(sync_args);
    if (*synth) return run_synth(synth_args);
    if (*build) return run_build_dataset(build_args);
    if (*train) {
      if (!train_val_groups.empty()) train_args.config.val_groups = parse_group_set(train_val_groups);
      return run_train(train_args);
    }
    if (*eval) return run_eval(eval_args);
    if (*compare) {
      if (!compare_val_groups.empty()) {
        compare_args.config.val_groups = parse_group_set(compare_val_groups);
      }
      return run_compare(compare_args);
    }
  } catch (const canfuse::Error& e) {
    std::cerr << error_json(e).dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << "\n";
    return 2;
  }
  return 1;
}
