#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "canfuse/error.hpp"
#include "canfuse/fusionmodel.hpp"
#include "canfuse/neuralnet.hpp"
#include "canfuse/rng.hpp"
#include "canfuse/sync.hpp"

namespace canfuse {

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double lr = 1e-4;
  std::set<int> val_groups = {5};
  std::string dataset_path;  // echoed into reports

  void validate() const {
    if (epochs < 1) fail(errc::invalid_argument, "epochs must be >= 1");
    if (batch_size < 1) fail(errc::invalid_argument, "batch_size must be >= 1");
    if (!(lr > 0.0)) fail(errc::invalid_argument, "lr must be > 0");
    if (val_groups.empty()) fail(errc::invalid_argument, "val_groups must be non-empty");
  }
};

struct EpochStats {
  double train_mse = 0.0;
  double val_rmse = 0.0;
};

struct TrainResult {
  FusedModel model;  // parameters from the best validation epoch
  AdamState adam;
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;  // 0-based index into history
};

inline std::vector<double> predict_all(const FusedModel& model,
                                       const std::vector<SyncedSample>& samples) {
  const bool fused = model.config.variant == Variant::fused;
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    out.push_back(predict(model, s.image, fused ? s.can_features.data() : nullptr));
  }
  return out;
}

// RMSE of model predictions against the stored steering angles.
inline double evaluate(const FusedModel& model, const std::vector<SyncedSample>& samples) {
  if (samples.empty()) fail(errc::empty_input, "evaluate: no samples");
  if (model.config.variant == Variant::fused && model.config.can_dim != 5) {
    fail(errc::variant_mismatch, "evaluate: fused model requires 5 CAN features");
  }
  const std::vector<double> preds = predict_all(model, samples);
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double d = preds[i] - samples[i].steering_angle;
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(samples.size()));
}

namespace detail {

// per-feature mean and population std over the train split
inline void can_statistics(const std::vector<SyncedSample>& train,
                           std::vector<double>& offset, std::vector<double>& scale) {
  offset.assign(5, 0.0);
  scale.assign(5, 1.0);
  const double n = static_cast<double>(train.size());
  for (const auto& s : train) {
    for (std::size_t f = 0; f < 5; ++f) offset[f] += s.can_features[f];
  }
  for (double& v : offset) v /= n;
  std::vector<double> var(5, 0.0);
  for (const auto& s : train) {
    for (std::size_t f = 0; f < 5; ++f) {
      const double d = s.can_features[f] - offset[f];
      var[f] += d * d;
    }
  }
  for (std::size_t f = 0; f < 5; ++f) {
    scale[f] = std::max(std::sqrt(var[f] / n), 1e-8);
  }
}

}  // namespace detail

// Mini-batch Adam on MSE with deterministic shuffling; keeps the parameters
// of the epoch with the lowest validation RMSE.
inline TrainResult train(const ExperimentConfig& config, Variant variant,
                         const std::vector<SyncedSample>& dataset) {
  config.validate();
  const SplitResult split = split_groups(dataset, config.val_groups);

  ModelConfig mc;
  mc.variant = variant;
  mc.seed = config.seed;
  mc.input_h = split.train.front().image.height;
  mc.input_w = split.train.front().image.width;
  mc.channels = split.train.front().image.channels;
  detail::can_statistics(split.train, mc.can_offset, mc.can_scale);

  FusedModel model = FusedModel::build(mc);
  auto params = model.parameters();
  AdamState adam = AdamState::init({params.data(), params.size()}, config.lr);
  Gradients grads = Gradients::zeros_like(model);
  ForwardContext ctx;

  Rng shuffle_rng(config.seed, "shuffle");
  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const bool fused = variant == Variant::fused;
  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_params;
  AdamState best_adam;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_sq_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(start + config.batch_size, order.size());
      grads.reset();
      double batch_sq_sum = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const SyncedSample& s = split.train[order[k]];
        batch_sq_sum += backward(model, s.image,
                                 fused ? s.can_features.data() : nullptr,
                                 s.steering_angle, ctx, grads);
      }
      if (!std::isfinite(batch_sq_sum)) {
        fail(errc::diverged_loss,
             "non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch starting " +
                 std::to_string(start));
      }
      grads.scale(1.0 / static_cast<double>(end - start));
      adam_step({params.data(), params.size()}, grads.tensors, adam);
      epoch_sq_sum += batch_sq_sum;
    }

    EpochStats stats;
    stats.train_mse = epoch_sq_sum / static_cast<double>(split.train.size());
    stats.val_rmse = evaluate(model, split.val);
    result.history.push_back(stats);

    if (stats.val_rmse < best_val) {
      best_val = stats.val_rmse;
      result.best_epoch = epoch;
      best_params.clear();
      for (const Tensor* p : params) best_params.push_back(*p);
      best_adam = adam;
    }
  }

  if (best_params.empty()) {
    fail(errc::diverged_loss, "validation RMSE was never finite");
  }
  for (std::size_t i = 0; i < params.size(); ++i) *params[i] = std::move(best_params[i]);
  result.model = std::move(model);
  result.adam = std::move(best_adam);
  return result;
}

// --------------------------------------------------------------------------
// with/without-CAN comparison
// --------------------------------------------------------------------------

struct VariantResult {
  Variant variant = Variant::vision_only;
  double rmse_train = 0.0;
  double rmse_val = 0.0;
};

struct ComparisonReport {
  ExperimentConfig config;
  VariantResult without_can;
  VariantResult with_can;
  double percent_decrease_val = 0.0;
};

// Trains both variants from the same seed and split, evaluates both.
// The variant arguments exist so ablations can pit a variant against
// itself; the report keeps the without/with roles either way.
inline ComparisonReport compare(const ExperimentConfig& config,
                                const std::vector<SyncedSample>& dataset,
                                Variant without = Variant::vision_only,
                                Variant with = Variant::fused) {
  const SplitResult split = split_groups(dataset, config.val_groups);

  ComparisonReport report;
  report.config = config;
  for (int side = 0; side < 2; ++side) {
    const Variant variant = side == 0 ? without : with;
    const TrainResult trained = train(config, variant, dataset);
    VariantResult r;
    r.variant = variant;
    r.rmse_train = evaluate(trained.model, split.train);
    r.rmse_val = evaluate(trained.model, split.val);
    (side == 0 ? report.without_can : report.with_can) = r;
  }
  report.percent_decrease_val = 100.0 *
                                (report.without_can.rmse_val - report.with_can.rmse_val) /
                                report.without_can.rmse_val;
  return report;
}

// --------------------------------------------------------------------------
// JSON reports
// --------------------------------------------------------------------------

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  return {{"seed", c.seed},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"val_groups", std::vector<int>(c.val_groups.begin(), c.val_groups.end())},
          {"dataset", c.dataset_path}};
}

inline nlohmann::json report_to_json(const ComparisonReport& r) {
  const auto variant_json = [](const VariantResult& v) {
    return nlohmann::json{{"variant", variant_name(v.variant)},
                          {"rmse_train", v.rmse_train},
                          {"rmse_val", v.rmse_val}};
  };
  return {{"config", config_to_json(r.config)},
          {"seed", r.config.seed},
          {"without_can", variant_json(r.without_can)},
          {"with_can", variant_json(r.with_can)},
          {"percent_decrease_val", r.percent_decrease_val}};
}

inline nlohmann::json history_to_json(const std::vector<EpochStats>& history,
                                      std::size_t best_epoch) {
  nlohmann::json epochs = nlohmann::json::array();
  for (std::size_t i = 0; i < history.size(); ++i) {
    epochs.push_back({{"epoch", i + 1},
                      {"train_mse", history[i].train_mse},
                      {"val_rmse", history[i].val_rmse}});
  }
  return {{"epochs", epochs}, {"best_epoch", best_epoch + 1}};
}

// write-then-rename so a crashed run never leaves a half-written report
inline void write_json_atomic(const std::string& path, const nlohmann::json& j) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(errc::truncated_file, "cannot open '" + tmp + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) fail(errc::truncated_file, "short write to '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace canfuse
