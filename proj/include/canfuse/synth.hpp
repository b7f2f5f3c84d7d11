#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "canfuse/error.hpp"
#include "canfuse/image.hpp"
#include "canfuse/rng.hpp"
#include "canfuse/sync.hpp"

namespace canfuse {

// Desk-scale stand-in for a real drive: each sample renders a bright lane
// line whose slope drives the label, and carries CAN features whose speed
// term also drives the label but is invisible in the pixels. A model can
// reach the noise floor only by fusing both inputs.
struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t n_per_group = 200;
  int groups = 5;
  // weight of the speed term in the label; 0 removes the CAN-only signal
  double beta = 0.05;
  std::size_t image_h = 66;
  std::size_t image_w = 200;
};

namespace synth {

inline constexpr double kAlpha = 1.0;       // slope term weight, degrees
inline constexpr double kLabelNoiseSd = 0.1;
inline constexpr double kFramePeriodMs = 1000.0 / 36.0;
inline constexpr double kGroupGapMs = 203000.0;
// per-group mean speeds: residential-heavy groups sit low, highway high
inline constexpr std::array<double, 5> kGroupSpeedMean = {32.0, 65.0, 47.0, 63.0, 30.0};
inline constexpr double kSpeedJitter = 8.0;
inline constexpr double kSpeedCenter =
    (kGroupSpeedMean[0] + kGroupSpeedMean[1] + kGroupSpeedMean[2] + kGroupSpeedMean[3] +
     kGroupSpeedMean[4]) /
    5.0;
inline constexpr double kSteeringSpeedNoiseSd = 0.5;

// Anti-aliased line through the image centre with the given slope;
// sub-pixel position keeps the slope recoverable from pixels.
inline Image render_lane_line(double slope, std::size_t h, std::size_t w) {
  Image img = Image::zeros(h, w, 3);
  const double y_mid = static_cast<double>(h - 1) / 2.0;
  const double x_mid = static_cast<double>(w - 1) / 2.0;
  const double reach = (x_mid - 3.0) / y_mid;  // keeps |slope| <= 1 inside the frame
  constexpr double kHalfWidth = 2.0;
  constexpr std::array<double, 3> kTint = {1.0, 0.95, 0.8};
  for (std::size_t y = 0; y < h; ++y) {
    const double xc = x_mid + slope * (static_cast<double>(y) - y_mid) * reach;
    const auto lo = static_cast<std::size_t>(
        std::max(0.0, std::floor(xc - kHalfWidth)));
    const auto hi = static_cast<std::size_t>(
        std::min(static_cast<double>(w - 1), std::ceil(xc + kHalfWidth)));
    for (std::size_t x = lo; x <= hi; ++x) {
      const double value =
          std::max(0.0, 1.0 - std::abs(static_cast<double>(x) - xc) / kHalfWidth);
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = value * kTint[c];
    }
  }
  return img;
}

}  // namespace synth

inline std::vector<SyncedSample> generate_synthetic(const SynthConfig& config) {
  if (config.groups != 5) {
    fail(errc::bad_group_count, "generate_synthetic: exactly 5 groups, got " +
                                    std::to_string(config.groups));
  }
  if (config.n_per_group < 10) {
    fail(errc::invalid_argument, "generate_synthetic: n_per_group must be >= 10");
  }

  Rng rng(config.seed, "data");
  std::vector<SyncedSample> samples;
  samples.reserve(config.n_per_group * 5);

  for (int g = 1; g <= 5; ++g) {
    const double group_t0 = static_cast<double>(g - 1) *
                            (static_cast<double>(config.n_per_group) * synth::kFramePeriodMs +
                             synth::kGroupGapMs);
    const std::size_t base = samples.size();
    for (std::size_t i = 0; i < config.n_per_group; ++i) {
      const double slope = rng.uniform(-1.0, 1.0);
      const double speed = synth::kGroupSpeedMean[g - 1] +
                           rng.uniform(-synth::kSpeedJitter, synth::kSpeedJitter);
      const double voltage = rng.uniform(395.0, 405.0);
      const double current = rng.uniform(-125.0, -95.0);
      const double noise = rng.normal() * synth::kLabelNoiseSd;

      SyncedSample s;
      s.timestamp_ms = group_t0 + static_cast<double>(i) * synth::kFramePeriodMs;
      s.group_id = g;
      s.image = synth::render_lane_line(slope, config.image_h, config.image_w);
      s.steering_angle = synth::kAlpha * slope +
                         config.beta * (speed - synth::kSpeedCenter) + noise;
      s.can_features = {voltage, current, voltage * current / 1000.0, 0.0, speed};
      samples.push_back(std::move(s));
    }
    // steering speed as a noisy central-difference derivative of the label
    // trajectory; a central difference of independent draws carries no
    // information about the middle sample's own label
    for (std::size_t i = 0; i < config.n_per_group; ++i) {
      const std::size_t idx = base + i;
      double derivative = 0.0;
      if (i > 0 && i + 1 < config.n_per_group) {
        const auto& prev = samples[idx - 1];
        const auto& next = samples[idx + 1];
        derivative = (next.steering_angle - prev.steering_angle) /
                     (next.timestamp_ms - prev.timestamp_ms) * 1000.0;
      }
      samples[idx].can_features[3] =
          derivative + rng.normal() * synth::kSteeringSpeedNoiseSd;
    }
  }
  return samples;
}

inline std::vector<SyncedSample> generate_synthetic(std::uint64_t seed,
                                                    std::size_t n_per_group,
                                                    int groups = 5) {
  SynthConfig config;
  config.seed = seed;
  config.n_per_group = n_per_group;
  config.groups = groups;
  return generate_synthetic(config);
}

}  // namespace canfuse
