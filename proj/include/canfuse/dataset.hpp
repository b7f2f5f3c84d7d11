#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "canfuse/error.hpp"
#include "canfuse/sync.hpp"

namespace canfuse {

// .cfz container: magic `CANFUSE1`, version byte 1, u32 little-endian
// counts (n_samples, h, w, c, can_dim), then per sample: timestamp f64,
// group_id u8, can_features f64[can_dim], steering_angle f64,
// pixels f64[h*w*c].
inline constexpr char kDatasetMagic[] = "CANFUSE1";
inline constexpr std::uint8_t kDatasetVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "dataset writer assumes a little-endian host");

inline void dataset_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

inline std::uint32_t dataset_read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) fail(errc::truncated_file, "dataset ended early");
  return v;
}

}  // namespace detail

inline void save_dataset(const std::string& path, const std::vector<SyncedSample>& samples) {
  if (samples.empty()) fail(errc::empty_input, "save_dataset: refusing to save empty dataset");
  const auto& first = samples.front();
  const std::size_t h = first.image.height;
  const std::size_t w = first.image.width;
  const std::size_t c = first.image.channels;
  for (const auto& s : samples) {
    if (s.image.height != h || s.image.width != w || s.image.channels != c) {
      fail(errc::geometry_mismatch, "save_dataset: samples must share image geometry");
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::truncated_file, "cannot open '" + path + "' for writing");
  out.write(kDatasetMagic, 8);
  out.put(static_cast<char>(kDatasetVersion));
  detail::dataset_u32(out, static_cast<std::uint32_t>(samples.size()));
  detail::dataset_u32(out, static_cast<std::uint32_t>(h));
  detail::dataset_u32(out, static_cast<std::uint32_t>(w));
  detail::dataset_u32(out, static_cast<std::uint32_t>(c));
  detail::dataset_u32(out, static_cast<std::uint32_t>(first.can_features.size()));

  for (const auto& s : samples) {
    out.write(reinterpret_cast<const char*>(&s.timestamp_ms), 8);
    out.put(static_cast<char>(s.group_id));
    out.write(reinterpret_cast<const char*>(s.can_features.data()),
              static_cast<std::streamsize>(s.can_features.size() * 8));
    out.write(reinterpret_cast<const char*>(&s.steering_angle), 8);
    out.write(reinterpret_cast<const char*>(s.image.pixels.data()),
              static_cast<std::streamsize>(s.image.pixels.size() * 8));
  }
  if (!out) fail(errc::truncated_file, "short write to '" + path + "'");
}

inline std::vector<SyncedSample> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::truncated_file, "cannot open dataset '" + path + "'");

  char magic[8];
  in.read(magic, 8);
  if (!in || std::string_view(magic, 8) != kDatasetMagic) {
    fail(errc::bad_magic, "bad dataset magic");
  }
  const int version = in.get();
  if (version != kDatasetVersion) {
    fail(errc::version_mismatch,
         "dataset version " + std::to_string(version) + ", expected " +
             std::to_string(kDatasetVersion));
  }

  const std::uint32_t n = detail::dataset_read_u32(in);
  const std::uint32_t h = detail::dataset_read_u32(in);
  const std::uint32_t w = detail::dataset_read_u32(in);
  const std::uint32_t c = detail::dataset_read_u32(in);
  const std::uint32_t can_dim = detail::dataset_read_u32(in);
  if (can_dim != 5) {
    fail(errc::version_mismatch, "dataset can_dim " + std::to_string(can_dim) + ", expected 5");
  }

  std::vector<SyncedSample> samples(n);
  for (auto& s : samples) {
    in.read(reinterpret_cast<char*>(&s.timestamp_ms), 8);
    const int group = in.get();
    if (group == EOF) fail(errc::truncated_file, "dataset ended early");
    s.group_id = group;
    in.read(reinterpret_cast<char*>(s.can_features.data()), 5 * 8);
    in.read(reinterpret_cast<char*>(&s.steering_angle), 8);
    s.image = Image::zeros(h, w, c);
    in.read(reinterpret_cast<char*>(s.image.pixels.data()),
            static_cast<std::streamsize>(s.image.pixels.size() * 8));
    if (!in) fail(errc::truncated_file, "dataset ended early");
  }
  return samples;
}

}  // namespace canfuse
