#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "canfuse/error.hpp"
#include "canfuse/fusionmodel.hpp"
#include "canfuse/neuralnet.hpp"
#include "canfuse/tensor.hpp"

namespace canfuse {

// Checkpoint layout: one JSON config line, then `CFNN1\n`, then the
// parameter tensors (u32 count, and per tensor u32 rank, u32 dims,
// little-endian 64-bit reals), then the Adam state in the same encoding.
inline constexpr char kCheckpointMagic[] = "CFNN1\n";

namespace detail {

// This format is little-endian on disk; the in-memory byte copy below is
// the on-disk layout on every platform this project targets.
static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

inline void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}

inline void put_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}

inline std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) fail(errc::truncated_file, "checkpoint ended early");
  return v;
}

inline std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  if (!in) fail(errc::truncated_file, "checkpoint ended early");
  return v;
}

inline double get_f64(std::istream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  if (!in) fail(errc::truncated_file, "checkpoint ended early");
  return v;
}

inline void put_tensor(std::ostream& out, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
  for (const std::size_t d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
  out.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

inline Tensor get_tensor(std::istream& in) {
  const std::uint32_t rank = get_u32(in);
  if (rank > 8) fail(errc::bad_magic, "implausible tensor rank in checkpoint");
  std::vector<std::size_t> shape(rank);
  for (auto& d : shape) d = get_u32(in);
  Tensor t = Tensor::zeros(shape);
  in.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  if (!in) fail(errc::truncated_file, "checkpoint tensor data ended early");
  return t;
}

inline void put_tensor_list(std::ostream& out, const std::vector<Tensor>& tensors) {
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) put_tensor(out, t);
}

inline std::vector<Tensor> get_tensor_list(std::istream& in) {
  const std::uint32_t n = get_u32(in);
  std::vector<Tensor> tensors;
  tensors.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) tensors.push_back(get_tensor(in));
  return tensors;
}

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"variant", variant_name(c.variant)},
          {"input_h", c.input_h},
          {"input_w", c.input_w},
          {"channels", c.channels},
          {"can_dim", c.can_dim},
          {"mlp_hidden", c.mlp_hidden},
          {"head_hidden", c.head_hidden},
          {"seed", c.seed},
          {"can_offset", c.can_offset},
          {"can_scale", c.can_scale}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.variant = variant_from_name(j.at("variant").get<std::string>());
  c.input_h = j.at("input_h").get<std::size_t>();
  c.input_w = j.at("input_w").get<std::size_t>();
  c.channels = j.at("channels").get<std::size_t>();
  c.can_dim = j.at("can_dim").get<std::size_t>();
  c.mlp_hidden = j.at("mlp_hidden").get<std::vector<std::size_t>>();
  c.head_hidden = j.at("head_hidden").get<std::vector<std::size_t>>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.can_offset = j.at("can_offset").get<std::vector<double>>();
  c.can_scale = j.at("can_scale").get<std::vector<double>>();
  return c;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const FusedModel& model,
                            const AdamState& adam) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::truncated_file, "cannot open '" + path + "' for writing");

  out << detail::config_to_json(model.config).dump() << '\n';
  out.write(kCheckpointMagic, 6);

  const auto params = model.parameters();
  detail::put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const Tensor* p : params) detail::put_tensor(out, *p);

  detail::put_f64(out, adam.lr);
  detail::put_f64(out, adam.beta1);
  detail::put_f64(out, adam.beta2);
  detail::put_f64(out, adam.epsilon);
  detail::put_u64(out, adam.t);
  detail::put_tensor_list(out, adam.m);
  detail::put_tensor_list(out, adam.v);
  if (!out) fail(errc::truncated_file, "short write to '" + path + "'");
}

struct Checkpoint {
  FusedModel model;
  AdamState adam;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::truncated_file, "cannot open checkpoint '" + path + "'");

  std::string header;
  if (!std::getline(in, header)) fail(errc::truncated_file, "missing checkpoint header");
  nlohmann::json j = nlohmann::json::parse(header, nullptr, false);
  if (j.is_discarded()) fail(errc::bad_magic, "checkpoint header is not JSON");

  char magic[6];
  in.read(magic, 6);
  if (!in || std::string_view(magic, 6) != kCheckpointMagic) {
    fail(errc::bad_magic, "bad checkpoint magic");
  }

  Checkpoint ckpt;
  ckpt.model = FusedModel::build(detail::config_from_json(j));

  const std::uint32_t n = detail::get_u32(in);
  auto params = ckpt.model.parameters();
  if (n != params.size()) {
    fail(errc::shape_mismatch, "checkpoint tensor count does not match config");
  }
  for (Tensor* p : params) {
    Tensor loaded = detail::get_tensor(in);
    require_same_shape(*p, loaded, "load_checkpoint");
    *p = std::move(loaded);
  }

  ckpt.adam.lr = detail::get_f64(in);
  ckpt.adam.beta1 = detail::get_f64(in);
  ckpt.adam.beta2 = detail::get_f64(in);
  ckpt.adam.epsilon = detail::get_f64(in);
  ckpt.adam.t = detail::get_u64(in);
  ckpt.adam.m = detail::get_tensor_list(in);
  ckpt.adam.v = detail::get_tensor_list(in);
  return ckpt;
}

}  // namespace canfuse
