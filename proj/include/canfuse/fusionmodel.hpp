#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "canfuse/error.hpp"
#include "canfuse/image.hpp"
#include "canfuse/neuralnet.hpp"
#include "canfuse/rng.hpp"
#include "canfuse/tensor.hpp"

namespace canfuse {

enum class Variant { vision_only, fused };

inline std::string variant_name(Variant v) {
  return v == Variant::vision_only ? "vision_only" : "fused";
}

inline Variant variant_from_name(const std::string& name) {
  if (name == "vision_only") return Variant::vision_only;
  if (name == "fused") return Variant::fused;
  fail(errc::config_mismatch, "unknown variant '" + name + "'");
}

struct ModelConfig {
  Variant variant = Variant::fused;
  std::size_t input_h = 66;
  std::size_t input_w = 200;
  std::size_t channels = 3;
  std::size_t can_dim = 5;
  std::vector<std::size_t> mlp_hidden{64, 32};
  std::vector<std::size_t> head_hidden{32, 16};
  std::uint64_t seed = 0;
  // fixed per-feature affine applied before the MLP: (x - offset) / scale.
  // Training fills these from train-split statistics; identity by default.
  std::vector<double> can_offset = std::vector<double>(5, 0.0);
  std::vector<double> can_scale = std::vector<double>(5, 1.0);

  bool operator==(const ModelConfig&) const = default;
};

// DAVE-2 convolution stack: out_c, kernel, stride
inline constexpr struct {
  std::size_t out_c, k, stride;
} kDave2Conv[5] = {{24, 5, 2}, {36, 5, 2}, {48, 5, 2}, {64, 3, 1}, {64, 3, 1}};

inline constexpr std::size_t kDave2Dense[3] = {100, 50, 10};
inline constexpr std::size_t kVisionEmbedding = 10;

struct ConvLayer {
  Tensor kernel;  // [out_c, kh, kw, in_c]
  Tensor bias;    // [out_c]
  std::size_t stride = 1;
};

struct DenseLayer {
  Tensor weights;  // [n_out, n_in]
  Tensor bias;     // [n_out]
};

struct VisionBranch {
  std::vector<ConvLayer> conv;
  std::vector<DenseLayer> dense;  // 100 -> 50 -> 10, ReLU throughout
  std::size_t flatten_width = 0;
};

struct MlpBranch {
  std::vector<DenseLayer> dense;  // 5 -> 64 -> 32, ReLU throughout
};

struct HeadBranch {
  std::vector<DenseLayer> hidden;  // ReLU
  DenseLayer out;                  // linear, width 1
};

namespace detail {

// Glorot-uniform weights from a per-layer named stream; zero biases.
inline Tensor glorot(std::vector<std::size_t> shape, std::size_t fan_in,
                     std::size_t fan_out, std::uint64_t seed, const std::string& name) {
  Rng rng(seed, "init/" + name);
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-limit, limit);
  return t;
}

inline DenseLayer make_dense(std::size_t n_in, std::size_t n_out, std::uint64_t seed,
                             const std::string& name) {
  DenseLayer layer;
  layer.weights = glorot({n_out, n_in}, n_in, n_out, seed, name);
  layer.bias = Tensor::zeros({n_out});
  return layer;
}

}  // namespace detail

// --------------------------------------------------------------------------
// branch builders
// --------------------------------------------------------------------------

// Normalization (2x - 1), five convolutions, flatten, dense 100/50/10;
// ReLU after every learned layer. Emits a 10-wide embedding.
inline VisionBranch build_dave2_branch(const ModelConfig& config) {
  if (config.input_h != 66 || config.input_w != 200 || config.channels != 3) {
    fail(errc::config_mismatch,
         "DAVE-2 branch requires 66x200x3 input, got " + std::to_string(config.input_h) +
             "x" + std::to_string(config.input_w) + "x" + std::to_string(config.channels));
  }
  VisionBranch branch;
  std::size_t h = config.input_h, w = config.input_w, c = config.channels;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto spec = kDave2Conv[i];
    ConvLayer layer;
    layer.kernel = detail::glorot({spec.out_c, spec.k, spec.k, c},
                                  spec.k * spec.k * c, spec.k * spec.k * spec.out_c,
                                  config.seed, "vision.conv" + std::to_string(i));
    layer.bias = Tensor::zeros({spec.out_c});
    layer.stride = spec.stride;
    branch.conv.push_back(std::move(layer));
    h = (h - spec.k) / spec.stride + 1;
    w = (w - spec.k) / spec.stride + 1;
    c = spec.out_c;
  }
  branch.flatten_width = h * w * c;
  std::size_t width = branch.flatten_width;
  for (std::size_t i = 0; i < 3; ++i) {
    branch.dense.push_back(detail::make_dense(width, kDave2Dense[i], config.seed,
                                              "vision.dense" + std::to_string(i)));
    width = kDave2Dense[i];
  }
  return branch;
}

inline MlpBranch build_can_mlp(const ModelConfig& config) {
  if (config.can_dim != 5) {
    fail(errc::config_mismatch,
         "CAN MLP requires can_dim 5, got " + std::to_string(config.can_dim));
  }
  if (config.mlp_hidden.empty()) fail(errc::config_mismatch, "mlp_hidden must be non-empty");
  MlpBranch branch;
  std::size_t width = config.can_dim;
  for (std::size_t i = 0; i < config.mlp_hidden.size(); ++i) {
    branch.dense.push_back(detail::make_dense(width, config.mlp_hidden[i], config.seed,
                                              "mlp.dense" + std::to_string(i)));
    width = config.mlp_hidden[i];
  }
  return branch;
}

// Two ReLU dense layers on the (possibly concatenated) embeddings, then a
// linear scalar output.
inline HeadBranch build_head(const ModelConfig& config) {
  std::size_t width = kVisionEmbedding;
  if (config.variant == Variant::fused) {
    if (config.mlp_hidden.empty()) fail(errc::config_mismatch, "mlp_hidden must be non-empty");
    width += config.mlp_hidden.back();
  }
  HeadBranch head;
  for (std::size_t i = 0; i < config.head_hidden.size(); ++i) {
    head.hidden.push_back(detail::make_dense(width, config.head_hidden[i], config.seed,
                                             "head.dense" + std::to_string(i)));
    width = config.head_hidden[i];
  }
  head.out = detail::make_dense(width, 1, config.seed, "head.out");
  return head;
}

// --------------------------------------------------------------------------
// assembled model
// --------------------------------------------------------------------------

struct FusedModel {
  ModelConfig config;
  VisionBranch vision;
  MlpBranch mlp;  // empty for vision_only
  HeadBranch head;

  static FusedModel build(const ModelConfig& config) {
    if (config.can_offset.size() != config.can_dim ||
        config.can_scale.size() != config.can_dim) {
      fail(errc::config_mismatch, "can_offset/can_scale must have can_dim entries");
    }
    FusedModel model;
    model.config = config;
    model.vision = build_dave2_branch(config);
    if (config.variant == Variant::fused) model.mlp = build_can_mlp(config);
    model.head = build_head(config);
    return model;
  }

  // Stable ordering: vision (conv then dense), mlp, head; kernel/weights
  // before bias within a layer. Optimizer and checkpoints rely on it.
  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> out;
    for (auto& l : vision.conv) {
      out.push_back(&l.kernel);
      out.push_back(&l.bias);
    }
    for (auto& l : vision.dense) {
      out.push_back(&l.weights);
      out.push_back(&l.bias);
    }
    for (auto& l : mlp.dense) {
      out.push_back(&l.weights);
      out.push_back(&l.bias);
    }
    for (auto& l : head.hidden) {
      out.push_back(&l.weights);
      out.push_back(&l.bias);
    }
    out.push_back(&head.out.weights);
    out.push_back(&head.out.bias);
    return out;
  }

  std::vector<const Tensor*> parameters() const {
    auto mutable_view = const_cast<FusedModel*>(this)->parameters();
    return {mutable_view.begin(), mutable_view.end()};
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Tensor* t : parameters()) n += t->numel();
    return n;
  }
};

// --------------------------------------------------------------------------
// forward / backward
// --------------------------------------------------------------------------

// Per-sample activations and scratch, reusable across calls.
struct ForwardContext {
  Tensor norm;  // 2x - 1 of the input image
  std::vector<Tensor> conv_pre, conv_act;
  std::vector<ConvWorkspace> conv_ws;
  Tensor flat;
  std::vector<Tensor> vis_pre, vis_act;
  Tensor can_in;  // standardized CAN vector
  std::vector<Tensor> mlp_pre, mlp_act;
  Tensor head_in;
  std::vector<Tensor> head_pre, head_act;
  double output = 0.0;
};

namespace detail {

inline void check_inputs(const FusedModel& model, const Image& image,
                         const double* can) {
  const auto& c = model.config;
  if (image.height != c.input_h || image.width != c.input_w ||
      image.channels != c.channels) {
    fail(errc::geometry_mismatch,
         "image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
             "x" + std::to_string(image.channels) + " does not match model input " +
             std::to_string(c.input_h) + "x" + std::to_string(c.input_w) + "x" +
             std::to_string(c.channels));
  }
  if (c.variant == Variant::fused && can == nullptr) {
    fail(errc::missing_can_features, "fused model requires CAN features");
  }
  if (c.variant == Variant::vision_only && can != nullptr) {
    fail(errc::unexpected_can_features, "vision_only model takes no CAN features");
  }
}

}  // namespace detail

inline double forward(const FusedModel& model, const Image& image, const double* can,
                      ForwardContext& ctx) {
  detail::check_inputs(model, image, can);
  const auto& config = model.config;

  // vision branch: pixels [0,1] -> [-1,1]
  ctx.norm.shape = {config.input_h, config.input_w, config.channels};
  ctx.norm.data.resize(image.pixels.size());
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    ctx.norm.data[i] = 2.0 * image.pixels[i] - 1.0;
  }

  const std::size_t n_conv = model.vision.conv.size();
  ctx.conv_pre.resize(n_conv);
  ctx.conv_act.resize(n_conv);
  ctx.conv_ws.resize(n_conv);
  const Tensor* cursor = &ctx.norm;
  for (std::size_t i = 0; i < n_conv; ++i) {
    const auto& layer = model.vision.conv[i];
    ctx.conv_pre[i] =
        conv2d_forward(*cursor, layer.kernel, layer.bias, layer.stride, ctx.conv_ws[i]);
    ctx.conv_act[i] = relu(ctx.conv_pre[i]);
    cursor = &ctx.conv_act[i];
  }

  ctx.flat = *cursor;
  ctx.flat.shape = {model.vision.flatten_width};

  const std::size_t n_vis = model.vision.dense.size();
  ctx.vis_pre.resize(n_vis);
  ctx.vis_act.resize(n_vis);
  const Tensor* vis_cursor = &ctx.flat;
  for (std::size_t i = 0; i < n_vis; ++i) {
    const auto& layer = model.vision.dense[i];
    ctx.vis_pre[i] = dense_forward(*vis_cursor, layer.weights, layer.bias);
    ctx.vis_act[i] = relu(ctx.vis_pre[i]);
    vis_cursor = &ctx.vis_act[i];
  }

  // MLP branch on standardized CAN features
  const Tensor* mlp_out = nullptr;
  if (config.variant == Variant::fused) {
    ctx.can_in.shape = {config.can_dim};
    ctx.can_in.data.resize(config.can_dim);
    for (std::size_t i = 0; i < config.can_dim; ++i) {
      ctx.can_in.data[i] = (can[i] - config.can_offset[i]) / config.can_scale[i];
    }
    const std::size_t n_mlp = model.mlp.dense.size();
    ctx.mlp_pre.resize(n_mlp);
    ctx.mlp_act.resize(n_mlp);
    const Tensor* mlp_cursor = &ctx.can_in;
    for (std::size_t i = 0; i < n_mlp; ++i) {
      const auto& layer = model.mlp.dense[i];
      ctx.mlp_pre[i] = dense_forward(*mlp_cursor, layer.weights, layer.bias);
      ctx.mlp_act[i] = relu(ctx.mlp_pre[i]);
      mlp_cursor = &ctx.mlp_act[i];
    }
    mlp_out = mlp_cursor;
  }

  // concatenated head input
  const Tensor& vis_emb = *vis_cursor;
  const std::size_t head_width = vis_emb.numel() + (mlp_out ? mlp_out->numel() : 0);
  ctx.head_in.shape = {head_width};
  ctx.head_in.data.resize(head_width);
  std::copy(vis_emb.data.begin(), vis_emb.data.end(), ctx.head_in.data.begin());
  if (mlp_out) {
    std::copy(mlp_out->data.begin(), mlp_out->data.end(),
              ctx.head_in.data.begin() + static_cast<std::ptrdiff_t>(vis_emb.numel()));
  }

  const std::size_t n_head = model.head.hidden.size();
  ctx.head_pre.resize(n_head);
  ctx.head_act.resize(n_head);
  const Tensor* head_cursor = &ctx.head_in;
  for (std::size_t i = 0; i < n_head; ++i) {
    const auto& layer = model.head.hidden[i];
    ctx.head_pre[i] = dense_forward(*head_cursor, layer.weights, layer.bias);
    ctx.head_act[i] = relu(ctx.head_pre[i]);
    head_cursor = &ctx.head_act[i];
  }
  const Tensor out = dense_forward(*head_cursor, model.head.out.weights, model.head.out.bias);
  ctx.output = out.data[0];
  return ctx.output;
}

// Gradient bundle aligned with FusedModel::parameters().
struct Gradients {
  std::vector<Tensor> tensors;
  Tensor d_image;              // d loss / d pixels, filled on request
  std::vector<double> d_can;   // d loss / d raw CAN features

  static Gradients zeros_like(const FusedModel& model) {
    Gradients g;
    for (const Tensor* p : model.parameters()) g.tensors.push_back(Tensor::zeros(p->shape));
    g.d_can.assign(model.config.can_dim, 0.0);
    return g;
  }

  void reset() {
    for (Tensor& t : tensors) t.fill(0.0);
    d_image.fill(0.0);
    std::fill(d_can.begin(), d_can.end(), 0.0);
  }

  void scale(double s) {
    for (Tensor& t : tensors) {
      for (double& v : t.data) v *= s;
    }
  }
};

// Runs forward, then accumulates exact gradients of the squared error
// (pred - target)^2 into `grads`. Returns the per-sample loss.
inline double backward(const FusedModel& model, const Image& image, const double* can,
                       double target, ForwardContext& ctx, Gradients& grads,
                       bool input_grads = false) {
  const double pred = forward(model, image, can, ctx);
  const double residual = pred - target;
  const double loss = residual * residual;

  // index parameters the same way parameters() orders them
  const std::size_t n_conv = model.vision.conv.size();
  const std::size_t n_vis = model.vision.dense.size();
  const std::size_t n_mlp = model.mlp.dense.size();
  const std::size_t n_head = model.head.hidden.size();
  const std::size_t vis_dense_base = 2 * n_conv;
  const std::size_t mlp_base = vis_dense_base + 2 * n_vis;
  const std::size_t head_base = mlp_base + 2 * n_mlp;
  const std::size_t out_base = head_base + 2 * n_head;

  Tensor d_out = Tensor::vector({2.0 * residual});

  // head output layer
  const Tensor& out_in = n_head > 0 ? ctx.head_act[n_head - 1] : ctx.head_in;
  Tensor d_cursor;
  dense_backward(out_in, model.head.out.weights, d_out, d_cursor,
                 grads.tensors[out_base], grads.tensors[out_base + 1]);

  // head hidden layers
  for (std::size_t i = n_head; i-- > 0;) {
    const Tensor d_pre = relu_backward(ctx.head_pre[i], d_cursor);
    const Tensor& in = i == 0 ? ctx.head_in : ctx.head_act[i - 1];
    Tensor d_in;
    dense_backward(in, model.head.hidden[i].weights, d_pre, d_in,
                   grads.tensors[head_base + 2 * i], grads.tensors[head_base + 2 * i + 1]);
    d_cursor = std::move(d_in);
  }

  // split into branch embeddings
  Tensor d_vis_emb = Tensor::zeros({kVisionEmbedding});
  std::copy(d_cursor.data.begin(),
            d_cursor.data.begin() + static_cast<std::ptrdiff_t>(kVisionEmbedding),
            d_vis_emb.data.begin());

  if (model.config.variant == Variant::fused) {
    const std::size_t mlp_width = d_cursor.numel() - kVisionEmbedding;
    Tensor d_mlp = Tensor::zeros({mlp_width});
    std::copy(d_cursor.data.begin() + static_cast<std::ptrdiff_t>(kVisionEmbedding),
              d_cursor.data.end(), d_mlp.data.begin());
    for (std::size_t i = n_mlp; i-- > 0;) {
      const Tensor d_pre = relu_backward(ctx.mlp_pre[i], d_mlp);
      const Tensor& in = i == 0 ? ctx.can_in : ctx.mlp_act[i - 1];
      Tensor d_in;
      dense_backward(in, model.mlp.dense[i].weights, d_pre, d_in,
                     grads.tensors[mlp_base + 2 * i], grads.tensors[mlp_base + 2 * i + 1]);
      d_mlp = std::move(d_in);
    }
    // undo the fixed standardization to express gradients in raw units
    for (std::size_t i = 0; i < model.config.can_dim; ++i) {
      grads.d_can[i] += d_mlp.data[i] / model.config.can_scale[i];
    }
  }

  // vision dense stack
  Tensor d_vis = std::move(d_vis_emb);
  for (std::size_t i = n_vis; i-- > 0;) {
    const Tensor d_pre = relu_backward(ctx.vis_pre[i], d_vis);
    const Tensor& in = i == 0 ? ctx.flat : ctx.vis_act[i - 1];
    Tensor d_in;
    dense_backward(in, model.vision.dense[i].weights, d_pre, d_in,
                   grads.tensors[vis_dense_base + 2 * i],
                   grads.tensors[vis_dense_base + 2 * i + 1]);
    d_vis = std::move(d_in);
  }

  // reshape flat gradient onto the last conv activation grid
  Tensor d_act = std::move(d_vis);
  d_act.shape = ctx.conv_act[n_conv - 1].shape;

  for (std::size_t i = n_conv; i-- > 0;) {
    Tensor d_pre = relu_backward(ctx.conv_pre[i], d_act);
    const Tensor& in = i == 0 ? ctx.norm : ctx.conv_act[i - 1];
    const bool need_dx = i > 0 || input_grads;
    Tensor d_in;
    conv2d_backward(in, model.vision.conv[i].kernel, model.vision.conv[i].stride, d_pre,
                    need_dx ? &d_in : nullptr, grads.tensors[2 * i],
                    grads.tensors[2 * i + 1], ctx.conv_ws[i], /*xrow_valid=*/true);
    if (i > 0) {
      d_act = std::move(d_in);
    } else if (input_grads) {
      // chain through the 2x - 1 normalization
      if (grads.d_image.shape != d_in.shape) grads.d_image = Tensor::zeros(d_in.shape);
      for (std::size_t p = 0; p < d_in.data.size(); ++p) {
        grads.d_image.data[p] += 2.0 * d_in.data[p];
      }
    }
  }
  return loss;
}

// Single prediction with full input validation.
inline double predict(const FusedModel& model, const Image& image,
                      const double* can = nullptr) {
  thread_local ForwardContext ctx;
  return forward(model, image, can, ctx);
}

}  // namespace canfuse
