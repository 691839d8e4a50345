// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/nn/blocks.hpp"

#include <cmath>

#include "spac/error.hpp"

namespace spac::nn {

namespace {

std::string
layer_prefix(const char* stem, int layer)
{
  return stem + std::to_string(layer);
}

Tensor
linear(const ModelWeights& w, const std::string& weight, const std::string& bias, const Tensor& x)
{
  return add_bias(matmul(x, w.at(weight)), w.at(bias));
}

void
check_layer(const ModelWeights& w, int layer)
{
  if (layer < 1 || layer > w.config().num_layers)
    fail(ErrorCode::kInvalidArgument, "layer index out of range");
}

}  // namespace

Tensor
neighbor_conv(const ModelWeights& w, const std::string& prefix, const Tensor& x, const BlockLayout& layout)
{
  const Tensor& ws = w.at(prefix + ".self");
  if (x.cols() != ws.rows())
    fail(ErrorCode::kInvalidArgument, "neighbor_conv: input width does not match " + prefix);
  Tensor self = matmul(x, ws);
  Tensor neigh = matmul(neighbor_mean(x, layout), w.at(prefix + ".neigh"));
  return mask_rows(add_bias(add(self, neigh), w.at(prefix + ".bias")), layout);
}

Tensor
offset_attention(const ModelWeights& w, const std::string& prefix, const Tensor& x, const BlockLayout& layout)
{
  Tensor q = matmul(x, w.at(prefix + ".q"));
  Tensor k = matmul(x, w.at(prefix + ".k"));
  Tensor v = matmul(x, w.at(prefix + ".v"));
  Tensor attn = block_attention(q, k, v, layout);
  Tensor offset = relu(linear(w, prefix + ".o", prefix + ".o_bias", sub(x, attn)));
  return mask_rows(add(x, offset), layout);
}

Tensor
geometry_refine(const ModelWeights& w, const std::string& prefix, const Tensor& x, const Tensor& normals,
                const BlockLayout& layout)
{
  if (normals.rows() != x.rows() || normals.cols() != 3)
    fail(ErrorCode::kInvalidArgument, "geometry_refine: normals must be rows x 3");
  Tensor h = relu(neighbor_conv(w, prefix + ".a", concat_cols(x, normals), layout));
  return add(x, neighbor_conv(w, prefix + ".b", h, layout));
}

Tensor
fnet_forward(const ModelWeights& w, int layer, const Tensor& colors, const Tensor& normals, const BlockLayout& layout)
{
  check_layer(w, layer);
  if (colors.cols() != 3)
    fail(ErrorCode::kInvalidArgument, "fnet: colours must be rows x 3");
  const std::string p = layer_prefix("fnet", layer);
  Tensor h = scale(colors, 1.0 / 255.0);
  for (int k = 0; k < w.config().depth(layer); ++k)
    h = relu(neighbor_conv(w, p + ".conv" + std::to_string(k), h, layout));
  h = offset_attention(w, p + ".attn", h, layout);
  h = geometry_refine(w, p + ".refine", h, normals, layout);
  return linear(w, p + ".head.w", p + ".head.b", masked_pool(h, layout));
}

Tensor
refnet_forward(const ModelWeights& w, int layer, const Tensor& latents, const Tensor& rel_pos,
               const BlockLayout& layout)
{
  check_layer(w, layer);
  if (rel_pos.rows() != static_cast<Eigen::Index>(layout.rows()) || rel_pos.cols() != 3)
    fail(ErrorCode::kInvalidArgument, "refnet: relative positions must be rows x 3");
  const std::string p = layer_prefix("refnet", layer);
  Tensor b = matmul(broadcast_blocks(latents, layout), w.at(p + ".in.w"));
  Tensor mod = hadamard(b, matmul(rel_pos, w.at(p + ".pos.w")));
  Tensor h = mask_rows(relu(add_bias(add(b, mod), w.at(p + ".in.b"))), layout);
  for (int k = 0; k < w.config().depth(layer); ++k)
    h = relu(neighbor_conv(w, p + ".conv" + std::to_string(k), h, layout));
  return h;
}

Tensor
reconnet_forward(const ModelWeights& w, const Tensor& features, const BlockLayout& layout, bool clamp_output)
{
  Tensor h = offset_attention(w, "recon.attn", features, layout);
  h = relu(neighbor_conv(w, "recon.conv", h, layout));
  Tensor out = mask_rows(scale(linear(w, "recon.head.w", "recon.head.b", h), 255.0), layout);
  return clamp_output ? clamp(out, 0.0, 255.0) : out;
}

Tensor
hyper_encode(const ModelWeights& w, const Tensor& base_latents)
{
  Tensor h = relu(linear(w, "hyper.enc.w1", "hyper.enc.b1", base_latents));
  return linear(w, "hyper.enc.w2", "hyper.enc.b2", row_mean(h));
}

Tensor
hyper_decode(const ModelWeights& w, const Tensor& z)
{
  return relu(linear(w, "hyper.dec.w", "hyper.dec.b", z));
}

Tensor
layer_adapter(const ModelWeights& w, int layer, const Tensor& hyper_features)
{
  check_layer(w, layer);
  const std::string p = layer_prefix("adapt", layer);
  return linear(w, p + ".w", p + ".b", hyper_features);
}

Tensor
context_features(const ModelWeights& w, int layer, const Tensor& context_input)
{
  check_layer(w, layer);
  return matmul(context_input, w.at(layer_prefix("ctx", layer) + ".w"));
}

RowParams
param_head(const ModelWeights& w, int layer, const Tensor& context, const Tensor& adapter)
{
  check_layer(w, layer);
  const std::string p = layer_prefix("param", layer);
  const Eigen::Index dy = w.config().latent_dim;
  Tensor h = relu(linear(w, p + ".w1", p + ".b1", concat_cols(context, adapter)));
  Tensor out = linear(w, p + ".w2", p + ".b2", h);
  RowParams r;
  r.mu = slice_cols(out, 0, dy);
  r.scale = clamp(exp(slice_cols(out, dy, dy)), kScaleMin, kScaleMax);
  r.delta = hsq_delta(w, layer, context, adapter);
  return r;
}

Tensor
hsq_delta(const ModelWeights& w, int layer, const Tensor& context, const Tensor& adapter)
{
  check_layer(w, layer);
  const std::string p = layer_prefix("hsq", layer);
  const auto& c = w.config();
  Tensor s = sigmoid(linear(w, p + ".w", p + ".b", concat_cols(context, adapter)));
  return add_scalar(scale(s, c.delta_max - c.delta_min), c.delta_min);
}

Matrix
quantize_test(const Matrix& y, const Matrix& delta)
{
  if (y.rows() != delta.rows() || y.cols() != delta.cols())
    fail(ErrorCode::kInvalidArgument, "quantize: shape mismatch");
  Matrix out(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double d = delta.data()[i];
    if (!(d > 0.0))
      fail(ErrorCode::kInvalidArgument, "quantize: step must be positive");
    out.data()[i] = d * std::nearbyint(y.data()[i] / d);
  }
  return out;
}

Tensor
quantize_train(const Tensor& y, const Tensor& delta, Rng& rng)
{
  if (y.rows() != delta.rows() || y.cols() != delta.cols())
    fail(ErrorCode::kInvalidArgument, "quantize: shape mismatch");
  Matrix u(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (!(delta.value().data()[i] > 0.0))
      fail(ErrorCode::kInvalidArgument, "quantize: step must be positive");
    u.data()[i] = rng.uniform(-0.5, 0.5);
  }
  return add(y, hadamard(Tensor::constant(std::move(u)), delta));
}

HyperPrior
hyper_prior(const ModelWeights& w)
{
  return {w.at("hyper.prior.mean"), clamp(exp(w.at("hyper.prior.log_scale")), kScaleMin, kScaleMax)};
}

}  // namespace spac::nn
