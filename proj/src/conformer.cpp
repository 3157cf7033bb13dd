#include "cslr/conformer.hpp"

namespace cslr {

void ConformerConfig::validate() const {
  if (d_model == 0 || n_blocks == 0 || n_heads == 0)
    throw ConfigError("conformer: dims must be >= 1");
  if (d_model % n_heads != 0)
    throw ConfigError("conformer: d_model must be divisible by n_heads");
  if (conv_kernel % 2 == 0) throw ConfigError("conformer: conv_kernel must be odd");
  if (encoder_kernel % 2 == 0) throw ConfigError("conformer: encoder_kernel must be odd");
  if (encoder_channels.empty() || encoder_channels.back() != d_model)
    throw ConfigError("conformer: encoder_channels must end at d_model");
  if (encoder_stride < 1) throw ConfigError("conformer: encoder_stride must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("conformer: dropout in [0,1)");
}

nlohmann::json ConformerConfig::to_json() const {
  return {{"d_model", d_model},
          {"n_blocks", n_blocks},
          {"n_heads", n_heads},
          {"conv_kernel", conv_kernel},
          {"ffn_expansion", ffn_expansion},
          {"encoder_kernel", encoder_kernel},
          {"encoder_channels", encoder_channels},
          {"encoder_stride", encoder_stride},
          {"dropout", dropout},
          {"input_dim", input_dim}};
}

ConformerConfig ConformerConfig::from_json(const nlohmann::json& j) {
  ConformerConfig c;
  c.d_model = j.at("d_model");
  c.n_blocks = j.at("n_blocks");
  c.n_heads = j.at("n_heads");
  c.conv_kernel = j.at("conv_kernel");
  c.ffn_expansion = j.at("ffn_expansion");
  c.encoder_kernel = j.at("encoder_kernel");
  c.encoder_channels = j.at("encoder_channels").get<std::vector<std::size_t>>();
  c.encoder_stride = j.at("encoder_stride");
  c.dropout = j.at("dropout");
  c.input_dim = j.at("input_dim");
  c.validate();
  return c;
}

ConformerModel::ConformerModel(ConformerConfig cfg, std::size_t vocab_size,
                               std::uint64_t seed)
    : cfg_(std::move(cfg)), vocab_size_(vocab_size) {
  cfg_.validate();
  if (vocab_size_ == 0) throw ConfigError("conformer: vocabulary must be non-empty");
  std::mt19937_64 rng(seed);

  std::size_t c_in = cfg_.input_dim;
  for (std::size_t s = 0; s < cfg_.encoder_channels.size(); ++s) {
    const std::size_t c_out = cfg_.encoder_channels[s];
    EncoderStage stage;
    stage.kernels = Tensor::zeros({cfg_.encoder_kernel, c_in, c_out});
    init_glorot(*stage.kernels, cfg_.encoder_kernel * c_in, c_out, rng);
    stage.bias = Tensor::zeros({c_out});
    stage.bn = std::make_unique<BatchNormState>(c_out);
    stage.stride = s == 0 ? static_cast<int>(cfg_.encoder_stride) : 1;
    const std::string name = "encoder." + std::to_string(s);
    reg_.add(name + ".kernels", stage.kernels);
    reg_.add(name + ".bias", stage.bias);
    reg_.add_bn(name + ".bn", stage.bn.get());
    encoder_.push_back(std::move(stage));
    c_in = c_out;
  }

  const std::size_t d = cfg_.d_model;
  const std::size_t ffn_d = d * cfg_.ffn_expansion;
  for (std::size_t b = 0; b < cfg_.n_blocks; ++b) {
    const std::string p = "block." + std::to_string(b);
    auto blk = std::make_unique<Block>();
    blk->ln_ffn1 = LayerNormParams(reg_, p + ".ln_ffn1", d);
    blk->ffn1_in = Linear(reg_, p + ".ffn1_in", d, ffn_d, rng);
    blk->ffn1_out = Linear(reg_, p + ".ffn1_out", ffn_d, d, rng);
    blk->ln_mhsa = LayerNormParams(reg_, p + ".ln_mhsa", d);
    blk->mhsa = MultiHeadAttention(reg_, p + ".mhsa", d, d, d, d, cfg_.n_heads, rng);
    blk->ln_conv = LayerNormParams(reg_, p + ".ln_conv", d);
    blk->conv_pw1 = Linear(reg_, p + ".conv_pw1", d, 2 * d, rng);
    blk->dw_kernels = Tensor::zeros({cfg_.conv_kernel, d});
    init_glorot(*blk->dw_kernels, cfg_.conv_kernel, 1, rng);
    blk->dw_bias = Tensor::zeros({d});
    reg_.add(p + ".dw_kernels", blk->dw_kernels);
    reg_.add(p + ".dw_bias", blk->dw_bias);
    blk->bn = std::make_unique<BatchNormState>(d);
    reg_.add_bn(p + ".bn", blk->bn.get());
    blk->conv_pw2 = Linear(reg_, p + ".conv_pw2", d, d, rng);
    blk->ln_ffn2 = LayerNormParams(reg_, p + ".ln_ffn2", d);
    blk->ffn2_in = Linear(reg_, p + ".ffn2_in", d, ffn_d, rng);
    blk->ffn2_out = Linear(reg_, p + ".ffn2_out", ffn_d, d, rng);
    blk->ln_out = LayerNormParams(reg_, p + ".ln_out", d);
    blocks_.push_back(std::move(blk));
  }

  head_ln_ = LayerNormParams(reg_, "head.ln", d);
  head_ = Linear(reg_, "head.linear", d, vocab_size_ + 1, rng);
}

std::size_t ConformerModel::min_input_length() const {
  // Same-padded convolutions survive any T >= 1; a strided first stage only
  // needs one output frame.
  return cfg_.encoder_stride;
}

std::vector<TensorPtr> ConformerModel::temporal_encode(Tape* tape,
                                                       const std::vector<TensorPtr>& inputs,
                                                       Mode mode) {
  std::vector<TensorPtr> xs = inputs;
  for (auto& stage : encoder_) {
    std::vector<TensorPtr> conved;
    std::vector<std::size_t> lengths;
    for (const auto& x : xs) {
      auto y = conv1d(tape, x, stage.kernels, stage.bias, stage.stride, Padding::Same);
      lengths.push_back(y->rows());
      conved.push_back(y);
    }
    auto pooled = batch_norm1d(tape, concat_rows(tape, conved), *stage.bn, mode);
    auto parts = split_rows(tape, pooled, lengths);
    xs.clear();
    for (auto& p : parts) xs.push_back(relu(tape, p));
  }
  return xs;
}

std::vector<TensorPtr> ConformerModel::apply_block(Tape* tape, Block& blk,
                                                   const std::vector<TensorPtr>& xs,
                                                   Mode mode, std::mt19937_64& rng) {
  const double p_drop = cfg_.dropout;
  auto ffn = [&](const LayerNormParams& ln, const Linear& in, const Linear& out,
                 const TensorPtr& x) {
    auto h = in.apply(tape, ln.apply(tape, x));
    h = dropout(tape, swish(tape, h), p_drop, mode, rng);
    h = dropout(tape, out.apply(tape, h), p_drop, mode, rng);
    return add(tape, x, scale(tape, h, 0.5));  // macaron half-step
  };

  // FFN half, MHSA, then the conv module up to its batch norm (per sample).
  std::vector<TensorPtr> pre_bn;
  std::vector<TensorPtr> residual;
  std::vector<std::size_t> lengths;
  for (const auto& x0 : xs) {
    auto x = ffn(blk.ln_ffn1, blk.ffn1_in, blk.ffn1_out, x0);
    auto att = blk.mhsa.self(tape, blk.ln_mhsa.apply(tape, x));
    x = add(tape, x, dropout(tape, att, p_drop, mode, rng));
    auto c = blk.conv_pw1.apply(tape, blk.ln_conv.apply(tape, x));
    c = glu(tape, c);
    c = depthwise_conv1d(tape, c, blk.dw_kernels, blk.dw_bias);
    residual.push_back(x);
    lengths.push_back(c->rows());
    pre_bn.push_back(c);
  }

  auto pooled = batch_norm1d(tape, concat_rows(tape, pre_bn), *blk.bn, mode);
  auto parts = split_rows(tape, pooled, lengths);

  std::vector<TensorPtr> out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    auto c = blk.conv_pw2.apply(tape, swish(tape, parts[i]));
    auto x = add(tape, residual[i], dropout(tape, c, p_drop, mode, rng));
    x = ffn(blk.ln_ffn2, blk.ffn2_in, blk.ffn2_out, x);
    out.push_back(blk.ln_out.apply(tape, x));
  }
  return out;
}

TensorPtr ConformerModel::classify(Tape* tape, const TensorPtr& h) const {
  return head_.apply(tape, head_ln_.apply(tape, h));
}

std::vector<TensorPtr> ConformerModel::forward_batch(Tape* tape,
                                                     const std::vector<TensorPtr>& inputs,
                                                     Mode mode, std::mt19937_64& rng) {
  for (const auto& x : inputs)
    if (x->cols() != cfg_.input_dim)
      throw DimensionError("conformer: input feature dim " + x->shape_str() +
                           ", expected " + std::to_string(cfg_.input_dim));

  auto xs = temporal_encode(tape, inputs, mode);
  for (auto& x : xs)
    x = add(tape, x, sinusoidal_positional_encoding(x->rows(), cfg_.d_model));
  for (auto& blk : blocks_) xs = apply_block(tape, *blk, xs, mode, rng);

  std::vector<TensorPtr> logits;
  for (const auto& x : xs) logits.push_back(classify(tape, x));
  return logits;
}

}  // namespace cslr
