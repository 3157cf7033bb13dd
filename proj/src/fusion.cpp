#include "cslr/fusion.hpp"

namespace cslr {

void FusionConfig::validate() const {
  if (d_model == 0 || attn_heads == 0 || n_transformer_blocks == 0 || mlp_hidden == 0)
    throw ConfigError("fusion: dims must be >= 1");
  if (d_model % attn_heads != 0)
    throw ConfigError("fusion: d_model must be divisible by attn_heads");
  if (conv_kernel % 2 == 0) throw ConfigError("fusion: conv_kernel must be odd");
  if (main_channels.empty() || aux_channels.empty())
    throw ConfigError("fusion: conv paths must have at least one stage");
  if (d_ms() % 2 != 0)
    throw ConfigError("fusion: D_ms must be even for positional encoding");
  if (d_ms() % attn_heads != 0)
    throw ConfigError("fusion: D_ms must be divisible by attn_heads");
  if (dropout < 0.0 || dropout >= 1.0 || block_dropout < 0.0 || block_dropout >= 1.0)
    throw ConfigError("fusion: dropout in [0,1)");
}

nlohmann::json FusionConfig::to_json() const {
  return {{"d_model", d_model},
          {"attn_heads", attn_heads},
          {"n_transformer_blocks", n_transformer_blocks},
          {"main_channels", main_channels},
          {"aux_channels", aux_channels},
          {"conv_kernel", conv_kernel},
          {"ffn_expansion", ffn_expansion},
          {"mlp_hidden", mlp_hidden},
          {"dropout", dropout},
          {"block_dropout", block_dropout},
          {"input_dim", input_dim}};
}

FusionConfig FusionConfig::from_json(const nlohmann::json& j) {
  FusionConfig c;
  c.d_model = j.at("d_model");
  c.attn_heads = j.at("attn_heads");
  c.n_transformer_blocks = j.at("n_transformer_blocks");
  c.main_channels = j.at("main_channels").get<std::vector<std::size_t>>();
  c.aux_channels = j.at("aux_channels").get<std::vector<std::size_t>>();
  c.conv_kernel = j.at("conv_kernel");
  c.ffn_expansion = j.at("ffn_expansion");
  c.mlp_hidden = j.at("mlp_hidden");
  c.dropout = j.at("dropout");
  c.block_dropout = j.at("block_dropout");
  c.input_dim = j.at("input_dim");
  c.validate();
  return c;
}

FusionModel::FusionModel(FusionConfig cfg, std::size_t vocab_size, std::uint64_t seed)
    : cfg_(std::move(cfg)), vocab_size_(vocab_size) {
  cfg_.validate();
  if (vocab_size_ == 0) throw ConfigError("fusion: vocabulary must be non-empty");
  std::mt19937_64 rng(seed);

  const std::size_t d = cfg_.d_model;
  input_proj_ = Linear(reg_, "att_block.proj", cfg_.input_dim, d, rng);
  att_block_mhsa_ = MultiHeadAttention(reg_, "att_block.mhsa", d, d, d, d,
                                       cfg_.attn_heads, rng);
  att_block_ln_ = LayerNormParams(reg_, "att_block.ln", d);
  // Q and K read the raw features, V reads the contextual stream.
  joint_att_ = MultiHeadAttention(reg_, "joint_att", cfg_.input_dim, cfg_.input_dim, d,
                                  d, cfg_.attn_heads, rng);

  auto build_path = [&](const std::string& prefix, std::vector<std::size_t> channels,
                        std::vector<ConvStage>& out) {
    std::size_t c_in = d;
    for (std::size_t s = 0; s < channels.size(); ++s) {
      ConvStage stage;
      stage.kernels = Tensor::zeros({cfg_.conv_kernel, c_in, channels[s]});
      init_glorot(*stage.kernels, cfg_.conv_kernel * c_in, channels[s], rng);
      stage.bias = Tensor::zeros({channels[s]});
      stage.bn = std::make_unique<BatchNormState>(channels[s]);
      const std::string name = prefix + "." + std::to_string(s);
      reg_.add(name + ".kernels", stage.kernels);
      reg_.add(name + ".bias", stage.bias);
      reg_.add_bn(name + ".bn", stage.bn.get());
      out.push_back(std::move(stage));
      c_in = channels[s];
    }
  };
  build_path("main", cfg_.main_channels, main_path_);
  build_path("aux", cfg_.aux_channels, aux_path_);

  const std::size_t dm = cfg_.d_ms();
  const std::size_t ffn_d = dm * cfg_.ffn_expansion;
  for (std::size_t b = 0; b < cfg_.n_transformer_blocks; ++b) {
    const std::string p = "transformer." + std::to_string(b);
    auto blk = std::make_unique<TransformerBlock>();
    blk->ln_mhsa = LayerNormParams(reg_, p + ".ln_mhsa", dm);
    blk->mhsa = MultiHeadAttention(reg_, p + ".mhsa", dm, dm, dm, dm, cfg_.attn_heads, rng);
    blk->ln_ffn = LayerNormParams(reg_, p + ".ln_ffn", dm);
    blk->ffn_in = Linear(reg_, p + ".ffn_in", dm, ffn_d, rng);
    blk->ffn_out = Linear(reg_, p + ".ffn_out", ffn_d, dm, rng);
    transformer_.push_back(std::move(blk));
  }
  transformer_ln_ = LayerNormParams(reg_, "transformer.ln_out", dm);

  head_in_ = Linear(reg_, "head.in", dm, cfg_.mlp_hidden, rng);
  head_out_ = Linear(reg_, "head.out", cfg_.mlp_hidden, vocab_size_ + 1, rng);
}

TensorPtr FusionModel::attention_weights_block(Tape* tape, const TensorPtr& x) const {
  auto proj = input_proj_.apply(tape, x);
  auto att = att_block_mhsa_.self(tape, proj);
  return att_block_ln_.apply(tape, add(tape, proj, att));
}

TensorPtr FusionModel::joint_attention(Tape* tape, const TensorPtr& x,
                                       const TensorPtr& h_att) const {
  if (x->rows() != h_att->rows())
    throw DimensionError("joint_attention: sequence length mismatch");
  return joint_att_.apply(tape, x, x, h_att);
}

std::vector<TensorPtr> FusionModel::conv_stack(Tape* tape, std::vector<ConvStage>& stages,
                                               std::vector<TensorPtr> xs, Mode mode,
                                               bool pool_after_first) {
  for (std::size_t s = 0; s < stages.size(); ++s) {
    auto& stage = stages[s];
    std::vector<TensorPtr> conved;
    std::vector<std::size_t> lengths;
    for (const auto& x : xs) {
      auto y = conv1d(tape, x, stage.kernels, stage.bias, 1, Padding::Same);
      if (s == 0 && pool_after_first) y = maxpool1d(tape, y, 2, 2);
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

std::vector<TensorPtr> FusionModel::dual_path_encode(Tape* tape,
                                                     const std::vector<TensorPtr>& xs,
                                                     Mode mode) {
  for (const auto& x : xs)
    if (x->rows() < 2)
      throw DimensionError("dual_path_encode: aux path needs T >= 2, got T=" +
                           std::to_string(x->rows()));
  auto main = conv_stack(tape, main_path_, xs, mode, false);
  auto aux = conv_stack(tape, aux_path_, xs, mode, true);
  std::vector<TensorPtr> fused;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    auto restored = upsample_repeat_rows(tape, aux[i], xs[i]->rows());
    fused.push_back(concat_cols(tape, main[i], restored));
  }
  return fused;
}

std::vector<TensorPtr> FusionModel::transformer_encode(Tape* tape,
                                                       const std::vector<TensorPtr>& xs,
                                                       Mode mode, std::mt19937_64& rng) {
  const double p_drop = cfg_.block_dropout;
  std::vector<TensorPtr> out;
  for (auto x : xs) {
    x = add(tape, x, sinusoidal_positional_encoding(x->rows(), cfg_.d_ms()));
    for (auto& blk : transformer_) {
      auto att = blk->mhsa.self(tape, blk->ln_mhsa.apply(tape, x));
      x = add(tape, x, dropout(tape, att, p_drop, mode, rng));
      auto h = blk->ffn_in.apply(tape, blk->ln_ffn.apply(tape, x));
      h = blk->ffn_out.apply(tape, dropout(tape, gelu(tape, h), p_drop, mode, rng));
      x = add(tape, x, dropout(tape, h, p_drop, mode, rng));
    }
    out.push_back(transformer_ln_.apply(tape, x));
  }
  return out;
}

TensorPtr FusionModel::classify_mlp(Tape* tape, const TensorPtr& h, Mode mode,
                                    std::mt19937_64& rng) const {
  auto z = gelu(tape, head_in_.apply(tape, h));
  z = dropout(tape, z, cfg_.dropout, mode, rng);
  return head_out_.apply(tape, z);
}

std::vector<TensorPtr> FusionModel::forward_batch(Tape* tape,
                                                  const std::vector<TensorPtr>& inputs,
                                                  Mode mode, std::mt19937_64& rng) {
  for (const auto& x : inputs)
    if (x->cols() != cfg_.input_dim)
      throw DimensionError("fusion: input feature dim " + x->shape_str() +
                           ", expected " + std::to_string(cfg_.input_dim));

  std::vector<TensorPtr> joint;
  for (const auto& x : inputs) {
    auto h_att = attention_weights_block(tape, x);
    joint.push_back(joint_attention(tape, x, h_att));
  }
  auto fused = dual_path_encode(tape, joint, mode);
  auto ctx = transformer_encode(tape, fused, mode, rng);
  std::vector<TensorPtr> logits;
  for (const auto& h : ctx) logits.push_back(classify_mlp(tape, h, mode, rng));
  return logits;
}

}  // namespace cslr
