#pragma once

#include <memory>

#include "cslr/model.hpp"

namespace cslr {

struct FusionConfig {
  std::size_t d_model = 144;
  std::size_t attn_heads = 4;
  std::size_t n_transformer_blocks = 4;
  std::vector<std::size_t> main_channels = {144, 144};
  std::vector<std::size_t> aux_channels = {144, 144};
  std::size_t conv_kernel = 3;
  std::size_t ffn_expansion = 2;   // transformer position-wise FFN
  std::size_t mlp_hidden = 288;    // classifier head
  double dropout = 0.2;            // head only
  double block_dropout = 0.1;
  std::size_t input_dim = 172;

  std::size_t d_ms() const { return main_channels.back() + aux_channels.back(); }
  void validate() const;
  nlohmann::json to_json() const;
  static FusionConfig from_json(const nlohmann::json& j);
};

/// Joint attention -> dual-path multi-scale encoder -> transformer -> MLP head.
class FusionModel : public SequenceModel {
 public:
  FusionModel(FusionConfig cfg, std::size_t vocab_size, std::uint64_t seed);

  std::string kind() const override { return "fusion_us"; }
  ParamRegistry& params() override { return reg_; }
  std::size_t vocab_size() const override { return vocab_size_; }
  std::size_t min_input_length() const override { return 2; }
  nlohmann::json config_json() const override { return cfg_.to_json(); }

  std::vector<TensorPtr> forward_batch(Tape* tape, const std::vector<TensorPtr>& inputs,
                                       Mode mode, std::mt19937_64& rng) override;

  // Exposed stages (tested individually).
  TensorPtr attention_weights_block(Tape* tape, const TensorPtr& x) const;
  TensorPtr joint_attention(Tape* tape, const TensorPtr& x, const TensorPtr& h_att) const;
  std::vector<TensorPtr> dual_path_encode(Tape* tape, const std::vector<TensorPtr>& xs,
                                          Mode mode);
  std::vector<TensorPtr> transformer_encode(Tape* tape, const std::vector<TensorPtr>& xs,
                                            Mode mode, std::mt19937_64& rng);
  TensorPtr classify_mlp(Tape* tape, const TensorPtr& h, Mode mode,
                         std::mt19937_64& rng) const;

  const FusionConfig& config() const { return cfg_; }

 private:
  struct ConvStage {
    TensorPtr kernels;
    TensorPtr bias;
    std::unique_ptr<BatchNormState> bn;
  };

  struct TransformerBlock {
    LayerNormParams ln_mhsa, ln_ffn;
    MultiHeadAttention mhsa;
    Linear ffn_in, ffn_out;
  };

  std::vector<TensorPtr> conv_stack(Tape* tape, std::vector<ConvStage>& stages,
                                    std::vector<TensorPtr> xs, Mode mode,
                                    bool pool_after_first);

  FusionConfig cfg_;
  std::size_t vocab_size_;
  ParamRegistry reg_;

  Linear input_proj_;
  MultiHeadAttention att_block_mhsa_;
  LayerNormParams att_block_ln_;
  MultiHeadAttention joint_att_;
  std::vector<ConvStage> main_path_;
  std::vector<ConvStage> aux_path_;
  std::vector<std::unique_ptr<TransformerBlock>> transformer_;
  LayerNormParams transformer_ln_;
  Linear head_in_, head_out_;
};

}  // namespace cslr
