#pragma once

#include <memory>

#include "cslr/model.hpp"

namespace cslr {

struct ConformerConfig {
  std::size_t d_model = 144;
  std::size_t n_blocks = 4;
  std::size_t n_heads = 4;
  std::size_t conv_kernel = 7;  // depthwise kernel inside the blocks, odd
  std::size_t ffn_expansion = 4;
  std::size_t encoder_kernel = 3;
  std::vector<std::size_t> encoder_channels = {128, 144};
  std::size_t encoder_stride = 1;
  double dropout = 0.1;
  std::size_t input_dim = 172;

  void validate() const;
  nlohmann::json to_json() const;
  static ConformerConfig from_json(const nlohmann::json& j);
};

/// Temporal conv encoder -> sinusoidal PE -> conformer blocks -> linear head.
class ConformerModel : public SequenceModel {
 public:
  ConformerModel(ConformerConfig cfg, std::size_t vocab_size, std::uint64_t seed);

  std::string kind() const override { return "conformer_si"; }
  ParamRegistry& params() override { return reg_; }
  std::size_t vocab_size() const override { return vocab_size_; }
  std::size_t min_input_length() const override;
  nlohmann::json config_json() const override { return cfg_.to_json(); }

  std::vector<TensorPtr> forward_batch(Tape* tape, const std::vector<TensorPtr>& inputs,
                                       Mode mode, std::mt19937_64& rng) override;

  // Exposed stages (tested individually).
  std::vector<TensorPtr> temporal_encode(Tape* tape, const std::vector<TensorPtr>& inputs,
                                         Mode mode);
  TensorPtr classify(Tape* tape, const TensorPtr& h) const;

  const ConformerConfig& config() const { return cfg_; }

 private:
  struct EncoderStage {
    TensorPtr kernels;  // k x C_in x C_out
    TensorPtr bias;
    std::unique_ptr<BatchNormState> bn;
    int stride = 1;
  };

  struct Block {
    LayerNormParams ln_ffn1, ln_mhsa, ln_conv, ln_ffn2, ln_out;
    Linear ffn1_in, ffn1_out, ffn2_in, ffn2_out;
    MultiHeadAttention mhsa;
    Linear conv_pw1, conv_pw2;  // pointwise d->2d (GLU input) and d->d
    TensorPtr dw_kernels;       // k x d
    TensorPtr dw_bias;          // d
    std::unique_ptr<BatchNormState> bn;
  };

  std::vector<TensorPtr> apply_block(Tape* tape, Block& blk,
                                     const std::vector<TensorPtr>& xs, Mode mode,
                                     std::mt19937_64& rng);

  ConformerConfig cfg_;
  std::size_t vocab_size_;
  ParamRegistry reg_;
  std::vector<EncoderStage> encoder_;
  std::vector<std::unique_ptr<Block>> blocks_;
  LayerNormParams head_ln_;
  Linear head_;
};

}  // namespace cslr
