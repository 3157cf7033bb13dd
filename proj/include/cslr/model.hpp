#pragma once

#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cslr/ops.hpp"

namespace cslr {

/// Ordered, named handles to everything a checkpoint must carry.
struct ParamRegistry {
  std::vector<std::pair<std::string, TensorPtr>> params;
  std::vector<std::pair<std::string, BatchNormState*>> bn_states;

  TensorPtr add(const std::string& name, TensorPtr t) {
    t->requires_grad = true;
    params.emplace_back(name, t);
    return t;
  }
  void add_bn(const std::string& name, BatchNormState* state) {
    params.emplace_back(name + ".gamma", state->gamma);
    params.emplace_back(name + ".beta", state->beta);
    bn_states.emplace_back(name, state);
  }
  TensorPtr find(const std::string& name) const {
    for (const auto& [n, t] : params)
      if (n == name) return t;
    return nullptr;
  }
  void zero_grads() {
    for (auto& [n, t] : params) t->zero_grad();
  }
};

// Glorot-uniform fill: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
void init_glorot(Tensor& t, std::size_t fan_in, std::size_t fan_out,
                 std::mt19937_64& rng);

struct Linear {
  TensorPtr w;  // in x out
  TensorPtr b;  // out

  Linear() = default;
  Linear(ParamRegistry& reg, const std::string& name, std::size_t in, std::size_t out,
         std::mt19937_64& rng);
  TensorPtr apply(Tape* tape, const TensorPtr& x) const;
};

struct LayerNormParams {
  TensorPtr gain;
  TensorPtr bias;

  LayerNormParams() = default;
  LayerNormParams(ParamRegistry& reg, const std::string& name, std::size_t dim);
  TensorPtr apply(Tape* tape, const TensorPtr& x) const;
};

/// Scaled dot-product attention with h heads. Query/key/value projections may
/// read from different sources (self-attention passes the same tensor thrice).
struct MultiHeadAttention {
  Linear wq, wk, wv, wo;
  std::size_t heads = 1;
  std::size_t d_model = 0;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParamRegistry& reg, const std::string& name, std::size_t q_in,
                     std::size_t k_in, std::size_t v_in, std::size_t d_model,
                     std::size_t heads, std::mt19937_64& rng);

  TensorPtr apply(Tape* tape, const TensorPtr& q_src, const TensorPtr& k_src,
                  const TensorPtr& v_src) const;
  TensorPtr self(Tape* tape, const TensorPtr& x) const { return apply(tape, x, x, x); }
};

// PE[t, 2i] = sin(t / 10000^(2i/d)), PE[t, 2i+1] = cos(same). d must be even.
TensorPtr sinusoidal_positional_encoding(std::size_t t_len, std::size_t d_model);

/// Common surface of the two architectures: batched forward to per-frame
/// logits over |V_g|+1 classes, blank at index 0.
class SequenceModel {
 public:
  virtual ~SequenceModel() = default;
  virtual std::string kind() const = 0;
  virtual ParamRegistry& params() = 0;
  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t min_input_length() const = 0;
  virtual nlohmann::json config_json() const = 0;
  // inputs: one T_i x 172 tensor per sample; returns T_i' x (|V_g|+1) logits.
  virtual std::vector<TensorPtr> forward_batch(Tape* tape,
                                               const std::vector<TensorPtr>& inputs,
                                               Mode mode, std::mt19937_64& rng) = 0;
};

}  // namespace cslr
