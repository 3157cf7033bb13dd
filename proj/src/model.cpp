#include "cslr/model.hpp"

#include <cmath>

namespace cslr {

void init_glorot(Tensor& t, std::size_t fan_in, std::size_t fan_out,
                 std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  for (auto& v : t.values) v = u(rng);
}

Linear::Linear(ParamRegistry& reg, const std::string& name, std::size_t in,
               std::size_t out, std::mt19937_64& rng) {
  w = Tensor::zeros({in, out});
  init_glorot(*w, in, out, rng);
  b = Tensor::zeros({out});
  reg.add(name + ".w", w);
  reg.add(name + ".b", b);
}

TensorPtr Linear::apply(Tape* tape, const TensorPtr& x) const {
  return add_row_bias(tape, matmul(tape, x, w), b);
}

LayerNormParams::LayerNormParams(ParamRegistry& reg, const std::string& name,
                                 std::size_t dim) {
  gain = Tensor::from({dim}, std::vector<double>(dim, 1.0));
  bias = Tensor::zeros({dim});
  reg.add(name + ".gain", gain);
  reg.add(name + ".bias", bias);
}

TensorPtr LayerNormParams::apply(Tape* tape, const TensorPtr& x) const {
  return layer_norm(tape, x, gain, bias);
}

MultiHeadAttention::MultiHeadAttention(ParamRegistry& reg, const std::string& name,
                                       std::size_t q_in, std::size_t k_in,
                                       std::size_t v_in, std::size_t d_model_,
                                       std::size_t heads_, std::mt19937_64& rng)
    : heads(heads_), d_model(d_model_) {
  if (d_model % heads != 0)
    throw ConfigError(name + ": d_model must be divisible by head count");
  wq = Linear(reg, name + ".wq", q_in, d_model, rng);
  wk = Linear(reg, name + ".wk", k_in, d_model, rng);
  wv = Linear(reg, name + ".wv", v_in, d_model, rng);
  wo = Linear(reg, name + ".wo", d_model, d_model, rng);
}

TensorPtr MultiHeadAttention::apply(Tape* tape, const TensorPtr& q_src,
                                    const TensorPtr& k_src,
                                    const TensorPtr& v_src) const {
  if (q_src->rows() != k_src->rows() || k_src->rows() != v_src->rows())
    throw DimensionError("attention: query/key/value sequence lengths differ");
  const std::size_t d_k = d_model / heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));

  auto q = wq.apply(tape, q_src);
  auto k = wk.apply(tape, k_src);
  auto v = wv.apply(tape, v_src);

  TensorPtr merged;
  for (std::size_t h = 0; h < heads; ++h) {
    auto qh = slice_cols(tape, q, h * d_k, (h + 1) * d_k);
    auto kh = slice_cols(tape, k, h * d_k, (h + 1) * d_k);
    auto vh = slice_cols(tape, v, h * d_k, (h + 1) * d_k);
    auto scores = scale(tape, matmul(tape, qh, transpose(tape, kh)), inv_sqrt_dk);
    auto weights = softmax_rows(tape, scores);
    auto head = matmul(tape, weights, vh);
    merged = merged ? concat_cols(tape, merged, head) : head;
  }
  return wo.apply(tape, merged);
}

TensorPtr sinusoidal_positional_encoding(std::size_t t_len, std::size_t d_model) {
  if (d_model % 2 != 0)
    throw DimensionError("positional encoding requires even d_model");
  auto pe = Tensor::zeros({t_len, d_model});
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t i = 0; i < d_model / 2; ++i) {
      const double angle =
          static_cast<double>(t) /
          std::pow(10000.0, 2.0 * static_cast<double>(i) / static_cast<double>(d_model));
      pe->at(t, 2 * i) = std::sin(angle);
      pe->at(t, 2 * i + 1) = std::cos(angle);
    }
  return pe;
}

}  // namespace cslr
