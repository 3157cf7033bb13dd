#include <doctest.h>

#include <cmath>
#include <random>

#include "cslr/conformer.hpp"
#include "cslr/fusion.hpp"
#include "testutil.hpp"

using namespace cslr;
using testutil::max_grad_rel_err;
using testutil::random_tensor;

namespace {

ConformerConfig tiny_conformer_cfg() {
  ConformerConfig cfg;
  cfg.d_model = 8;
  cfg.n_blocks = 1;
  cfg.n_heads = 2;
  cfg.conv_kernel = 3;
  cfg.ffn_expansion = 2;
  cfg.encoder_kernel = 3;
  cfg.encoder_channels = {8};
  cfg.encoder_stride = 1;
  cfg.dropout = 0.0;
  cfg.input_dim = 8;
  return cfg;
}

FusionConfig tiny_fusion_cfg() {
  FusionConfig cfg;
  cfg.d_model = 8;
  cfg.attn_heads = 2;
  cfg.n_transformer_blocks = 1;
  cfg.main_channels = {6};
  cfg.aux_channels = {6};
  cfg.conv_kernel = 3;
  cfg.ffn_expansion = 2;
  cfg.mlp_hidden = 8;
  cfg.dropout = 0.0;
  cfg.block_dropout = 0.0;
  cfg.input_dim = 8;
  return cfg;
}

}  // namespace

TEST_CASE("positional encoding: first row, bounds, pair identity, rotation") {
  auto pe = sinusoidal_positional_encoding(10, 8);
  REQUIRE(pe->rows() == 10);
  REQUIRE(pe->cols() == 8);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(pe->at(0, 2 * i) == doctest::Approx(0.0));
    CHECK(pe->at(0, 2 * i + 1) == doctest::Approx(1.0));
  }
  for (double v : pe->values) {
    CHECK(v >= -1.0 - 1e-12);
    CHECK(v <= 1.0 + 1e-12);
  }
  for (std::size_t t = 0; t < 10; ++t)
    for (std::size_t i = 0; i < 4; ++i) {
      const double s = pe->at(t, 2 * i), c = pe->at(t, 2 * i + 1);
      CHECK(s * s + c * c == doctest::Approx(1.0).epsilon(1e-12));
    }
  // advancing one step rotates each (sin, cos) pair by its own frequency
  for (std::size_t t = 0; t + 1 < 10; ++t)
    for (std::size_t i = 0; i < 4; ++i) {
      const double w = 1.0 / std::pow(10000.0, (2.0 * i) / 8.0);
      const double s = pe->at(t, 2 * i), c = pe->at(t, 2 * i + 1);
      CHECK(pe->at(t + 1, 2 * i) ==
            doctest::Approx(s * std::cos(w) + c * std::sin(w)).epsilon(1e-10));
    }

  CHECK_THROWS_AS(sinusoidal_positional_encoding(4, 7), DimensionError);
}

TEST_CASE("self-attention is permutation-equivariant") {
  ParamRegistry reg;
  std::mt19937_64 rng(7);
  MultiHeadAttention mhsa(reg, "mhsa", 6, 6, 6, 6, 2, rng);

  auto x = random_tensor({5, 6}, rng, -1, 1, false);
  auto y = mhsa.self(nullptr, x);
  REQUIRE(y->rows() == 5);
  REQUIRE(y->cols() == 6);

  const std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
  auto xp = Tensor::zeros({5, 6});
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 6; ++c) xp->at(r, c) = x->at(perm[r], c);
  auto yp = mhsa.self(nullptr, xp);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 6; ++c)
      CHECK(yp->at(r, c) == doctest::Approx(y->at(perm[r], c)).epsilon(1e-10));
}

TEST_CASE("single-query attention over one key passes the value through") {
  ParamRegistry reg;
  std::mt19937_64 rng(11);
  MultiHeadAttention mhsa(reg, "mhsa", 4, 4, 4, 4, 2, rng);
  auto x = random_tensor({1, 4}, rng, -1, 1, false);
  // softmax over a single key is 1, so attention output = wo(wv(x))
  auto expect = mhsa.wo.apply(nullptr, mhsa.wv.apply(nullptr, x));
  auto got = mhsa.self(nullptr, x);
  for (std::size_t c = 0; c < 4; ++c)
    CHECK(got->at(0, c) == doctest::Approx(expect->at(0, c)).epsilon(1e-10));
}

TEST_CASE("attention gradient vs finite differences") {
  ParamRegistry reg;
  std::mt19937_64 rng(13);
  MultiHeadAttention mhsa(reg, "mhsa", 4, 4, 4, 4, 2, rng);
  auto x = random_tensor({4, 4}, rng);
  auto w = random_tensor({4, 4}, rng, -1, 1, false);
  std::vector<TensorPtr> wrt = {x};
  for (auto& [name, p] : reg.params) wrt.push_back(p);
  const double err = max_grad_rel_err(
      [&](Tape* t) { return mul(t, mhsa.self(t, x), w); }, wrt);
  CHECK(err < 1e-4);
}

TEST_CASE("conformer shape contract and determinism") {
  auto cfg = tiny_conformer_cfg();
  cfg.input_dim = 172;
  ConformerModel model(cfg, 5, 42);
  std::mt19937_64 rng(1), data_rng(2);

  for (std::size_t t_len : {4, 7, 16, 33, 64}) {
    auto x = random_tensor({t_len, 172}, data_rng, -1, 1, false);
    auto out = model.forward_batch(nullptr, {x}, Mode::Train, rng);
    REQUIRE(out.size() == 1);
    CHECK(out[0]->rows() == t_len);  // stride 1 preserves length
    CHECK(out[0]->cols() == 6);      // vocab 5 + blank
  }

  // same seed -> identical parameters and identical outputs
  ConformerModel twin(cfg, 5, 42);
  auto x = random_tensor({9, 172}, data_rng, -1, 1, false);
  std::mt19937_64 r1(3), r2(3);
  auto a = model.forward_batch(nullptr, {x}, Mode::Train, r1);
  auto b = twin.forward_batch(nullptr, {x}, Mode::Train, r2);
  CHECK(a[0]->values == b[0]->values);

  ConformerModel other(cfg, 5, 43);
  auto c = other.forward_batch(nullptr, {x}, Mode::Train, r1);
  CHECK(a[0]->values != c[0]->values);
}

TEST_CASE("conformer eval before any training update raises NumericError") {
  ConformerModel model(tiny_conformer_cfg(), 3, 1);
  std::mt19937_64 rng(1);
  auto x = random_tensor({6, 8}, rng, -1, 1, false);
  CHECK_THROWS_AS(model.forward_batch(nullptr, {x}, Mode::Eval, rng), NumericError);
  // one train pass initializes the running statistics
  model.forward_batch(nullptr, {x}, Mode::Train, rng);
  auto out = model.forward_batch(nullptr, {x}, Mode::Eval, rng);
  CHECK(out[0]->rows() == 6);
}

TEST_CASE("conformer whole-model gradient vs finite differences") {
  ConformerModel model(tiny_conformer_cfg(), 3, 7);
  std::mt19937_64 rng(5), fwd_rng(9);
  auto x = random_tensor({6, 8}, rng);
  auto w = random_tensor({6, 4}, rng, -1, 1, false);

  std::vector<TensorPtr> wrt = {x};
  for (auto& [name, p] : model.params().params) wrt.push_back(p);
  const double err = max_grad_rel_err(
      [&](Tape* t) {
        auto out = model.forward_batch(t, {x}, Mode::Train, fwd_rng);
        return mul(t, out[0], w);
      },
      wrt);
  CHECK(err < 1e-3);
}

TEST_CASE("conformer config validation") {
  auto cfg = tiny_conformer_cfg();
  cfg.encoder_channels = {8, 12};  // must end at d_model
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  auto even = tiny_conformer_cfg();
  even.conv_kernel = 4;
  CHECK_THROWS_AS(even.validate(), ConfigError);

  auto heads = tiny_conformer_cfg();
  heads.n_heads = 3;  // must divide d_model
  CHECK_THROWS_AS(heads.validate(), ConfigError);

  auto rt = ConformerConfig::from_json(tiny_conformer_cfg().to_json());
  CHECK(rt.d_model == 8);
  CHECK(rt.encoder_channels == std::vector<std::size_t>{8});
}

TEST_CASE("fusion shape contract: output length T, aux path halves internally") {
  auto cfg = tiny_fusion_cfg();
  cfg.input_dim = 172;
  FusionModel model(cfg, 4, 21);
  std::mt19937_64 rng(1), data_rng(2);
  for (std::size_t t_len : {4, 5, 16, 33, 64}) {
    auto x = random_tensor({t_len, 172}, data_rng, -1, 1, false);
    auto out = model.forward_batch(nullptr, {x}, Mode::Train, rng);
    REQUIRE(out.size() == 1);
    CHECK(out[0]->rows() == t_len);
    CHECK(out[0]->cols() == 5);
  }

  // too short for the pooled auxiliary path
  auto one = random_tensor({1, 172}, data_rng, -1, 1, false);
  CHECK_THROWS_AS(model.forward_batch(nullptr, {one}, Mode::Train, rng),
                  DimensionError);
  CHECK(model.min_input_length() == 2);
}

TEST_CASE("fusion joint attention is affine in the value stream") {
  FusionModel model(tiny_fusion_cfg(), 3, 5);
  std::mt19937_64 rng(3);
  auto x = random_tensor({5, 8}, rng, -1, 1, false);
  auto h1 = random_tensor({5, 8}, rng, -1, 1, false);
  auto h2 = random_tensor({5, 8}, rng, -1, 1, false);
  auto h_sum = add(nullptr, h1, h2);
  auto zero = Tensor::zeros({5, 8});

  auto y_sum = model.joint_attention(nullptr, x, h_sum);
  auto y_zero = model.joint_attention(nullptr, x, zero);
  auto y1 = model.joint_attention(nullptr, x, h1);
  auto y2 = model.joint_attention(nullptr, x, h2);
  for (std::size_t i = 0; i < y_sum->size(); ++i)
    CHECK(y_sum->values[i] + y_zero->values[i] ==
          doctest::Approx(y1->values[i] + y2->values[i]).epsilon(1e-9));

  // zero value stream leaves only the output bias
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 8; ++c)
      CHECK(y_zero->at(r, c) ==
            doctest::Approx(model.joint_attention(nullptr, x, zero)->at(r, c)));
}

TEST_CASE("fusion whole-model gradient vs finite differences") {
  FusionModel model(tiny_fusion_cfg(), 3, 17);
  std::mt19937_64 rng(5), fwd_rng(9);
  auto x = random_tensor({6, 8}, rng);
  auto w = random_tensor({6, 4}, rng, -1, 1, false);

  std::vector<TensorPtr> wrt = {x};
  for (auto& [name, p] : model.params().params) wrt.push_back(p);
  const double err = max_grad_rel_err(
      [&](Tape* t) {
        auto out = model.forward_batch(t, {x}, Mode::Train, fwd_rng);
        return mul(t, out[0], w);
      },
      wrt);
  CHECK(err < 1e-3);
}

TEST_CASE("fusion config validation") {
  auto cfg = tiny_fusion_cfg();
  cfg.aux_channels = {5};  // d_ms = 11, odd
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  auto heads = tiny_fusion_cfg();
  heads.main_channels = {8};
  heads.aux_channels = {8};
  heads.attn_heads = 5;  // must divide d_ms = 16
  CHECK_THROWS_AS(heads.validate(), ConfigError);

  auto rt = FusionConfig::from_json(tiny_fusion_cfg().to_json());
  CHECK(rt.d_ms() == 12);
  CHECK(rt.mlp_hidden == 8);
}

TEST_CASE("batched forward equals per-sample forward in eval mode") {
  // batch composition must not leak across samples once BN uses running stats
  auto cfg = tiny_conformer_cfg();
  ConformerModel model(cfg, 3, 31);
  std::mt19937_64 rng(1);
  auto a = random_tensor({5, 8}, rng, -1, 1, false);
  auto b = random_tensor({9, 8}, rng, -1, 1, false);
  model.forward_batch(nullptr, {a, b}, Mode::Train, rng);  // init BN stats

  auto batched = model.forward_batch(nullptr, {a, b}, Mode::Eval, rng);
  auto solo_a = model.forward_batch(nullptr, {a}, Mode::Eval, rng);
  auto solo_b = model.forward_batch(nullptr, {b}, Mode::Eval, rng);
  for (std::size_t i = 0; i < batched[0]->size(); ++i)
    CHECK(batched[0]->values[i] == doctest::Approx(solo_a[0]->values[i]).epsilon(1e-12));
  for (std::size_t i = 0; i < batched[1]->size(); ++i)
    CHECK(batched[1]->values[i] == doctest::Approx(solo_b[0]->values[i]).epsilon(1e-12));
}
