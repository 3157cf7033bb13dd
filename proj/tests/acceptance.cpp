// End-to-end acceptance suite. Each numbered check prints a single PASS/FAIL
// line; the process exits non-zero if any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cslr/checkpoint.hpp"
#include "cslr/conformer.hpp"
#include "cslr/ctc.hpp"
#include "cslr/eval.hpp"
#include "cslr/fusion.hpp"
#include "cslr/synth.hpp"
#include "cslr/train.hpp"
#include "cslr/wer.hpp"

using namespace cslr;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int id, bool ok, const std::string& detail, double seconds) {
  std::printf("[%d] %s %s (%.1fs)\n", id, ok ? "PASS" : "FAIL", detail.c_str(),
              seconds);
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

TensorPtr random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                        double lo = -1.0, double hi = 1.0, bool requires_grad = true) {
  auto t = Tensor::zeros(std::move(shape), requires_grad);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t->values) v = u(rng);
  return t;
}

// --- criterion 1: CTC forward equals brute-force path enumeration ----------

double brute_force_prob(const TensorPtr& log_probs, const GlossSequence& target) {
  const std::size_t t_len = log_probs->rows();
  const int k = static_cast<int>(log_probs->cols());
  double total = 0.0;
  std::vector<int> path(t_len, 0);
  const std::size_t n_paths =
      static_cast<std::size_t>(std::llround(std::pow(k, t_len)));
  for (std::size_t code = 0; code < n_paths; ++code) {
    std::size_t c = code;
    for (std::size_t t = 0; t < t_len; ++t) {
      path[t] = static_cast<int>(c % static_cast<std::size_t>(k));
      c /= static_cast<std::size_t>(k);
    }
    std::vector<int> collapsed;
    int prev = -1;
    for (int s : path) {
      if (s != prev && s != kBlankIndex) collapsed.push_back(s);
      prev = s;
    }
    if (collapsed != target.ids) continue;
    double lp = 0.0;
    for (std::size_t t = 0; t < t_len; ++t)
      lp += log_probs->at(t, static_cast<std::size_t>(path[t]));
    total += std::exp(lp);
  }
  return total;
}

void criterion_1() {
  const auto start = Clock::now();
  std::mt19937_64 rng(1001);
  std::size_t checked = 0;
  double worst = 0.0;
  for (std::size_t draw = 0; draw < 150; ++draw) {
    const std::size_t t_len = 1 + draw % 6;        // T in [1, 6]
    const std::size_t k = 2 + (draw / 6) % 3;      // |V| in [1, 3]
    auto logits = random_tensor({t_len, k}, rng, -2.0, 2.0, false);
    auto lp = log_softmax_rows(nullptr, logits);
    std::uniform_int_distribution<int> label(1, static_cast<int>(k) - 1);
    std::uniform_int_distribution<std::size_t> len(0, 3);
    GlossSequence target;
    for (std::size_t i = 0; i < len(rng); ++i) target.ids.push_back(label(rng));
    if (t_len < ctc_required_length(target)) continue;
    const double expect = -std::log(brute_force_prob(lp, target));
    const double got = ctc_loss(lp, target).loss;
    worst = std::max(worst, std::abs(got - expect));
    ++checked;
  }
  const double dt = seconds_since(start);
  std::ostringstream msg;
  msg << "ctc loss vs path enumeration: " << checked
      << " draws, worst abs err " << worst;
  report(1, checked >= 100 && worst <= 1e-9 && dt < 10.0, msg.str(), dt);
}

// --- criterion 2: finite-difference gradient suite -------------------------

double fd_check(const std::function<TensorPtr(Tape*)>& forward,
                const std::vector<TensorPtr>& wrt, std::size_t max_coords = 0,
                std::mt19937_64* pick_rng = nullptr) {
  const double h = 1e-5;
  for (const auto& t : wrt) t->zero_grad();
  Tape tape;
  auto out = forward(&tape);
  seed_sum_grad(out);
  tape.backward();

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t ti = 0; ti < wrt.size(); ++ti)
    for (std::size_t i = 0; i < wrt[ti]->size(); ++i) coords.emplace_back(ti, i);
  if (max_coords > 0 && coords.size() > max_coords && pick_rng) {
    std::shuffle(coords.begin(), coords.end(), *pick_rng);
    coords.resize(max_coords);
  }

  double worst = 0.0;
  for (const auto& [ti, i] : coords) {
    auto& t = *wrt[ti];
    const double orig = t.values[i];
    t.values[i] = orig + h;
    const double up = sum_all(forward(nullptr));
    t.values[i] = orig - h;
    const double down = sum_all(forward(nullptr));
    t.values[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double a = wrt[ti]->grad[i];
    worst = std::max(worst, std::abs(a - numeric) /
                                std::max({std::abs(a), std::abs(numeric), 1e-6}));
  }
  return worst;
}

void criterion_2() {
  const auto start = Clock::now();
  double worst_kernel = 0.0, worst_model = 0.0;

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(2000 + seed);
    auto track = [&](double err) { worst_kernel = std::max(worst_kernel, err); };

    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({4, 2}, rng);
    track(fd_check([&](Tape* t) { return matmul(t, a, b); }, {a, b}));

    auto x = random_tensor({3, 5}, rng);
    auto w = random_tensor({3, 5}, rng, -1, 1, false);
    track(fd_check([&](Tape* t) { return mul(t, softmax_rows(t, x), w); }, {x}));
    track(fd_check([&](Tape* t) { return mul(t, log_softmax_rows(t, x), w); }, {x}));

    auto gain = random_tensor({5}, rng, 0.5, 1.5);
    auto bias = random_tensor({5}, rng, -0.3, 0.3);
    track(fd_check([&](Tape* t) { return mul(t, layer_norm(t, x, gain, bias), w); },
                   {x, gain, bias}));

    auto cx = random_tensor({6, 2}, rng);
    auto ck = random_tensor({3, 2, 3}, rng);
    auto cb = random_tensor({3}, rng);
    track(fd_check(
        [&](Tape* t) { return conv1d(t, cx, ck, cb, 1, Padding::Same); },
        {cx, ck, cb}));
    auto sk = random_tensor({3, 2, 3}, rng);
    track(fd_check(
        [&](Tape* t) { return conv1d(t, cx, sk, cb, 2, Padding::Valid); },
        {cx, sk, cb}));

    auto dk = random_tensor({3, 2}, rng);
    auto db = random_tensor({2}, rng);
    track(fd_check([&](Tape* t) { return depthwise_conv1d(t, cx, dk, db); },
                   {cx, dk, db}));

    auto act = random_tensor({3, 4}, rng, -2, 2);
    for (auto& v : act->values)
      if (std::abs(v) < 1e-3) v = 0.4;  // keep clear of the relu kink
    track(fd_check([&](Tape* t) { return relu(t, act); }, {act}));
    track(fd_check([&](Tape* t) { return gelu(t, act); }, {act}));
    track(fd_check([&](Tape* t) { return sigmoid(t, act); }, {act}));
    track(fd_check([&](Tape* t) { return swish(t, act); }, {act}));
    auto gx = random_tensor({3, 6}, rng);
    track(fd_check([&](Tape* t) { return glu(t, gx); }, {gx}));

    auto px = random_tensor({7, 2}, rng);
    track(fd_check([&](Tape* t) { return maxpool1d(t, px, 2, 2); }, {px}));

    // weight the output: sum of batch-normalized rows is constant, which would
    // zero the true gradient and leave only finite-difference noise
    BatchNormState bn(3);
    auto bx = random_tensor({6, 3}, rng);
    auto bw = random_tensor({6, 3}, rng, -1, 1, false);
    track(fd_check(
        [&](Tape* t) { return mul(t, batch_norm1d(t, bx, bn, Mode::Train), bw); },
        {bx, bn.gamma, bn.beta}));

    ParamRegistry mreg;
    MultiHeadAttention mhsa(mreg, "mhsa", 4, 4, 4, 4, 2, rng);
    auto mx = random_tensor({4, 4}, rng);
    std::vector<TensorPtr> mwrt = {mx};
    for (auto& [n, p] : mreg.params) mwrt.push_back(p);
    track(fd_check([&](Tape* t) { return mhsa.self(t, mx); }, mwrt));
  }

  // whole models at T=6, width 16, one block, |V_g| = 4
  ConformerConfig ccfg;
  ccfg.d_model = 16;
  ccfg.n_blocks = 1;
  ccfg.n_heads = 2;
  ccfg.conv_kernel = 3;
  ccfg.ffn_expansion = 2;
  ccfg.encoder_channels = {16};
  ccfg.dropout = 0.0;

  FusionConfig fcfg;
  fcfg.d_model = 16;
  fcfg.attn_heads = 2;
  fcfg.n_transformer_blocks = 1;
  fcfg.main_channels = {8};
  fcfg.aux_channels = {8};
  fcfg.ffn_expansion = 2;
  fcfg.mlp_hidden = 16;
  fcfg.dropout = 0.0;
  fcfg.block_dropout = 0.0;

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(3000 + seed), fwd_rng(1), pick_rng(4000 + seed);
    // the first two seeds sweep every coordinate; later seeds sample 300 each
    const std::size_t cap = seed < 2 ? 0 : 300;

    ConformerModel cm(ccfg, 4, 5000 + seed);
    auto cx = random_tensor({6, 172}, rng);
    auto cw = random_tensor({6, 5}, rng, -1, 1, false);
    std::vector<TensorPtr> cwrt = {cx};
    for (auto& [n, p] : cm.params().params) cwrt.push_back(p);
    worst_model = std::max(
        worst_model,
        fd_check(
            [&](Tape* t) {
              return mul(t, cm.forward_batch(t, {cx}, Mode::Train, fwd_rng)[0], cw);
            },
            cwrt, cap, &pick_rng));

    FusionModel fm(fcfg, 4, 6000 + seed);
    auto fx = random_tensor({6, 172}, rng);
    auto fw = random_tensor({6, 5}, rng, -1, 1, false);
    std::vector<TensorPtr> fwrt = {fx};
    for (auto& [n, p] : fm.params().params) fwrt.push_back(p);
    worst_model = std::max(
        worst_model,
        fd_check(
            [&](Tape* t) {
              return mul(t, fm.forward_batch(t, {fx}, Mode::Train, fwd_rng)[0], fw);
            },
            fwrt, cap, &pick_rng));
  }

  const double dt = seconds_since(start);
  std::ostringstream msg;
  msg << "gradients vs central differences, 20 seeds: kernels worst "
      << worst_kernel << ", whole models worst " << worst_model;
  report(2, worst_kernel < 1e-4 && worst_model < 1e-3 && dt < 120.0, msg.str(), dt);
}

// --- criterion 3: WER vs exhaustive edit-script minimum ---------------------

std::size_t edit_oracle(const std::vector<int>& a, const std::vector<int>& b) {
  // memoized recursion over edit scripts; independent of the production DP
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> memo((n + 1) * (m + 1), SIZE_MAX);
  std::function<std::size_t(std::size_t, std::size_t)> go =
      [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == n) return m - j;
    if (j == m) return n - i;
    auto& slot = memo[i * (m + 1) + j];
    if (slot != SIZE_MAX) return slot;
    std::size_t best = go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    best = std::min(best, go(i + 1, j) + 1);
    best = std::min(best, go(i, j + 1) + 1);
    return slot = best;
  };
  return go(0, 0);
}

void enumerate_sequences(std::size_t max_len, std::vector<std::vector<int>>& out) {
  out.push_back({});
  std::vector<std::vector<int>> frontier = {{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::vector<int>> next;
    for (const auto& base : frontier)
      for (int s = 1; s <= 4; ++s) {
        auto seq = base;
        seq.push_back(s);
        out.push_back(seq);
        next.push_back(std::move(seq));
      }
    frontier = std::move(next);
  }
}

void criterion_3() {
  const auto start = Clock::now();
  bool ok = true;
  std::size_t pairs = 0;

  // hand cases first: identity and a single deletion over two words
  ok &= wer({{1, 2, 3}}, {{1, 2, 3}}).rate == 0.0;
  ok &= wer({{1, 2}}, {{1}}).rate == 0.5;

  std::vector<std::vector<int>> seqs;
  enumerate_sequences(6, seqs);
  for (const auto& ref : seqs) {
    if (ref.empty()) continue;
    for (const auto& hyp : seqs) {
      const auto res = wer({ref}, {hyp});
      if (res.ops.total() != edit_oracle(ref, hyp)) {
        ok = false;
        break;
      }
      ++pairs;
    }
    if (!ok) break;
  }
  const double dt = seconds_since(start);
  std::ostringstream msg;
  msg << "edit distance vs exhaustive minimum on " << pairs
      << " pairs (4 symbols, lengths <= 6) plus hand cases";
  report(3, ok, msg.str(), dt);
}

// --- criterion 4: shape contracts -------------------------------------------

void criterion_4() {
  const auto start = Clock::now();
  bool ok = true;
  std::ostringstream why;

  ConformerConfig ccfg;  // defaults: d_model 144, 4 blocks
  ConformerModel conformer(ccfg, 10, 1);
  FusionConfig fcfg;  // defaults: D_ms 288, 4 blocks
  FusionModel fusion(fcfg, 10, 1);
  std::mt19937_64 rng(7), fwd_rng(1);

  for (std::size_t t_len = 4; t_len <= 64 && ok; ++t_len) {
    auto x = random_tensor({t_len, 172}, rng, -1, 1, false);
    auto c = conformer.forward_batch(nullptr, {x}, Mode::Train, fwd_rng)[0];
    if (c->rows() != t_len || c->cols() != 11) {
      ok = false;
      why << "conformer T=" << t_len << " -> " << c->shape_str();
    }
    auto f = fusion.forward_batch(nullptr, {x}, Mode::Train, fwd_rng)[0];
    if (f->rows() != t_len || f->cols() != 11) {
      ok = false;
      why << "fusion T=" << t_len << " -> " << f->shape_str();
    }
  }

  // the auxiliary path runs at exactly floor(T/2) frames: after nearest-repeat
  // upsampling its channels are constant on frame pairs (2j, 2j+1)
  const std::size_t aux_begin = fcfg.main_channels.back();
  for (std::size_t t_len : {4, 5, 9, 16, 33}) {
    auto z = random_tensor({t_len, fcfg.d_model}, rng, -1, 1, false);
    auto fused = fusion.dual_path_encode(nullptr, {z}, Mode::Train)[0];
    if (fused->rows() != t_len) ok = false;
    for (std::size_t j = 0; 2 * j + 1 < t_len; ++j)
      for (std::size_t c = aux_begin; c < fused->cols(); ++c)
        if (fused->at(2 * j, c) != fused->at(2 * j + 1, c)) ok = false;
    if (t_len % 2 == 1 && t_len >= 3)
      for (std::size_t c = aux_begin; c < fused->cols(); ++c)
        if (fused->at(t_len - 1, c) != fused->at(t_len - 2, c)) ok = false;
  }

  // below the floor the fusion model must refuse
  auto one = random_tensor({1, 172}, rng, -1, 1, false);
  try {
    fusion.forward_batch(nullptr, {one}, Mode::Train, fwd_rng);
    ok = false;
    why << " T=1 accepted by fusion";
  } catch (const DimensionError&) {
  }

  const double dt = seconds_since(start);
  std::ostringstream msg;
  msg << "default-config shapes T x 172 -> T x 11 for T in [4, 64]; aux path at "
         "floor(T/2)";
  if (!ok) msg << " | " << why.str();
  report(4, ok, msg.str(), dt);
}

// --- criterion 5: overfit smoke test ----------------------------------------

ConformerConfig small_conformer_cfg() {
  ConformerConfig cfg;
  cfg.d_model = 32;
  cfg.n_blocks = 2;
  cfg.n_heads = 4;
  cfg.conv_kernel = 3;
  cfg.ffn_expansion = 2;
  cfg.encoder_channels = {32};
  cfg.dropout = 0.0;
  return cfg;
}

FusionConfig small_fusion_cfg() {
  FusionConfig cfg;
  cfg.d_model = 32;
  cfg.attn_heads = 4;
  cfg.n_transformer_blocks = 2;
  cfg.main_channels = {16};
  cfg.aux_channels = {16};
  cfg.ffn_expansion = 2;
  cfg.mlp_hidden = 32;
  cfg.dropout = 0.0;
  cfg.block_dropout = 0.0;
  return cfg;
}

void criterion_5() {
  const auto start = Clock::now();
  SynthCorpusSpec spec;  // defaults: 6 glosses, 2 signers, 20 sentences
  spec.seed = 501;
  auto corpus = generate_synthetic_corpus(spec, SplitKind::SignerIndependent);
  auto vocab = build_vocabulary(corpus.train);
  auto train = prepare_samples(corpus.train, vocab);

  TrainConfig tcfg;
  tcfg.lr = 2e-3;
  tcfg.lr_min = 2e-4;
  tcfg.epochs = 200;
  tcfg.batch_size = 8;
  tcfg.seed = 7;

  auto run = [&](SequenceModel& model) {
    auto result = train_model(model, vocab, train, train, tcfg, std::nullopt, nullptr);
    double best = 1e9;
    for (const auto& e : result.log) best = std::min(best, e.dev_wer);
    return best;
  };

  ConformerModel conformer(small_conformer_cfg(), vocab.size(), 11);
  const double conformer_wer = run(conformer);
  FusionModel fusion(small_fusion_cfg(), vocab.size(), 13);
  const double fusion_wer = run(fusion);

  const double dt = seconds_since(start);
  std::ostringstream msg;
  msg << "overfit 20 samples / 6 glosses / 2 signers: best train greedy-WER "
      << "conformer " << conformer_wer << ", fusion " << fusion_wer
      << " (target < 0.05 within 200 epochs)";
  report(5, conformer_wer < 0.05 && fusion_wer < 0.05 && dt < 900.0, msg.str(), dt);
}

// --- criterion 6: split-behavior direction check ----------------------------

void criterion_6() {
  const auto start = Clock::now();
  SynthCorpusSpec spec;
  spec.n_glosses = 8;
  spec.n_signers = 8;
  spec.n_sentences = 200;
  spec.seed = 601;

  TrainConfig tcfg;
  tcfg.lr = 2e-3;
  tcfg.lr_min = 2e-4;
  tcfg.epochs = 12;
  tcfg.batch_size = 16;
  tcfg.seed = 17;

  // signer-independent split, conformer
  auto si = generate_synthetic_corpus(spec, SplitKind::SignerIndependent);
  auto si_vocab = build_vocabulary(si.train);
  auto si_train = prepare_samples(si.train, si_vocab);
  auto si_dev = prepare_samples(si.dev, si_vocab);
  auto si_test = prepare_samples(si.test, si_vocab);
  ConformerModel conformer(small_conformer_cfg(), si_vocab.size(), 19);
  train_model(conformer, si_vocab, si_train, si_dev, tcfg, std::nullopt, nullptr);
  const double si_dev_wer = dataset_wer(conformer, si_dev);
  const double si_test_wer = dataset_wer(conformer, si_test);

  // unseen-sentence split, fusion; longer training lets the model fit the
  // seen sentence compositions, which is exactly what this split measures
  auto us = generate_synthetic_corpus(spec, SplitKind::UnseenSentences);
  auto us_vocab = build_vocabulary(us.train);
  auto us_train = prepare_samples(us.train, us_vocab);
  auto us_dev = prepare_samples(us.dev, us_vocab);
  auto us_test = prepare_samples(us.test, us_vocab);
  FusionModel fusion(small_fusion_cfg(), us_vocab.size(), 23);
  TrainConfig us_cfg = tcfg;
  us_cfg.epochs = 60;
  train_model(fusion, us_vocab, us_train, us_dev, us_cfg, std::nullopt, nullptr);
  const double us_dev_wer = dataset_wer(fusion, us_dev);
  const double us_test_wer = dataset_wer(fusion, us_test);

  const bool si_ok = std::isfinite(si_test_wer) && si_test_wer <= 2.0 * si_dev_wer;
  const bool us_ok = us_test_wer > us_dev_wer;
  const double dt = seconds_since(start);
  std::ostringstream msg;
  msg << "held-out signers: dev " << si_dev_wer << " test " << si_test_wer
      << " (test <= 2x dev); unseen sentences: dev " << us_dev_wer << " test "
      << us_test_wer << " (test > dev)";
  report(6, si_ok && us_ok, msg.str(), dt);
}

// --- criterion 7: preprocessing invariance ----------------------------------

void criterion_7() {
  const auto start = Clock::now();
  std::mt19937_64 rng(701);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> scale_d(0.2, 5.0);
  std::uniform_real_distribution<double> shift_d(-50.0, 50.0);
  std::bernoulli_distribution drop(0.1);

  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    KeypointSequence seq;
    seq.frames.resize(8);
    for (auto& frame : seq.frames) {
      frame.resize(kNumLandmarks);
      for (auto& lm : frame) lm = {u(rng), u(rng), !drop(rng)};
    }
    for (auto& frame : seq.frames)  // keep the torso well-conditioned
      for (std::size_t k : kDefaultTorsoIndices)
        frame[k].valid = true;
    for (std::size_t k = 0; k < kNumLandmarks; ++k) seq.frames[0][k].valid = true;

    const double s = scale_d(rng);
    const double dx = shift_d(rng), dy = shift_d(rng);
    auto moved = seq;
    for (auto& frame : moved.frames)
      for (auto& lm : frame) {
        lm.x = lm.x * s + dx;
        lm.y = lm.y * s + dy;
      }

    auto a = preprocess(seq).data;
    auto b = preprocess(moved).data;
    for (std::size_t i = 0; i < a->size(); ++i)
      worst = std::max(worst, std::abs(a->values[i] - b->values[i]));
  }
  const double dt = seconds_since(start);
  std::ostringstream msg;
  msg << "preprocessing invariant to translation and uniform scale, worst dev "
      << worst;
  report(7, worst <= 1e-9, msg.str(), dt);
}

// --- criterion 8: bit-identical fixed-seed runs -----------------------------

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_8() {
  const auto start = Clock::now();
  SynthCorpusSpec spec;
  spec.n_glosses = 4;
  spec.n_sentences = 10;
  spec.seed = 801;
  auto corpus = generate_synthetic_corpus(spec, SplitKind::UnseenSentences);
  auto vocab = build_vocabulary(corpus.train);
  auto train = prepare_samples(corpus.train, vocab);
  auto dev = prepare_samples(corpus.dev, vocab);

  TrainConfig tcfg;
  tcfg.lr = 1e-3;
  tcfg.epochs = 3;
  tcfg.batch_size = 4;
  tcfg.seed = 29;

  auto dir = std::filesystem::temp_directory_path() / "cslr_acceptance_determinism";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  auto run = [&](const std::filesystem::path& ckpt) {
    ConformerModel model(small_conformer_cfg(), vocab.size(), 31);
    train_model(model, vocab, train, dev, tcfg, ckpt, nullptr);
    auto loaded = load_checkpoint(ckpt);
    auto report = evaluate_model(*loaded.model, loaded.vocab, dev,
                                 DecodeSpec::parse("greedy"));
    std::ostringstream fingerprint;
    fingerprint.precision(17);
    fingerprint << report.pooled;
    for (const auto& s : report.samples) {
      fingerprint << '|' << s.id << ':' << s.wer;
      for (const auto& w : s.hypothesis) fingerprint << ',' << w;
    }
    return fingerprint.str();
  };

  const auto fp1 = run(dir / "run1");
  const auto fp2 = run(dir / "run2");
  const bool blobs_equal =
      file_bytes(dir / "run1.bin") == file_bytes(dir / "run2.bin");
  std::filesystem::remove_all(dir);

  const double dt = seconds_since(start);
  std::ostringstream msg;
  msg << "two fixed-seed train/eval runs: checkpoints "
      << (blobs_equal ? "byte-identical" : "DIFFER") << ", eval reports "
      << (fp1 == fp2 ? "identical" : "DIFFER");
  report(8, blobs_equal && fp1 == fp2, msg.str(), dt);
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  if (g_failures == 0) {
    std::printf("acceptance: all 8 checks passed\n");
    return 0;
  }
  std::printf("acceptance: %d check(s) failed\n", g_failures);
  return 1;
}
