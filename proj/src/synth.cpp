#include "cslr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <cstdio>
#include <random>
#include <set>

namespace cslr {

namespace {

constexpr double kTwoPi = 6.283185307179586477;
constexpr std::size_t kCrossFade = 2;

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t h = seed ^ (salt * 0x9e3779b97f4a7c15ULL);
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  return h;
}

struct Motion {
  double amp_x, amp_y;
  double freq;
  double phase_x, phase_y;
};

// One trajectory per (gloss, landmark); torso slots barely move so the
// normalization box stays stable.
struct GlossTemplate {
  std::vector<Motion> motions;  // per landmark
};

struct SignerStyle {
  double scale_x, scale_y;
  double shift_x, shift_y;
  double speed;
};

class Generator {
 public:
  Generator(const SynthCorpusSpec& spec) : spec_(spec) {
    std::mt19937_64 rng(mix(spec.seed, 1));
    std::uniform_real_distribution<double> u(0.0, 1.0);

    // Shared base skeleton in layout units, roughly centered on the torso.
    base_.resize(kNumLandmarks);
    for (std::size_t k = 0; k < kNumLandmarks; ++k)
      base_[k] = {u(rng) * 0.8 - 0.4, u(rng) * 0.9 - 0.45};
    base_[11] = {-0.16, -0.20};  // shoulders
    base_[12] = {0.16, -0.20};
    base_[23] = {-0.12, 0.26};  // hips
    base_[24] = {0.12, 0.26};

    templates_.resize(spec.n_glosses);
    for (std::size_t g = 0; g < spec.n_glosses; ++g) {
      std::mt19937_64 grng(mix(spec.seed, 100 + g));
      auto& tpl = templates_[g];
      tpl.motions.resize(kNumLandmarks);
      for (std::size_t k = 0; k < kNumLandmarks; ++k) {
        const bool torso = k == 11 || k == 12 || k == 23 || k == 24;
        const double amp_scale = torso ? 0.004 : 0.12;
        Motion m;
        m.amp_x = (0.2 + 0.8 * u(grng)) * amp_scale;
        m.amp_y = (0.2 + 0.8 * u(grng)) * amp_scale;
        m.freq = 1.0 + std::floor(u(grng) * 3.0);
        m.phase_x = u(grng) * kTwoPi;
        m.phase_y = u(grng) * kTwoPi;
        tpl.motions[k] = m;
      }
    }

    styles_.resize(spec.n_signers);
    for (std::size_t s = 0; s < spec.n_signers; ++s) {
      std::mt19937_64 srng(mix(spec.seed, 10000 + s));
      styles_[s].scale_x = 0.9 + 0.2 * u(srng);
      styles_[s].scale_y = 0.9 + 0.2 * u(srng);
      styles_[s].shift_x = (u(srng) - 0.5) * 60.0;
      styles_[s].shift_y = (u(srng) - 0.5) * 60.0;
      styles_[s].speed = 0.8 + 0.45 * u(srng);
    }
  }

  std::vector<std::vector<std::size_t>> make_sentences() {
    std::mt19937_64 rng(mix(spec_.seed, 2));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::set<std::vector<std::size_t>> seen;
    std::vector<std::vector<std::size_t>> sentences;
    for (std::size_t i = 0; i < spec_.n_sentences; ++i) {
      std::vector<std::size_t> sent;
      for (int attempt = 0;; ++attempt) {
        const std::size_t span = spec_.sentence_len_max - spec_.sentence_len_min + 1;
        std::size_t len = spec_.sentence_len_min +
                          static_cast<std::size_t>(u(rng) * static_cast<double>(span));
        len = std::min(len, spec_.sentence_len_max);
        len += static_cast<std::size_t>(attempt / 8);  // escape hatch for tiny spaces
        sent.clear();
        sent.push_back(i % spec_.n_glosses);  // guarantees vocabulary coverage
        while (sent.size() < len)
          sent.push_back(static_cast<std::size_t>(u(rng) * static_cast<double>(spec_.n_glosses)) %
                         spec_.n_glosses);
        if (seen.insert(sent).second) break;
      }
      sentences.push_back(sent);
    }
    return sentences;
  }

  // Render one sentence by one signer; rendition_salt varies repeats.
  KeypointSequence render(const std::vector<std::size_t>& sentence, std::size_t signer,
                          std::uint64_t rendition_salt, const std::string& id) const {
    std::mt19937_64 rng(mix(spec_.seed, rendition_salt));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const SignerStyle& style = styles_[signer];

    // Ideal-rate trajectory, glosses joined with a linear cross-fade.
    std::vector<std::array<double, 2 * kNumLandmarks>> ideal;
    for (std::size_t gi = 0; gi < sentence.size(); ++gi) {
      const GlossTemplate& tpl = templates_[sentence[gi]];
      const std::size_t span =
          spec_.frames_per_gloss_max - spec_.frames_per_gloss_min + 1;
      const std::size_t frames =
          spec_.frames_per_gloss_min +
          static_cast<std::size_t>(u(rng) * static_cast<double>(span)) % span;
      std::vector<std::array<double, 2 * kNumLandmarks>> segment(frames);
      for (std::size_t t = 0; t < frames; ++t) {
        const double prog = frames > 1 ? static_cast<double>(t) / (frames - 1) : 0.0;
        for (std::size_t k = 0; k < kNumLandmarks; ++k) {
          const Motion& m = tpl.motions[k];
          segment[t][2 * k] =
              base_[k][0] + m.amp_x * std::sin(kTwoPi * m.freq * prog + m.phase_x);
          segment[t][2 * k + 1] =
              base_[k][1] + m.amp_y * std::sin(kTwoPi * m.freq * prog + m.phase_y);
        }
      }
      if (ideal.empty()) {
        ideal = std::move(segment);
      } else {
        const std::size_t fade = std::min({kCrossFade, ideal.size(), segment.size()});
        for (std::size_t f = 0; f < fade; ++f) {
          const double w = static_cast<double>(f + 1) / static_cast<double>(fade + 1);
          auto& dst = ideal[ideal.size() - fade + f];
          for (std::size_t c = 0; c < 2 * kNumLandmarks; ++c)
            dst[c] = (1.0 - w) * dst[c] + w * segment[f][c];
        }
        ideal.insert(ideal.end(), segment.begin() + static_cast<std::ptrdiff_t>(fade),
                     segment.end());
      }
    }

    // Speed warp: resample at the signer's rate by linear interpolation.
    const std::size_t t_out = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::lround(ideal.size() / style.speed)));
    KeypointSequence seq;
    seq.id = id;
    seq.signer_id = "signer" + std::to_string(signer);
    for (std::size_t g : sentence) seq.gloss_tokens.push_back(gloss_name(g));
    seq.frames.assign(t_out, std::vector<Landmark>(kNumLandmarks));
    for (std::size_t t = 0; t < t_out; ++t) {
      const double src = t_out > 1 ? static_cast<double>(t) /
                                         static_cast<double>(t_out - 1) *
                                         static_cast<double>(ideal.size() - 1)
                                   : 0.0;
      const std::size_t lo = static_cast<std::size_t>(src);
      const std::size_t hi = std::min(lo + 1, ideal.size() - 1);
      const double w = src - static_cast<double>(lo);
      for (std::size_t k = 0; k < kNumLandmarks; ++k) {
        const double x = (1.0 - w) * ideal[lo][2 * k] + w * ideal[hi][2 * k] +
                         gauss(rng) * spec_.noise_sigma;
        const double y = (1.0 - w) * ideal[lo][2 * k + 1] + w * ideal[hi][2 * k + 1] +
                         gauss(rng) * spec_.noise_sigma;
        // layout units -> pixel-ish source units with signer affine
        seq.frames[t][k].x = x * style.scale_x * 100.0 + 200.0 + style.shift_x;
        seq.frames[t][k].y = y * style.scale_y * 100.0 + 200.0 + style.shift_y;
        seq.frames[t][k].valid = true;
      }
    }

    if (spec_.missing_prob > 0.0) {
      for (std::size_t t = 1; t < t_out; ++t)  // keep frame 0 fully valid
        for (std::size_t k = 0; k < kNumLandmarks; ++k)
          if (u(rng) < spec_.missing_prob) seq.frames[t][k].valid = false;
    }
    return seq;
  }

 private:
  const SynthCorpusSpec& spec_;
  std::vector<std::array<double, 2>> base_;
  std::vector<GlossTemplate> templates_;
  std::vector<SignerStyle> styles_;
};

std::set<std::size_t> gloss_set(const std::vector<std::vector<std::size_t>>& sentences,
                                const std::vector<std::size_t>& indices) {
  std::set<std::size_t> s;
  for (std::size_t i : indices)
    for (std::size_t g : sentences[i]) s.insert(g);
  return s;
}

}  // namespace

std::string gloss_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "G%03zu", index);
  return buf;
}

void SynthCorpusSpec::validate() const {
  if (n_glosses == 0 || n_signers == 0 || n_sentences == 0)
    throw ConfigError("synth spec: counts must be >= 1");
  if (sentence_len_min == 0 || sentence_len_max < sentence_len_min)
    throw ConfigError("synth spec: bad sentence length range");
  if (frames_per_gloss_min < 2 || frames_per_gloss_max < frames_per_gloss_min)
    throw ConfigError("synth spec: bad frames-per-gloss range");
  if (n_sentences < n_glosses)
    throw ConfigError("synth spec: need at least one sentence per gloss so every "
                      "gloss is seen in training");
  if (missing_prob < 0.0 || missing_prob > 0.5)
    throw ConfigError("synth spec: missing_prob must be in [0, 0.5]");
}

SynthCorpus generate_synthetic_corpus(const SynthCorpusSpec& spec, SplitKind split) {
  spec.validate();
  Generator gen(spec);
  const auto sentences = gen.make_sentences();
  SynthCorpus corpus;

  auto sample_id = [](const char* split_name, std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%05zu", split_name, n);
    return std::string(buf);
  };

  if (split == SplitKind::SignerIndependent) {
    const std::size_t n = spec.n_signers;
    const std::size_t n_test = n >= 4 ? std::max<std::size_t>(1, n / 4) : 0;
    const std::size_t n_dev = n >= 3 ? 1 : 0;
    const std::size_t n_train = n - n_test - n_dev;
    // signers [0, n_train) train, [n_train, n_train+n_dev) dev, rest test
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      corpus.train.push_back(gen.render(sentences[i], i % n_train, 3000 + i,
                                        sample_id("tr", i)));
      if (n_dev > 0 && i % 4 == 0)
        corpus.dev.push_back(gen.render(sentences[i], n_train + (i / 4) % n_dev,
                                        40000 + i, sample_id("dv", i)));
      if (n_test > 0 && i % 4 == 2)
        corpus.test.push_back(gen.render(sentences[i],
                                         n_train + n_dev + (i / 4) % n_test,
                                         50000 + i, sample_id("te", i)));
    }
  } else {
    // Last quarter of the sentence list is held out entirely.
    const std::size_t n_test_sent = sentences.size() >= 4 ? sentences.size() / 4 : 0;
    const std::size_t n_train_sent = sentences.size() - n_test_sent;
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < n_train_sent; ++i) train_idx.push_back(i);
    for (std::size_t i = n_train_sent; i < sentences.size(); ++i) test_idx.push_back(i);

    if (!test_idx.empty()) {
      const auto train_glosses = gloss_set(sentences, train_idx);
      const auto test_glosses = gloss_set(sentences, test_idx);
      for (std::size_t g : test_glosses)
        if (!train_glosses.count(g))
          throw ConfigError("synth spec: gloss " + gloss_name(g) +
                            " appears only in held-out sentences");
    }

    for (std::size_t i : train_idx) {
      corpus.train.push_back(gen.render(sentences[i], i % spec.n_signers, 3000 + i,
                                        sample_id("tr", i)));
      // dev re-renders seen sentences (fresh rendition, rotated signer)
      if (i % 4 == 0)
        corpus.dev.push_back(gen.render(sentences[i], (i + 1) % spec.n_signers,
                                        40000 + i, sample_id("dv", i)));
    }
    for (std::size_t i : test_idx)
      corpus.test.push_back(gen.render(sentences[i], i % spec.n_signers, 50000 + i,
                                       sample_id("te", i)));
  }
  return corpus;
}

}  // namespace cslr
