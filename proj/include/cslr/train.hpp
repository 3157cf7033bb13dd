#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "cslr/ctc.hpp"
#include "cslr/dataset.hpp"
#include "cslr/model.hpp"
#include "cslr/wer.hpp"

namespace cslr {

struct TrainConfig {
  double lr = 1e-4;
  double lr_min = 1e-6;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 16;
  std::size_t epochs = 60;
  std::uint64_t seed = 0;
  double grad_clip_norm = 5.0;

  void validate() const;
};

// lr(0) = lr, lr(epochs-1) = lr_min, half-cosine in between.
double cosine_lr(const TrainConfig& cfg, std::size_t epoch);

struct TrainSample {
  std::string id;
  TensorPtr features;  // T x 172
  GlossSequence target;
};

// Preprocess raw sequences and encode their labels against `vocab`.
std::vector<TrainSample> prepare_samples(const std::vector<KeypointSequence>& raw,
                                         const GlossVocabulary& vocab);

/// Adam with decoupled weight decay over a parameter registry.
class AdamW {
 public:
  AdamW(ParamRegistry& reg, const TrainConfig& cfg);
  void step(double lr);

 private:
  ParamRegistry& reg_;
  TrainConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

// Scales gradients so their global L2 norm is at most max_norm.
void clip_grad_norm(ParamRegistry& reg, double max_norm);

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double dev_wer = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  double best_dev_wer = 0.0;
  std::size_t best_epoch = 0;
};

// Greedy-decode WER over a sample set in eval mode.
double dataset_wer(SequenceModel& model, const std::vector<TrainSample>& samples);

// Shuffled mini-batch CTC training, deterministic under cfg.seed. Saves the
// best-dev-WER checkpoint to `checkpoint_path` when given (falls back to the
// train set when `dev` is empty). Loss NaN aborts with NumericError, leaving
// the last good checkpoint on disk. Infeasible targets name the sample id.
TrainResult train_model(SequenceModel& model, const GlossVocabulary& vocab,
                        const std::vector<TrainSample>& train,
                        const std::vector<TrainSample>& dev, const TrainConfig& cfg,
                        const std::optional<std::filesystem::path>& checkpoint_path,
                        std::ostream* log_stream);

}  // namespace cslr
