#include "cslr/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "cslr/checkpoint.hpp"

namespace cslr {

void TrainConfig::validate() const {
  if (lr <= 0.0 || lr_min <= 0.0 || lr_min > lr)
    throw ConfigError("train: need 0 < lr_min <= lr");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (grad_clip_norm <= 0.0) throw ConfigError("train: grad_clip_norm must be > 0");
}

double cosine_lr(const TrainConfig& cfg, std::size_t epoch) {
  if (cfg.epochs <= 1) return cfg.lr;
  const double progress =
      static_cast<double>(std::min(epoch, cfg.epochs - 1)) /
      static_cast<double>(cfg.epochs - 1);
  return cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (1.0 + std::cos(M_PI * progress));
}

std::vector<TrainSample> prepare_samples(const std::vector<KeypointSequence>& raw,
                                         const GlossVocabulary& vocab) {
  std::vector<TrainSample> out;
  out.reserve(raw.size());
  for (const auto& seq : raw) {
    TrainSample s;
    s.id = seq.id;
    s.features = preprocess(seq).data;
    s.target = vocab.encode(seq.gloss_tokens);
    out.push_back(std::move(s));
  }
  return out;
}

AdamW::AdamW(ParamRegistry& reg, const TrainConfig& cfg) : reg_(reg), cfg_(cfg) {
  for (const auto& [name, tensor] : reg.params) {
    m_.emplace_back(tensor->size(), 0.0);
    v_.emplace_back(tensor->size(), 0.0);
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t p = 0; p < reg_.params.size(); ++p) {
    auto& tensor = *reg_.params[p].second;
    if (tensor.grad.empty()) continue;
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double g = tensor.grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      // decoupled weight decay
      tensor.values[i] -= lr * cfg_.weight_decay * tensor.values[i];
      tensor.values[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.adam_eps);
    }
  }
}

void clip_grad_norm(ParamRegistry& reg, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, tensor] : reg.params)
    for (double g : tensor->grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return;
  const double s = max_norm / norm;
  for (auto& [name, tensor] : reg.params)
    for (auto& g : tensor->grad) g *= s;
}

double dataset_wer(SequenceModel& model, const std::vector<TrainSample>& samples) {
  std::mt19937_64 rng(0);  // unused in eval mode
  EditOps totals;
  for (const auto& s : samples) {
    auto logits = model.forward_batch(nullptr, {s.features}, Mode::Eval, rng);
    auto hyp = greedy_decode(log_softmax_rows(nullptr, logits[0]));
    totals += wer(s.target, hyp).ops;
  }
  return pooled_wer(totals);
}

TrainResult train_model(SequenceModel& model, const GlossVocabulary& vocab,
                        const std::vector<TrainSample>& train,
                        const std::vector<TrainSample>& dev, const TrainConfig& cfg,
                        const std::optional<std::filesystem::path>& checkpoint_path,
                        std::ostream* log_stream) {
  cfg.validate();
  if (train.empty()) throw DataError("train: empty training set");
  for (const auto& s : train) {
    if (s.features->rows() < model.min_input_length())
      throw DataError("train: sample " + s.id + " shorter than the model minimum");
    if (s.target.ids.empty())
      throw DataError("train: sample " + s.id + " has no gloss labels");
  }

  AdamW optimizer(model.params(), cfg);
  std::mt19937_64 order_rng(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x5bf03635ULL);

  TrainResult result;
  result.best_dev_wer = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> indices(train.size());
  std::iota(indices.begin(), indices.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(cfg, epoch);
    std::shuffle(indices.begin(), indices.end(), order_rng);

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t start = 0; start < indices.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, indices.size());
      std::vector<TensorPtr> inputs;
      std::vector<const TrainSample*> batch;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&train[indices[i]]);
        inputs.push_back(batch.back()->features);
      }

      Tape tape;
      model.params().zero_grads();
      auto logits = model.forward_batch(&tape, inputs, Mode::Train, dropout_rng);
      const double inv_b = 1.0 / static_cast<double>(batch.size());
      double batch_loss = 0.0;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        auto log_probs = log_softmax_rows(&tape, logits[i]);
        try {
          batch_loss += ctc_loss_on_tape(&tape, log_probs, batch[i]->target, inv_b);
        } catch (const InfeasibleAlignmentError& e) {
          throw InfeasibleAlignmentError("sample " + batch[i]->id + ": " + e.what());
        }
      }
      batch_loss *= inv_b;
      if (!std::isfinite(batch_loss))
        throw NumericError("train: loss diverged (NaN/Inf) at epoch " +
                           std::to_string(epoch) + "; last good checkpoint kept");
      tape.backward();
      clip_grad_norm(model.params(), cfg.grad_clip_norm);
      optimizer.step(lr);
      loss_sum += batch_loss;
      ++loss_count;
    }

    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = loss_sum / static_cast<double>(loss_count);
    log.lr = lr;
    log.dev_wer = dataset_wer(model, dev.empty() ? train : dev);
    result.log.push_back(log);
    if (log_stream)
      *log_stream << "epoch=" << epoch << " loss=" << log.mean_loss
                  << " dev_wer=" << log.dev_wer << " lr=" << lr << "\n";

    if (log.dev_wer < result.best_dev_wer) {
      result.best_dev_wer = log.dev_wer;
      result.best_epoch = epoch;
      if (checkpoint_path) save_checkpoint(*checkpoint_path, model, vocab);
    }
  }
  return result;
}

}  // namespace cslr
