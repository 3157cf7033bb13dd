#pragma once

#include <filesystem>

#include "cslr/train.hpp"

namespace cslr {

struct DecodeSpec {
  enum class Kind { Greedy, Beam } kind = Kind::Greedy;
  std::size_t beam_width = 8;

  // "greedy" or "beam:K"
  static DecodeSpec parse(const std::string& text);
  std::string describe() const;
};

struct SampleReport {
  std::string id;
  double wer = 0.0;
  EditOps ops;
  std::vector<std::string> reference;
  std::vector<std::string> hypothesis;
};

struct EvalReport {
  std::vector<SampleReport> samples;
  EditOps totals;
  double pooled = 0.0;  // sum(S+I+D) / sum(N), not mean of rates
  std::string decoder;
};

GlossSequence decode_sample(SequenceModel& model, const TensorPtr& features,
                            const DecodeSpec& decode);

EvalReport evaluate_model(SequenceModel& model, const GlossVocabulary& vocab,
                          const std::vector<TrainSample>& samples,
                          const DecodeSpec& decode);

void write_report_jsonl(const std::filesystem::path& path, const EvalReport& report);
std::string format_report_table(const EvalReport& report);

}  // namespace cslr
