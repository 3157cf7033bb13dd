#include "cslr/eval.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cslr {

using nlohmann::json;

DecodeSpec DecodeSpec::parse(const std::string& text) {
  DecodeSpec d;
  if (text == "greedy") {
    d.kind = Kind::Greedy;
    return d;
  }
  if (text.rfind("beam:", 0) == 0) {
    d.kind = Kind::Beam;
    try {
      const long k = std::stol(text.substr(5));
      if (k < 1) throw std::invalid_argument(text);
      d.beam_width = static_cast<std::size_t>(k);
    } catch (const std::exception&) {
      throw ConfigError("bad decode spec `" + text + "`, expected greedy or beam:K");
    }
    return d;
  }
  throw ConfigError("bad decode spec `" + text + "`, expected greedy or beam:K");
}

std::string DecodeSpec::describe() const {
  return kind == Kind::Greedy ? "greedy" : "beam:" + std::to_string(beam_width);
}

GlossSequence decode_sample(SequenceModel& model, const TensorPtr& features,
                            const DecodeSpec& decode) {
  std::mt19937_64 rng(0);
  auto logits = model.forward_batch(nullptr, {features}, Mode::Eval, rng);
  auto log_probs = log_softmax_rows(nullptr, logits[0]);
  return decode.kind == DecodeSpec::Kind::Greedy
             ? greedy_decode(log_probs)
             : beam_decode(log_probs, decode.beam_width);
}

EvalReport evaluate_model(SequenceModel& model, const GlossVocabulary& vocab,
                          const std::vector<TrainSample>& samples,
                          const DecodeSpec& decode) {
  EvalReport report;
  report.decoder = decode.describe();
  for (const auto& s : samples) {
    auto hyp = decode_sample(model, s.features, decode);
    auto res = wer(s.target, hyp);
    SampleReport sr;
    sr.id = s.id;
    sr.wer = res.rate;
    sr.ops = res.ops;
    sr.reference = vocab.decode(s.target);
    sr.hypothesis = vocab.decode(hyp);
    report.totals += res.ops;
    report.samples.push_back(std::move(sr));
  }
  report.pooled = pooled_wer(report.totals);
  return report;
}

void write_report_jsonl(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report: " + path.string());
  for (const auto& s : report.samples) {
    json rec = {{"id", s.id},
                {"wer", s.wer},
                {"sub", s.ops.substitutions},
                {"ins", s.ops.insertions},
                {"del", s.ops.deletions},
                {"ref_len", s.ops.reference_len},
                {"ref", s.reference},
                {"hyp", s.hypothesis}};
    out << rec.dump() << "\n";
  }
  json summary = {{"pooled_wer", report.pooled},
                  {"decoder", report.decoder},
                  {"sub", report.totals.substitutions},
                  {"ins", report.totals.insertions},
                  {"del", report.totals.deletions},
                  {"ref_len", report.totals.reference_len}};
  out << summary.dump() << "\n";
}

std::string format_report_table(const EvalReport& report) {
  std::ostringstream os;
  os << "id\twer\tS\tI\tD\tN\n";
  for (const auto& s : report.samples)
    os << s.id << "\t" << s.wer << "\t" << s.ops.substitutions << "\t"
       << s.ops.insertions << "\t" << s.ops.deletions << "\t" << s.ops.reference_len
       << "\n";
  os << "pooled\t" << report.pooled << "\t" << report.totals.substitutions << "\t"
     << report.totals.insertions << "\t" << report.totals.deletions << "\t"
     << report.totals.reference_len << "\t(" << report.decoder << ")\n";
  return os.str();
}

}  // namespace cslr
