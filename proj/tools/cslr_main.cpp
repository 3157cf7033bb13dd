#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cslr/checkpoint.hpp"
#include "cslr/config.hpp"
#include "cslr/dataset.hpp"
#include "cslr/eval.hpp"
#include "cslr/synth.hpp"
#include "cslr/train.hpp"

namespace {

using namespace cslr;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::vector<std::size_t> parse_index_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoul(item));
  }
  if (out.empty()) throw ConfigError("empty index list: " + text);
  return out;
}

std::map<std::string, std::vector<std::string>> read_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open tsv file: " + path);
  std::map<std::string, std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    const std::string id = tab == std::string::npos ? line : line.substr(0, tab);
    std::vector<std::string> tokens;
    if (tab != std::string::npos) {
      std::stringstream ss(line.substr(tab + 1));
      std::string tok;
      while (ss >> tok) tokens.push_back(tok);
    }
    if (!out.emplace(id, std::move(tokens)).second)
      throw DataError("duplicate id in tsv: " + id);
  }
  return out;
}

SynthCorpusSpec spec_from_config(const FlatConfig& cfg) {
  SynthCorpusSpec spec;
  spec.n_glosses = static_cast<std::size_t>(cfg.get_int("n_glosses", 6));
  spec.n_signers = static_cast<std::size_t>(cfg.get_int("n_signers", 2));
  spec.n_sentences = static_cast<std::size_t>(cfg.get_int("n_sentences", 20));
  spec.sentence_len_min = static_cast<std::size_t>(cfg.get_int("sentence_len_min", 2));
  spec.sentence_len_max = static_cast<std::size_t>(cfg.get_int("sentence_len_max", 4));
  spec.frames_per_gloss_min =
      static_cast<std::size_t>(cfg.get_int("frames_per_gloss_min", 5));
  spec.frames_per_gloss_max =
      static_cast<std::size_t>(cfg.get_int("frames_per_gloss_max", 9));
  spec.noise_sigma = cfg.get_double("noise_sigma", 0.005);
  spec.missing_prob = cfg.get_double("missing_prob", 0.0);
  spec.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  return spec;
}

TrainConfig train_config_from_file(const FlatConfig& cfg) {
  TrainConfig tc;
  tc.lr = cfg.get_double("lr", tc.lr);
  tc.lr_min = cfg.get_double("lr_min", tc.lr_min);
  tc.weight_decay = cfg.get_double("weight_decay", tc.weight_decay);
  tc.batch_size = static_cast<std::size_t>(cfg.get_int("batch_size", 16));
  tc.epochs = static_cast<std::size_t>(cfg.get_int("epochs", 60));
  tc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  tc.grad_clip_norm = cfg.get_double("grad_clip_norm", tc.grad_clip_norm);
  return tc;
}

std::unique_ptr<SequenceModel> build_model(const std::string& kind,
                                           const FlatConfig& cfg, std::size_t vocab,
                                           std::uint64_t seed) {
  if (kind == "conformer_si") {
    ConformerConfig mc;
    mc.d_model = static_cast<std::size_t>(cfg.get_int("model.d_model", mc.d_model));
    mc.n_blocks = static_cast<std::size_t>(cfg.get_int("model.n_blocks", mc.n_blocks));
    mc.n_heads = static_cast<std::size_t>(cfg.get_int("model.n_heads", mc.n_heads));
    mc.conv_kernel =
        static_cast<std::size_t>(cfg.get_int("model.conv_kernel", mc.conv_kernel));
    mc.encoder_stride =
        static_cast<std::size_t>(cfg.get_int("model.encoder_stride", mc.encoder_stride));
    mc.dropout = cfg.get_double("model.dropout", mc.dropout);
    if (cfg.has("model.encoder_channels")) {
      mc.encoder_channels = parse_index_list(cfg.get_string("model.encoder_channels"));
    } else if (cfg.has("model.d_model")) {
      mc.encoder_channels = {mc.d_model, mc.d_model};
    }
    return std::make_unique<ConformerModel>(mc, vocab, seed);
  }
  if (kind == "fusion_us") {
    FusionConfig fc;
    fc.d_model = static_cast<std::size_t>(cfg.get_int("model.d_model", fc.d_model));
    fc.attn_heads =
        static_cast<std::size_t>(cfg.get_int("model.attn_heads", fc.attn_heads));
    fc.n_transformer_blocks = static_cast<std::size_t>(
        cfg.get_int("model.n_transformer_blocks", fc.n_transformer_blocks));
    fc.mlp_hidden =
        static_cast<std::size_t>(cfg.get_int("model.mlp_hidden", fc.mlp_hidden));
    fc.dropout = cfg.get_double("model.dropout", fc.dropout);
    fc.block_dropout = cfg.get_double("model.block_dropout", fc.block_dropout);
    if (cfg.has("model.main_channels"))
      fc.main_channels = parse_index_list(cfg.get_string("model.main_channels"));
    else if (cfg.has("model.d_model"))
      fc.main_channels = {fc.d_model, fc.d_model};
    if (cfg.has("model.aux_channels"))
      fc.aux_channels = parse_index_list(cfg.get_string("model.aux_channels"));
    else if (cfg.has("model.d_model"))
      fc.aux_channels = {fc.d_model, fc.d_model};
    return std::make_unique<FusionModel>(fc, vocab, seed);
  }
  throw ConfigError("unknown model kind `" + kind +
                    "`, expected conformer_si or fusion_us");
}

void check_vocab_compat(const GlossVocabulary& ckpt_vocab,
                        const std::vector<KeypointSequence>& sequences) {
  for (const auto& seq : sequences)
    for (const auto& tok : seq.gloss_tokens)
      if (!ckpt_vocab.contains(tok))
        throw ConfigError("manifest gloss `" + tok +
                          "` not in checkpoint vocabulary (sample " + seq.id + ")");
}

int run(int argc, char** argv) {
  CLI::App app{"Pose-based continuous sign language recognition toolkit"};
  app.require_subcommand(1);

  // preprocess
  auto* pre = app.add_subcommand("preprocess",
                                 "Interpolate, normalize and re-save a dataset");
  std::string pre_manifest, pre_out, pre_torso;
  pre->add_option("--manifest", pre_manifest)->required();
  pre->add_option("--out", pre_out)->required();
  pre->add_option("--torso-indices", pre_torso, "comma-separated landmark slots");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  std::string synth_spec, synth_out, synth_split = "si";
  synth->add_option("--spec", synth_spec)->required();
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--split", synth_split, "si or us (overrides spec file)");

  // train
  auto* train = app.add_subcommand("train", "Train a model on a corpus directory");
  std::string train_model_kind, train_cfg_path, train_data, train_out;
  train->add_option("--model", train_model_kind)->required();
  train->add_option("--config", train_cfg_path)->required();
  train->add_option("--data", train_data)->required();
  train->add_option("--out", train_out)->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Score a checkpoint against a manifest");
  std::string eval_ckpt, eval_manifest, eval_decode = "greedy", eval_report;
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--manifest", eval_manifest)->required();
  eval->add_option("--decode", eval_decode, "greedy or beam:K");
  eval->add_option("--report", eval_report, "jsonl output path");

  // decode
  auto* dec = app.add_subcommand("decode", "Emit one hypothesis line per input id");
  std::string dec_ckpt, dec_manifest;
  std::size_t dec_beam = 0;
  dec->add_option("--checkpoint", dec_ckpt)->required();
  dec->add_option("--manifest", dec_manifest)->required();
  dec->add_option("--beam", dec_beam, "beam width; 0 = greedy");

  // wer
  auto* werc = app.add_subcommand("wer", "Pooled WER between ref and hyp tsv files");
  std::string wer_ref, wer_hyp;
  werc->add_option("--ref", wer_ref)->required();
  werc->add_option("--hyp", wer_hyp)->required();

  CLI11_PARSE(app, argc, argv);

  if (pre->parsed()) {
    auto sequences = load_dataset(pre_manifest);
    auto torso = pre_torso.empty() ? kDefaultTorsoIndices : parse_index_list(pre_torso);
    std::vector<KeypointSequence> processed;
    for (const auto& seq : sequences) {
      auto features = flatten(normalize_torso(interpolate_missing(seq), torso));
      auto back = unflatten(features);
      back.id = seq.id;
      back.signer_id = seq.signer_id;
      back.gloss_tokens = seq.gloss_tokens;
      processed.push_back(std::move(back));
    }
    save_dataset(processed, pre_out);
    std::cout << "wrote " << processed.size() << " records to " << pre_out << "\n";
    return 0;
  }

  if (synth->parsed()) {
    auto cfg = FlatConfig::parse_file(synth_spec);
    auto spec = spec_from_config(cfg);
    const std::string split_name = cfg.get_string("split", synth_split);
    SplitKind split;
    if (split_name == "si")
      split = SplitKind::SignerIndependent;
    else if (split_name == "us")
      split = SplitKind::UnseenSentences;
    else
      throw ConfigError("split must be si or us, got `" + split_name + "`");
    auto corpus = generate_synthetic_corpus(spec, split);
    std::filesystem::create_directories(synth_out);
    const std::filesystem::path out(synth_out);
    save_dataset(corpus.train, out / "train.jsonl");
    save_dataset(corpus.dev, out / "dev.jsonl");
    save_dataset(corpus.test, out / "test.jsonl");
    std::cout << "train=" << corpus.train.size() << " dev=" << corpus.dev.size()
              << " test=" << corpus.test.size() << " -> " << synth_out << "\n";
    return 0;
  }

  if (train->parsed()) {
    auto cfg = FlatConfig::parse_file(train_cfg_path);
    auto tc = train_config_from_file(cfg);
    const std::filesystem::path data(train_data);
    auto train_raw = load_dataset(data / "train.jsonl");
    std::vector<KeypointSequence> dev_raw;
    if (std::filesystem::exists(data / "dev.jsonl"))
      dev_raw = load_dataset(data / "dev.jsonl");
    auto vocab = build_vocabulary(train_raw);
    auto model = build_model(train_model_kind, cfg, vocab.size(), tc.seed);
    auto train_samples = prepare_samples(train_raw, vocab);
    auto dev_samples = prepare_samples(dev_raw, vocab);
    auto result = train_model(*model, vocab, train_samples, dev_samples, tc,
                              std::filesystem::path(train_out), &std::cout);
    std::cout << "best dev_wer=" << result.best_dev_wer
              << " at epoch " << result.best_epoch << "\n";
    return 0;
  }

  if (eval->parsed() || dec->parsed()) {
    const bool is_eval = eval->parsed();
    auto loaded = load_checkpoint(is_eval ? eval_ckpt : dec_ckpt);
    auto raw = load_dataset(is_eval ? eval_manifest : dec_manifest);
    check_vocab_compat(loaded.vocab, raw);
    auto samples = prepare_samples(raw, loaded.vocab);
    if (is_eval) {
      auto report = evaluate_model(*loaded.model, loaded.vocab, samples,
                                   DecodeSpec::parse(eval_decode));
      if (!eval_report.empty()) write_report_jsonl(eval_report, report);
      std::cout << format_report_table(report);
    } else {
      DecodeSpec spec;
      if (dec_beam > 0) {
        spec.kind = DecodeSpec::Kind::Beam;
        spec.beam_width = dec_beam;
      }
      for (const auto& s : samples) {
        auto hyp = decode_sample(*loaded.model, s.features, spec);
        std::cout << s.id << "\t";
        const auto words = loaded.vocab.decode(hyp);
        for (std::size_t i = 0; i < words.size(); ++i)
          std::cout << (i ? " " : "") << words[i];
        std::cout << "\n";
      }
    }
    return 0;
  }

  if (werc->parsed()) {
    auto refs = read_tsv(wer_ref);
    auto hyps = read_tsv(wer_hyp);
    GlossVocabulary vocab;
    EditOps totals;
    for (const auto& [id, ref_tokens] : refs) {
      auto it = hyps.find(id);
      if (it == hyps.end()) throw DataError("hyp file missing id: " + id);
      GlossSequence ref, hyp;
      for (const auto& t : ref_tokens) ref.ids.push_back(vocab.add(t));
      for (const auto& t : it->second) hyp.ids.push_back(vocab.add(t));
      totals += wer(ref, hyp).ops;
    }
    std::cout << "pooled_wer=" << pooled_wer(totals) << " S=" << totals.substitutions
              << " I=" << totals.insertions << " D=" << totals.deletions
              << " N=" << totals.reference_len << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const InfeasibleAlignmentError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DimensionError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
