#include "cslr/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace cslr {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "dataset blobs assume a little-endian host");

namespace {

std::vector<std::vector<Landmark>> read_blob(const fs::path& path, std::size_t frames) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open landmark blob: " + path.string());
  const std::size_t floats = frames * kNumLandmarks * 3;
  std::vector<float> raw(floats);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(floats * sizeof(float)));
  if (!in || in.gcount() != static_cast<std::streamsize>(floats * sizeof(float)))
    throw DataError("landmark blob truncated: " + path.string());

  std::vector<std::vector<Landmark>> out(frames, std::vector<Landmark>(kNumLandmarks));
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t k = 0; k < kNumLandmarks; ++k) {
      const std::size_t base = (t * kNumLandmarks + k) * 3;
      out[t][k].x = raw[base];
      out[t][k].y = raw[base + 1];
      out[t][k].valid = raw[base + 2] != 0.0f;
    }
  return out;
}

void write_blob(const fs::path& path, const std::vector<std::vector<Landmark>>& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write landmark blob: " + path.string());
  std::vector<float> raw;
  raw.reserve(frames.size() * kNumLandmarks * 3);
  for (const auto& frame : frames)
    for (const auto& lm : frame) {
      raw.push_back(static_cast<float>(lm.x));
      raw.push_back(static_cast<float>(lm.y));
      raw.push_back(lm.valid ? 1.0f : 0.0f);
    }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(float)));
}

}  // namespace

std::vector<KeypointSequence> load_dataset(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest: " + manifest_path.string());
  std::string line;
  if (!std::getline(in, line) || line != "schema_version: 1")
    throw DataError("manifest missing `schema_version: 1` header: " +
                    manifest_path.string());

  const fs::path base = manifest_path.parent_path();
  std::vector<KeypointSequence> sequences;
  std::size_t record_index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("manifest record " + std::to_string(record_index) +
                      " is not valid JSON: " + e.what());
    }
    try {
      KeypointSequence seq;
      seq.id = rec.at("id").get<std::string>();
      seq.signer_id = rec.at("signer_id").get<std::string>();
      seq.gloss_tokens = rec.at("glosses").get<std::vector<std::string>>();
      const auto frames = rec.at("frames").get<std::size_t>();
      if (frames < 1)
        throw DataError("record " + std::to_string(record_index) + ": frames < 1");
      if (rec.contains("landmarks")) {
        const auto k = rec.at("landmarks").get<std::size_t>();
        if (k != kNumLandmarks)
          throw DataError("record " + std::to_string(record_index) + ": K=" +
                          std::to_string(k) + " landmarks, expected " +
                          std::to_string(kNumLandmarks));
      }
      seq.frames = read_blob(base / rec.at("blob").get<std::string>(), frames);
      sequences.push_back(std::move(seq));
    } catch (const json::exception& e) {
      throw DataError("manifest record " + std::to_string(record_index) +
                      " malformed: " + e.what());
    }
    ++record_index;
  }
  return sequences;
}

void save_dataset(const std::vector<KeypointSequence>& sequences,
                  const fs::path& manifest_path) {
  const fs::path base = manifest_path.parent_path();
  const fs::path blob_dir = base / (manifest_path.stem().string() + "_blobs");
  fs::create_directories(blob_dir);

  std::ofstream out(manifest_path);
  if (!out) throw DataError("cannot write manifest: " + manifest_path.string());
  out << "schema_version: 1\n";
  for (const auto& seq : sequences) {
    for (const auto& frame : seq.frames)
      if (frame.size() != kNumLandmarks)
        throw DataError("save_dataset: record " + seq.id + " has frame with " +
                        std::to_string(frame.size()) + " landmarks, expected " +
                        std::to_string(kNumLandmarks));
    const fs::path blob_rel = blob_dir.filename() / (seq.id + ".f32");
    write_blob(base / blob_rel, seq.frames);
    json rec = {{"id", seq.id},
                {"landmarks", kNumLandmarks},
                {"signer_id", seq.signer_id},
                {"glosses", seq.gloss_tokens},
                {"frames", seq.frames.size()},
                {"blob", blob_rel.generic_string()}};
    out << rec.dump() << "\n";
  }
}

GlossVocabulary build_vocabulary(const std::vector<KeypointSequence>& sequences) {
  GlossVocabulary vocab;
  for (const auto& seq : sequences)
    for (const auto& tok : seq.gloss_tokens) vocab.add(tok);
  return vocab;
}

}  // namespace cslr
