#include "cslr/checkpoint.hpp"

#include <bit>
#include <fstream>

namespace cslr {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs assume a little-endian host");

namespace {

fs::path manifest_path(const fs::path& base) { return base.string() + ".json"; }
fs::path blob_path(const fs::path& base) { return base.string() + ".bin"; }

}  // namespace

void save_checkpoint(const fs::path& path, SequenceModel& model,
                     const GlossVocabulary& vocab) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  json manifest;
  manifest["schema_version"] = 1;
  manifest["model_kind"] = model.kind();
  manifest["config"] = model.config_json();
  manifest["vocab"] = vocab.tokens();

  std::vector<double> blob;
  json params = json::array();
  auto append = [&](const std::string& name, const std::vector<std::size_t>& shape,
                    const std::vector<double>& values) {
    params.push_back({{"name", name}, {"shape", shape}, {"offset", blob.size()}});
    blob.insert(blob.end(), values.begin(), values.end());
  };
  for (const auto& [name, tensor] : model.params().params)
    append(name, tensor->shape, tensor->values);
  json bn = json::array();
  for (const auto& [name, state] : model.params().bn_states) {
    append(name + ".running_mean", {state->running_mean.size()}, state->running_mean);
    append(name + ".running_var", {state->running_var.size()}, state->running_var);
    bn.push_back({{"name", name}, {"initialized", state->initialized}});
  }
  manifest["params"] = params;
  manifest["bn"] = bn;

  std::ofstream mout(manifest_path(path));
  if (!mout) throw DataError("cannot write checkpoint manifest: " + path.string());
  mout << manifest.dump(2) << "\n";

  std::ofstream bout(blob_path(path), std::ios::binary);
  if (!bout) throw DataError("cannot write checkpoint blob: " + path.string());
  bout.write(reinterpret_cast<const char*>(blob.data()),
             static_cast<std::streamsize>(blob.size() * sizeof(double)));
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
  std::ifstream min(manifest_path(path));
  if (!min) throw DataError("cannot open checkpoint manifest: " + path.string());
  json manifest;
  try {
    min >> manifest;
  } catch (const json::exception& e) {
    throw DataError("checkpoint manifest parse error: " + std::string(e.what()));
  }
  if (manifest.value("schema_version", 0) != 1)
    throw DataError("checkpoint: unsupported schema_version");

  LoadedCheckpoint out;
  out.vocab = GlossVocabulary(manifest.at("vocab").get<std::vector<std::string>>());
  const std::string kind = manifest.at("model_kind");
  if (kind == "conformer_si") {
    out.model = std::make_unique<ConformerModel>(
        ConformerConfig::from_json(manifest.at("config")), out.vocab.size(), 0);
  } else if (kind == "fusion_us") {
    out.model = std::make_unique<FusionModel>(
        FusionConfig::from_json(manifest.at("config")), out.vocab.size(), 0);
  } else {
    throw ConfigError("checkpoint: unknown model_kind `" + kind + "`");
  }

  std::ifstream bin(blob_path(path), std::ios::binary);
  if (!bin) throw DataError("cannot open checkpoint blob: " + path.string());
  bin.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(bin.tellg());
  bin.seekg(0);
  std::vector<double> blob(bytes / sizeof(double));
  bin.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(bytes));
  if (!bin) throw DataError("checkpoint blob truncated: " + path.string());

  auto read_into = [&](const json& entry, std::vector<double>& dst,
                       const std::vector<std::size_t>& expect_shape) {
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape != expect_shape)
      throw DataError("checkpoint: shape mismatch for parameter `" +
                      entry.at("name").get<std::string>() + "`");
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    const auto offset = entry.at("offset").get<std::size_t>();
    if (offset + n > blob.size())
      throw DataError("checkpoint: blob out of range for parameter `" +
                      entry.at("name").get<std::string>() + "`");
    dst.assign(blob.begin() + static_cast<std::ptrdiff_t>(offset),
               blob.begin() + static_cast<std::ptrdiff_t>(offset + n));
  };

  std::unordered_map<std::string, const json*> by_name;
  for (const auto& entry : manifest.at("params"))
    by_name[entry.at("name").get<std::string>()] = &entry;
  auto lookup = [&](const std::string& name) -> const json& {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw DataError("checkpoint: missing parameter `" + name + "`");
    return *it->second;
  };

  auto& reg = out.model->params();
  for (auto& [name, tensor] : reg.params)
    read_into(lookup(name), tensor->values, tensor->shape);
  for (auto& [name, state] : reg.bn_states) {
    read_into(lookup(name + ".running_mean"), state->running_mean,
              {state->running_mean.size()});
    read_into(lookup(name + ".running_var"), state->running_var,
              {state->running_var.size()});
  }
  for (const auto& entry : manifest.at("bn")) {
    const std::string name = entry.at("name");
    for (auto& [n, state] : reg.bn_states)
      if (n == name) state->initialized = entry.at("initialized").get<bool>();
  }
  return out;
}

}  // namespace cslr
