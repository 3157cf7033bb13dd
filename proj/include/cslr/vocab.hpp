#pragma once

#include <algorithm>
#include <string>
#include <unordered_map>
#include <vector>

#include "cslr/errors.hpp"

namespace cslr {

constexpr int kBlankIndex = 0;

/// Label ids in [1, |V_g|]; never contains the blank.
struct GlossSequence {
  std::vector<int> ids;

  bool operator==(const GlossSequence&) const = default;
  std::size_t length() const { return ids.size(); }
};

/// Ordered gloss tokens; id 0 is the reserved CTC blank, glosses occupy [1, |V_g|].
class GlossVocabulary {
 public:
  GlossVocabulary() = default;
  explicit GlossVocabulary(std::vector<std::string> tokens) {
    for (auto& t : tokens) add(t);
  }

  int add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    tokens_.push_back(token);
    const int id = static_cast<int>(tokens_.size());
    index_.emplace(token, id);
    return id;
  }

  int id_of(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) throw DataError("unknown gloss token: " + token);
    return it->second;
  }

  bool contains(const std::string& token) const { return index_.count(token) > 0; }

  const std::string& token_of(int id) const {
    if (id < 1 || id > static_cast<int>(tokens_.size()))
      throw DataError("gloss id out of range: " + std::to_string(id));
    return tokens_[static_cast<std::size_t>(id) - 1];
  }

  std::size_t size() const { return tokens_.size(); }
  std::size_t output_width() const { return tokens_.size() + 1; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  GlossSequence encode(const std::vector<std::string>& words) const {
    GlossSequence s;
    s.ids.reserve(words.size());
    for (const auto& w : words) s.ids.push_back(id_of(w));
    return s;
  }

  std::vector<std::string> decode(const GlossSequence& seq) const {
    std::vector<std::string> words;
    words.reserve(seq.ids.size());
    for (int id : seq.ids) words.push_back(token_of(id));
    return words;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace cslr
