#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gic/error.hpp"

namespace gic {

// Word-level vocabulary over the closed set of class labels.
// Ids 0/1/2 are PAD/BOS/EOS; words follow in first-appearance order.
class Vocabulary {
public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;

  Vocabulary();

  int add_word(const std::string& word); // idempotent, returns id
  bool contains(const std::string& word) const;
  int id(const std::string& word) const; // throws DataError on unknown word
  const std::string& token(int id) const;

  int size() const { return static_cast<int>(id_to_token_.size()); } // includes specials
  int word_count() const { return size() - 3; }

  const std::vector<std::string>& tokens() const { return id_to_token_; }

private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

// Fixed-length token sequence: [BOS, words..., EOS, PAD...].
struct TokenSequence {
  std::vector<int> ids;
  int content_length = 0; // tokens before the first PAD

  int length() const { return static_cast<int>(ids.size()); }
};

// Lowercases, trims and collapses internal whitespace.
std::string canonicalize_label(std::string_view text);

std::vector<std::string> split_words(std::string_view canonical);

// Vocabulary over every word of every label, ids in first-appearance order.
Vocabulary build_vocabulary(const std::vector<std::string>& labels);

// T = max word count over labels + 2 (BOS and EOS).
int max_sequence_length(const std::vector<std::string>& labels);

TokenSequence encode(const std::string& label, const Vocabulary& vocab, int seq_len);

// Total inverse mapping: words between BOS and the first EOS, joined by single
// spaces. PAD is skipped, a missing EOS consumes to the end, and unknown ids
// render as "⟨unk:id⟩".
std::string decode(std::span<const int> ids, const Vocabulary& vocab);

} // namespace gic
