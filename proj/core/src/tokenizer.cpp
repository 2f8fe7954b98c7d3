#include "gic/tokenizer.hpp"

#include <cctype>

namespace gic {

Vocabulary::Vocabulary() {
  id_to_token_ = {"<pad>", "<bos>", "<eos>"};
  for (int i = 0; i < 3; ++i) token_to_id_[id_to_token_[i]] = i;
}

int Vocabulary::add_word(const std::string& word) {
  auto it = token_to_id_.find(word);
  if (it != token_to_id_.end()) return it->second;
  int id = size();
  id_to_token_.push_back(word);
  token_to_id_[word] = id;
  return id;
}

bool Vocabulary::contains(const std::string& word) const { return token_to_id_.count(word) != 0; }

int Vocabulary::id(const std::string& word) const {
  auto it = token_to_id_.find(word);
  if (it == token_to_id_.end()) throw DataError("unknown word \"" + word + "\"");
  return it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw DataError("token id " + std::to_string(id) + " out of range");
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::string canonicalize_label(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_space = true; // leading whitespace dropped
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out += ' ';
    in_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::vector<std::string> split_words(std::string_view canonical) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : canonical) {
    if (c == ' ') {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

Vocabulary build_vocabulary(const std::vector<std::string>& labels) {
  Vocabulary vocab;
  bool any = false;
  for (const auto& label : labels) {
    for (const auto& word : split_words(canonicalize_label(label))) {
      vocab.add_word(word);
      any = true;
    }
  }
  if (!any) throw DataError("build_vocabulary: no non-empty labels");
  return vocab;
}

int max_sequence_length(const std::vector<std::string>& labels) {
  std::size_t longest = 0;
  for (const auto& label : labels) {
    longest = std::max(longest, split_words(canonicalize_label(label)).size());
  }
  return static_cast<int>(longest) + 2;
}

TokenSequence encode(const std::string& label, const Vocabulary& vocab, int seq_len) {
  auto words = split_words(canonicalize_label(label));
  if (static_cast<int>(words.size()) + 2 > seq_len) {
    throw DataError("label \"" + label + "\" does not fit sequence length " + std::to_string(seq_len));
  }
  TokenSequence seq;
  seq.ids.reserve(static_cast<std::size_t>(seq_len));
  seq.ids.push_back(Vocabulary::kBos);
  for (const auto& w : words) seq.ids.push_back(vocab.id(w));
  seq.ids.push_back(Vocabulary::kEos);
  seq.content_length = static_cast<int>(seq.ids.size());
  seq.ids.resize(static_cast<std::size_t>(seq_len), Vocabulary::kPad);
  return seq;
}

std::string decode(std::span<const int> ids, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    int id = ids[i];
    if (id == Vocabulary::kBos || id == Vocabulary::kPad) continue;
    if (id == Vocabulary::kEos) break;
    if (!out.empty()) out += ' ';
    if (id < 0 || id >= vocab.size()) {
      out += "⟨unk:" + std::to_string(id) + "⟩";
    } else {
      out += vocab.token(id);
    }
  }
  return out;
}

} // namespace gic
