#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace forge {

// Closed-vocabulary word tokenizer shared by the toy models. Ids 0..2 are the
// reserved specials <bos>, <eos>, <unk>; they are prepended to whatever word
// list the vocabulary is built from.
class WordTokenizer {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kUnk = 2;

  explicit WordTokenizer(const std::vector<std::string>& words);

  // Lowercase, keep [a-z0-9'], split on everything else.
  static std::vector<std::string> normalize_words(const std::string& text);

  // strict: unknown word -> TokenizationError; empty text -> TokenizationError.
  // lossy: unknown words map to <unk>; empty text -> empty sequence.
  std::vector<int> encode(const std::string& text, bool strict) const;

  // Words joined by single spaces; specials are skipped; surrounding
  // whitespace inside vocabulary entries is trimmed.
  std::string decode(std::span<const int> ids) const;

  int vocab_size() const { return static_cast<int>(words_.size()); }
  const std::string& word(int id) const;
  int id_of(const std::string& word) const;  // -1 if absent
  bool contains(const std::string& word) const { return id_of(word) >= 0; }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace forge
