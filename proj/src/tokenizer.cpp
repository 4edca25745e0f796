#include "forge/tokenizer.hpp"

#include <algorithm>
#include <cctype>

#include "forge/errors.hpp"

namespace forge {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

WordTokenizer::WordTokenizer(const std::vector<std::string>& words) {
  words_ = {"<bos>", "<eos>", "<unk>"};
  index_["<bos>"] = kBos;
  index_["<eos>"] = kEos;
  index_["<unk>"] = kUnk;
  for (const auto& w : words) {
    if (index_.count(w)) continue;
    index_[w] = static_cast<int>(words_.size());
    words_.push_back(w);
  }
}

std::vector<std::string> WordTokenizer::normalize_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char raw : text) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '\'') {
      cur.push_back(c);
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<int> WordTokenizer::encode(const std::string& text, bool strict) const {
  const auto words = normalize_words(text);
  if (words.empty()) {
    if (strict) throw TokenizationError("empty text");
    return {};
  }
  std::vector<int> ids;
  ids.reserve(words.size());
  for (const auto& w : words) {
    const int id = id_of(w);
    if (id < 0) {
      if (strict) throw TokenizationError("out-of-vocabulary word: '" + w + "'");
      ids.push_back(kUnk);
    } else {
      ids.push_back(id);
    }
  }
  return ids;
}

std::string WordTokenizer::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id == kBos || id == kEos || id == kUnk) continue;
    const std::string w = trim(word(id));
    if (w.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

const std::string& WordTokenizer::word(int id) const {
  if (id < 0 || id >= vocab_size())
    throw TokenizationError("token id out of range: " + std::to_string(id));
  return words_[static_cast<std::size_t>(id)];
}

int WordTokenizer::id_of(const std::string& word) const {
  const auto it = index_.find(word);
  return it == index_.end() ? -1 : it->second;
}

}  // namespace forge
