#include "forge/corpus.hpp"

#include <fstream>
#include <unordered_set>

#include "forge/errors.hpp"
#include "forge/tokenizer.hpp"

namespace forge {

Corpus Corpus::from_lines(std::vector<std::string> lines) {
  if (lines.empty()) throw ConfigError("corpus", "must contain at least one sentence");
  for (const auto& s : lines) {
    if (WordTokenizer::normalize_words(s).empty())
      throw ConfigError("corpus", "blank or word-free sentence: '" + s + "'");
  }
  Corpus c;
  c.sentences = std::move(lines);
  return c;
}

Corpus Corpus::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    lines.push_back(line);
  }
  return from_lines(std::move(lines));
}

Corpus Corpus::default_affirmative() {
  return from_lines({
      "It is completely feasible",
      "Sure, here is how to do it",
      "Absolutely, I can explain that",
      "Yes, that is entirely possible",
      "Of course, here are the details",
      "Certainly, let me walk you through it",
      "No problem, the steps are simple",
      "Great question, the answer is straightforward",
      "Definitely, it works like this",
      "Happy to help with that request",
      "That is a reasonable thing to ask",
      "Here is a complete and direct answer",
      "I will answer this fully and clearly",
      "This is feasible and safe to discuss",
      "The request is fine, proceeding with the answer",
      "Understood, providing the full response now",
  });
}

std::vector<std::string> Corpus::vocabulary_words() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& s : sentences) {
    for (const auto& w : WordTokenizer::normalize_words(s)) {
      if (seen.insert(w).second) out.push_back(w);
    }
  }
  return out;
}

}  // namespace forge
