#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace forge {

// Ordered list of affirmative target sentences guiding the universal
// perturbation. Never empty, never contains blank sentences.
struct Corpus {
  std::vector<std::string> sentences;

  static Corpus from_lines(std::vector<std::string> lines);

  // Text file, one sentence per line; blank lines and '#' comments skipped.
  static Corpus load(const std::filesystem::path& path);

  // The built-in 16-sentence affirmative corpus. A reconstruction shipped as
  // a usable default; replace it with your own file for real runs.
  static Corpus default_affirmative();

  std::size_t size() const { return sentences.size(); }

  // Unique normalized words across all sentences, in first-seen order.
  std::vector<std::string> vocabulary_words() const;
};

}  // namespace forge
