#include "forge/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "forge/errors.hpp"
#include "forge/rng.hpp"
#include "forge/sha256.hpp"

namespace forge::eval {

namespace {

const std::vector<std::string> kTextColumns{"prompt",      "text",       "goal",
                                            "behavior",    "instruction", "question"};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// RFC 4180: quoted fields may contain commas, newlines and doubled quotes.
std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;

  char c;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) {
          throw IngestError("row " + std::to_string(rows.size()) +
                            ": stray quote inside unquoted field");
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (field_started || !field.empty() || !row.empty()) {
          row.push_back(std::move(field));
          field.clear();
          rows.push_back(std::move(row));
          row.clear();
          field_started = false;
        }
        break;
      default:
        field += c;
    }
  }
  if (in_quotes) throw IngestError("unterminated quoted field at end of file");
  if (field_started || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

int find_column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (lower(header[i]) == lower(name)) return static_cast<int>(i);
  }
  return -1;
}

std::vector<PromptRow> rows_from_csv(std::istream& in, const std::string& text_column,
                                     const std::filesystem::path& path) {
  auto rows = parse_csv(in);
  if (rows.empty()) throw IngestError("empty dataset file: " + path.string());

  const auto& header = rows.front();
  int text_col = -1;
  if (!text_column.empty()) {
    text_col = find_column(header, text_column);
    if (text_col < 0) {
      throw IngestError("column '" + text_column + "' not found in " + path.string());
    }
  } else {
    for (const auto& candidate : kTextColumns) {
      text_col = find_column(header, candidate);
      if (text_col >= 0) break;
    }
    if (text_col < 0) {
      throw IngestError("no recognizable text column in " + path.string() +
                        " (looked for prompt/text/goal/behavior/instruction/question)");
    }
  }
  const int id_col = find_column(header, "id");
  const int topic_col = find_column(header, "topic");

  std::vector<PromptRow> prompts;
  std::vector<std::string> bad;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    if (static_cast<std::size_t>(text_col) >= cells.size() ||
        cells[static_cast<std::size_t>(text_col)].empty()) {
      bad.push_back(std::to_string(r));
      continue;
    }
    PromptRow row;
    row.text = cells[static_cast<std::size_t>(text_col)];
    row.id = (id_col >= 0 && static_cast<std::size_t>(id_col) < cells.size() &&
              !cells[static_cast<std::size_t>(id_col)].empty())
                 ? cells[static_cast<std::size_t>(id_col)]
                 : "row-" + std::to_string(r - 1);
    if (topic_col >= 0 && static_cast<std::size_t>(topic_col) < cells.size()) {
      row.topic = cells[static_cast<std::size_t>(topic_col)];
    }
    prompts.push_back(std::move(row));
  }
  if (!bad.empty()) {
    std::string joined;
    for (const auto& b : bad) joined += (joined.empty() ? "" : ", ") + b;
    throw IngestError("malformed rows in " + path.string() + ": " + joined);
  }
  return prompts;
}

std::vector<PromptRow> rows_from_json(std::istream& in, const std::string& text_column,
                                      const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IngestError("invalid json in " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw IngestError("expected a json array in " + path.string());

  std::vector<PromptRow> prompts;
  std::vector<std::string> bad;
  for (std::size_t r = 0; r < doc.size(); ++r) {
    const auto& item = doc[r];
    PromptRow row;
    if (item.is_string()) {
      row.text = item.get<std::string>();
    } else if (item.is_object()) {
      if (!text_column.empty()) {
        if (item.contains(text_column) && item[text_column].is_string()) {
          row.text = item[text_column].get<std::string>();
        }
      } else {
        for (const auto& candidate : kTextColumns) {
          if (item.contains(candidate) && item[candidate].is_string()) {
            row.text = item[candidate].get<std::string>();
            break;
          }
        }
      }
      if (item.contains("id")) {
        if (item["id"].is_string()) {
          row.id = item["id"].get<std::string>();
        } else if (item["id"].is_number_integer()) {
          row.id = std::to_string(item["id"].get<long long>());
        }
      }
      if (item.contains("topic") && item["topic"].is_string()) {
        row.topic = item["topic"].get<std::string>();
      }
    }
    if (row.text.empty()) {
      bad.push_back(std::to_string(r));
      continue;
    }
    if (row.id.empty()) row.id = "row-" + std::to_string(r);
    prompts.push_back(std::move(row));
  }
  if (!bad.empty()) {
    std::string joined;
    for (const auto& b : bad) joined += (joined.empty() ? "" : ", ") + b;
    throw IngestError("malformed rows in " + path.string() + ": " + joined);
  }
  return prompts;
}

}  // namespace

const std::vector<std::string>& SafetyDataset::known_ids() {
  static const std::vector<std::string> ids{"advbench", "mm-safetybench", "redteam-2k",
                                            "harmful-instructions", "custom"};
  return ids;
}

SafetyDataset load_dataset(const std::filesystem::path& path, const std::string& dataset_id,
                           const std::string& text_column) {
  const auto& ids = SafetyDataset::known_ids();
  if (std::find(ids.begin(), ids.end(), dataset_id) == ids.end()) {
    throw ConfigError("dataset_id", "unknown id '" + dataset_id + "'");
  }

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open dataset: " + path.string());

  const std::string ext = lower(path.extension().string());
  bool as_json;
  if (ext == ".json" || ext == ".jsonl") {
    as_json = true;
  } else if (ext == ".csv" || ext == ".tsv") {
    as_json = false;
  } else {
    int c = in.peek();
    while (c == ' ' || c == '\n' || c == '\r' || c == '\t') {
      in.get();
      c = in.peek();
    }
    as_json = (c == '[');
  }

  SafetyDataset ds;
  ds.dataset_id = dataset_id;
  ds.prompts = as_json ? rows_from_json(in, text_column, path)
                       : rows_from_csv(in, text_column, path);
  if (ds.prompts.empty()) throw IngestError("dataset has no prompts: " + path.string());

  std::unordered_set<std::string> seen;
  std::vector<std::string> dups;
  for (std::size_t i = 0; i < ds.prompts.size(); ++i) {
    if (!seen.insert(ds.prompts[i].id).second) dups.push_back(std::to_string(i));
  }
  if (!dups.empty()) {
    std::string joined;
    for (const auto& d : dups) joined += (joined.empty() ? "" : ", ") + d;
    throw IngestError("duplicate prompt ids in " + path.string() + " at rows: " + joined);
  }

  ds.source_hash = sha256_file_hex(path);
  return ds;
}

SafetyDataset sample_prompts(const SafetyDataset& dataset, std::size_t n,
                             std::uint64_t seed) {
  if (n > dataset.prompts.size()) {
    throw RangeError("sample_prompts: n (" + std::to_string(n) + ") exceeds dataset size (" +
                     std::to_string(dataset.prompts.size()) + ")");
  }

  std::vector<std::size_t> idx(dataset.prompts.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  Rng rng(mix64(seed ^ 0x73616d70ULL));
  for (std::size_t i = 0; i < n; ++i) {  // partial Fisher-Yates
    const std::size_t j = i + rng.below(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());  // keep source row order

  SafetyDataset out;
  out.dataset_id = dataset.dataset_id;
  out.source_hash = dataset.source_hash;
  out.prompts.reserve(n);
  for (std::size_t i : idx) out.prompts.push_back(dataset.prompts[i]);
  return out;
}

}  // namespace forge::eval
