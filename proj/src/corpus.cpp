// Copyright 2026 The tbcnn Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tbcnn/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace tbcnn::corpus {
namespace fs = std::filesystem;

namespace {

bool is_ascii_alnum(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

char ascii_lower(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

// Length of a `<br>`, `<br/>` or `<br />` tag starting at `pos`, or 0.
std::size_t br_tag_length(std::string_view text, std::size_t pos) {
  std::size_t i = pos + 1;
  auto skip_spaces = [&] {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
  };
  skip_spaces();
  if (i + 1 >= text.size() || ascii_lower(text[i]) != 'b' || ascii_lower(text[i + 1]) != 'r') {
    return 0;
  }
  i += 2;
  skip_spaces();
  if (i < text.size() && text[i] == '/') ++i;
  skip_spaces();
  if (i < text.size() && text[i] == '>') return i + 1 - pos;
  return 0;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

int parse_label(std::string_view token, const std::string& where) {
  if (token == "pos") return kPositive;
  if (token == "neg") return kNegative;
  throw Error("unknown label '" + std::string(token) + "' at " + where);
}

}  // namespace

Vocabulary::Vocabulary() {
  words_.emplace_back(kPadToken);
  counts_.push_back(0);
  index_.emplace(std::string(kPadToken), kPadIndex);
}

std::optional<std::int32_t> Vocabulary::find(const std::string& word) const {
  const auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::int32_t Vocabulary::add(const std::string& word, std::int64_t count) {
  const auto index = static_cast<std::int32_t>(words_.size());
  if (!index_.emplace(word, index).second) throw Error("duplicate vocabulary word: " + word);
  words_.push_back(word);
  counts_.push_back(count);
  return index;
}

void Vocabulary::save(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write vocabulary: " + path.string());
  for (std::size_t i = 1; i < words_.size(); ++i) out << words_[i] << '\t' << counts_[i] << '\n';
}

Vocabulary Vocabulary::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read vocabulary: " + path.string());
  Vocabulary vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": expected word<TAB>count");
    }
    std::int64_t count = 0;
    const char* first = line.data() + tab + 1;
    const char* last = line.data() + line.size();
    if (std::from_chars(first, last, count).ec != std::errc{}) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": bad count");
    }
    vocab.add(line.substr(0, tab), count);
  }
  return vocab;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == '<') {
      if (const std::size_t len = br_tag_length(text, i); len > 0) i += len - 1;
      flush();
    } else if (is_ascii_alnum(c) || c >= 0x80) {
      current.push_back(ascii_lower(c));
    } else if (c == '\'' && !current.empty() && i + 1 < text.size() &&
               is_ascii_alnum(static_cast<unsigned char>(text[i + 1]))) {
      // Intra-word apostrophe: drop it and keep the word together.
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

Vocabulary build_vocabulary(std::span<const LabeledDocument> docs, std::size_t min_count,
                            std::size_t max_size) {
  if (docs.empty()) throw Error("build_vocabulary: no documents");
  if (min_count < 1) throw Error("build_vocabulary: min_count must be >= 1");
  std::unordered_map<std::string, std::int64_t> freq;
  for (const auto& doc : docs) {
    for (const auto& token : doc.tokens) ++freq[token];
  }
  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (auto& [word, count] : freq) {
    if (count >= static_cast<std::int64_t>(min_count)) kept.emplace_back(word, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (max_size != kUnlimited) {
    const std::size_t room = max_size > 0 ? max_size - 1 : 0;
    if (kept.size() > room) kept.resize(room);
  }
  if (kept.empty()) {
    throw Error("build_vocabulary: no word reaches min_count " + std::to_string(min_count));
  }
  Vocabulary vocab;
  for (const auto& [word, count] : kept) vocab.add(word, count);
  return vocab;
}

PaddedDocument encode(const LabeledDocument& doc, const Vocabulary& vocab, std::size_t length) {
  if (length < 1) throw Error("encode: length must be >= 1");
  PaddedDocument out;
  out.label = doc.label;
  out.doc_id = doc.doc_id;
  out.indices.assign(length, Vocabulary::kPadIndex);
  std::size_t n = 0;
  for (const auto& token : doc.tokens) {
    if (n == length) break;
    if (const auto index = vocab.find(token)) out.indices[n++] = *index;
  }
  out.true_length = n;
  return out;
}

LabeledDocument decode(const PaddedDocument& doc, const Vocabulary& vocab) {
  LabeledDocument out;
  out.label = doc.label;
  out.doc_id = doc.doc_id;
  for (std::size_t i = 0; i < doc.true_length; ++i) out.tokens.push_back(vocab.word(doc.indices[i]));
  return out;
}

std::vector<LabeledDocument> load_imdb_split(const fs::path& split_dir) {
  std::vector<LabeledDocument> docs;
  for (const auto& [name, label] : {std::pair{"neg", kNegative}, std::pair{"pos", kPositive}}) {
    const fs::path dir = split_dir / name;
    if (!fs::is_directory(dir)) throw Error("missing directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      LabeledDocument doc;
      doc.tokens = tokenize(read_file(file));
      if (doc.tokens.empty()) throw Error("document has no tokens: " + file.string());
      doc.label = label;
      doc.doc_id = static_cast<std::int64_t>(docs.size());
      docs.push_back(std::move(doc));
    }
  }
  return docs;
}

std::vector<LabeledDocument> load_delimited(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot read file: " + file.string());
  std::vector<LabeledDocument> docs;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = file.string() + " row " + std::to_string(row);
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error("missing <TAB> separator at " + where);
    LabeledDocument doc;
    doc.label = parse_label(std::string_view(line).substr(0, tab), where);
    doc.tokens = tokenize(std::string_view(line).substr(tab + 1));
    if (doc.tokens.empty()) throw Error("document has no tokens at " + where);
    doc.doc_id = static_cast<std::int64_t>(docs.size());
    docs.push_back(std::move(doc));
  }
  return docs;
}

Dataset load_dataset(const fs::path& root) {
  if (!fs::exists(root)) throw Error("dataset path does not exist: " + root.string());
  Dataset data;
  if (fs::is_directory(root / "train") && fs::is_directory(root / "test")) {
    data.train = load_imdb_split(root / "train");
    data.test = load_imdb_split(root / "test");
  } else if (fs::is_regular_file(root / "train.tsv") && fs::is_regular_file(root / "test.tsv")) {
    data.train = load_delimited(root / "train.tsv");
    data.test = load_delimited(root / "test.tsv");
  } else {
    throw Error("unrecognized dataset layout at " + root.string() +
                " (expected train/ and test/ directories or train.tsv and test.tsv)");
  }
  return data;
}

void save_encoded(const fs::path& path, std::span<const PaddedDocument> docs) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write encoded corpus: " + path.string());
  for (const auto& doc : docs) {
    out << doc.doc_id << '\t' << doc.label << '\t' << doc.true_length << '\t';
    for (std::size_t i = 0; i < doc.indices.size(); ++i) {
      if (i) out << ' ';
      out << doc.indices[i];
    }
    out << '\n';
  }
}

std::vector<PaddedDocument> load_encoded(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read encoded corpus: " + path.string());
  std::vector<PaddedDocument> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    PaddedDocument doc;
    if (!(fields >> doc.doc_id >> doc.label >> doc.true_length)) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": malformed record");
    }
    std::int32_t index = 0;
    while (fields >> index) doc.indices.push_back(index);
    if (doc.true_length > doc.indices.size()) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": true_length exceeds length");
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace tbcnn::corpus
