#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "recurnas/error.hpp"

namespace recurnas {

// Character-level corpus: one shared vocabulary over all three splits,
// token ids dense from 0 in byte order.
struct Corpus {
  std::vector<int> train, valid, test;
  std::string vocab;  // id -> character

  int vocab_size() const { return static_cast<int>(vocab.size()); }

  const std::vector<int>& split(std::string_view name) const {
    if (name == "train") return train;
    if (name == "valid") return valid;
    if (name == "test") return test;
    throw Error(ErrorKind::Config, "unknown split '" + std::string(name) + "'");
  }
};

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::Io, "read failed on " + path.string());
  return text;
}

inline Corpus load_corpus(const std::filesystem::path& dir) {
  const std::string raw[3] = {read_text_file(dir / "train.txt"),
                              read_text_file(dir / "valid.txt"),
                              read_text_file(dir / "test.txt")};
  std::set<char> chars;
  for (const auto& text : raw)
    for (char c : text) chars.insert(c);
  if (chars.empty()) throw Error(ErrorKind::Config, "corpus at " + dir.string() + " is empty");

  Corpus corpus;
  corpus.vocab.assign(chars.begin(), chars.end());
  int id_of[256];
  std::fill(std::begin(id_of), std::end(id_of), -1);
  for (size_t i = 0; i < corpus.vocab.size(); ++i)
    id_of[static_cast<unsigned char>(corpus.vocab[i])] = static_cast<int>(i);

  std::vector<int>* out[3] = {&corpus.train, &corpus.valid, &corpus.test};
  for (int s = 0; s < 3; ++s) {
    out[s]->reserve(raw[s].size());
    for (char c : raw[s]) out[s]->push_back(id_of[static_cast<unsigned char>(c)]);
  }
  return corpus;
}

// Splits the token stream into batch_size contiguous rows of equal length,
// dropping the tail that does not fill a full column.
inline std::vector<std::vector<int>> batchify(const std::vector<int>& ids, int batch_size) {
  if (batch_size < 1) throw Error(ErrorKind::Config, "batch_size must be positive");
  const size_t len = ids.size() / static_cast<size_t>(batch_size);
  std::vector<std::vector<int>> rows(static_cast<size_t>(batch_size));
  for (int b = 0; b < batch_size; ++b)
    rows[b].assign(ids.begin() + static_cast<size_t>(b) * len,
                   ids.begin() + static_cast<size_t>(b + 1) * len);
  return rows;
}

}  // namespace recurnas
