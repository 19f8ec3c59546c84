#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "earnn/corpus.hpp"
#include "earnn/embedding.hpp"
#include "earnn/network.hpp"
#include "earnn/rng.hpp"
#include "earnn/training.hpp"

namespace testutil {

// Vocabulary of `words` standalone entries (w0, w1, ...) plus the OOV slot.
inline earnn::Vocabulary toy_vocab(int words) {
  earnn::Vocabulary v;
  v.min_count = 1;
  for (int i = 0; i < words; ++i) {
    const std::string w = "w" + std::to_string(i);
    v.word_to_index.emplace(w, i);
    v.index_to_word.push_back(w);
  }
  v.oov_index = words;
  v.index_to_word.push_back("<oov>");
  return v;
}

inline earnn::ModelParams tiny_params(int dim, int vocab_words, std::uint64_t seed, int relevance = 0) {
  earnn::Dims dims;
  dims.embed = dims.hidden = dim;
  dims.relevance = relevance > 0 ? relevance : dim;
  const auto vocab = toy_vocab(vocab_words);
  auto table = earnn::init_embeddings(vocab, dim, seed + 1);
  return earnn::init_params(dims, std::move(table), seed);
}

// Random tiny instance: N question words, M sentences, topic phrases, ids
// drawn over the vocabulary (OOV excluded).
inline earnn::EncodedQA random_instance(earnn::Rng& rng, int vocab_words, int max_words = 3,
                                        int max_sentences = 3) {
  auto ids = [&](int n) {
    std::vector<int> out;
    for (int i = 0; i < n; ++i) out.push_back(static_cast<int>(rng.index(vocab_words)));
    return out;
  };
  earnn::EncodedQA e;
  e.question = ids(1 + static_cast<int>(rng.index(max_words)));
  const int m = 1 + static_cast<int>(rng.index(max_sentences));
  for (int j = 0; j < m; ++j) e.sentences.push_back(ids(1 + static_cast<int>(rng.index(max_words))));
  const int phrases = 1 + static_cast<int>(rng.index(2));
  for (int j = 0; j < phrases; ++j) e.topics.push_back(ids(1 + static_cast<int>(rng.index(2))));
  e.first_answer_time = 1'000'000;
  e.answer_time = e.first_answer_time + static_cast<std::int64_t>(rng.index(2'000'000));
  return e;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("earnn_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testutil
