#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "earnn/corpus.hpp"
#include "earnn/tensor.hpp"
#include "json.hpp"

namespace earnn {

// Frequency-pruned vocabulary. Indices stay dense; everything below
// min_count shares oov_index (the last slot).
struct Vocabulary {
  std::unordered_map<std::string, int> word_to_index;
  std::vector<std::string> index_to_word;  // includes the OOV slot
  int oov_index = 0;
  int min_count = 1;

  int size() const { return static_cast<int>(index_to_word.size()); }

  int lookup(std::string_view word) const {
    const auto it = word_to_index.find(std::string(word));
    return it == word_to_index.end() ? oov_index : it->second;
  }

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);
};

Vocabulary build_vocab(const Corpus& corpus, int min_count);

struct EmbeddingTable {
  Mat vectors;  // |V| x K

  int dim() const { return vectors.cols; }
};

// Uniform in [-0.1, 0.1], deterministic by seed. The OOV row is the last one.
EmbeddingTable init_embeddings(const Vocabulary& vocab, int dim, std::uint64_t seed);

// Text format: one line per word, "word v1 v2 ... vK". Words absent from the
// file keep the seeded random initialization.
EmbeddingTable load_embeddings(const Vocabulary& vocab, const std::string& path, std::uint64_t seed);

Mat embed_sequence(const EmbeddingTable& table, const Vocabulary& vocab,
                   const std::vector<std::string>& tokens);

}  // namespace earnn
