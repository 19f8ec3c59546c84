#include "earnn/embedding.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "earnn/error.hpp"
#include "earnn/rng.hpp"

namespace earnn {

using nlohmann::json;

nlohmann::json Vocabulary::to_json() const {
  return json{{"words", std::vector<std::string>(index_to_word.begin(), index_to_word.end() - 1)},
              {"min_count", min_count}};
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  Vocabulary v;
  v.min_count = j.at("min_count").get<int>();
  for (const auto& w : j.at("words")) {
    const std::string word = w.get<std::string>();
    v.word_to_index.emplace(word, static_cast<int>(v.index_to_word.size()));
    v.index_to_word.push_back(word);
  }
  v.oov_index = static_cast<int>(v.index_to_word.size());
  v.index_to_word.push_back("<oov>");
  return v;
}

Vocabulary build_vocab(const Corpus& corpus, int min_count) {
  std::map<std::string, std::int64_t> freq;  // ordered map keeps ties deterministic
  auto count = [&](const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) ++freq[t];
  };
  for (const auto& [qid, q] : corpus.questions) {
    count(q.tokens);
    for (const auto& phrase : q.topics) count(phrase);
  }
  for (const auto& [qid, list] : corpus.answers)
    for (const Answer& a : list)
      for (const auto& sentence : a.sentences) count(sentence);

  std::vector<std::pair<std::string, std::int64_t>> entries;
  for (const auto& [word, n] : freq)
    if (n >= min_count) entries.emplace_back(word, n);
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  Vocabulary v;
  v.min_count = min_count;
  for (const auto& [word, n] : entries) {
    v.word_to_index.emplace(word, static_cast<int>(v.index_to_word.size()));
    v.index_to_word.push_back(word);
  }
  v.oov_index = static_cast<int>(v.index_to_word.size());
  v.index_to_word.push_back("<oov>");
  return v;
}

EmbeddingTable init_embeddings(const Vocabulary& vocab, int dim, std::uint64_t seed) {
  if (dim <= 0) throw std::invalid_argument("embedding dimension must be positive");
  Rng rng(seed);
  EmbeddingTable table;
  table.vectors = Mat(vocab.size(), dim);
  for (double& x : table.vectors.data) x = rng.uniform(-0.1, 0.1);
  return table;
}

EmbeddingTable load_embeddings(const Vocabulary& vocab, const std::string& path, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file: " + path);

  int dim = -1;
  std::vector<std::pair<int, Vec>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word)) throw ParseError("embedding line " + std::to_string(line_no) + ": missing word");
    Vec values;
    double x;
    while (ss >> x) values.push_back(x);
    if (!ss.eof()) throw ParseError("embedding line " + std::to_string(line_no) + ": malformed number");
    if (values.empty()) throw ParseError("embedding line " + std::to_string(line_no) + ": no values");
    if (dim < 0) dim = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != dim)
      throw ParseError("embedding line " + std::to_string(line_no) + ": dimension mismatch (expected " +
                       std::to_string(dim) + ", got " + std::to_string(values.size()) + ")");
    const auto it = vocab.word_to_index.find(word);
    if (it != vocab.word_to_index.end()) rows.emplace_back(it->second, std::move(values));
  }
  if (dim < 0) throw ParseError("embedding file is empty: " + path);

  EmbeddingTable table = init_embeddings(vocab, dim, seed);
  for (const auto& [index, values] : rows) table.vectors.set_row(index, values);
  return table;
}

Mat embed_sequence(const EmbeddingTable& table, const Vocabulary& vocab,
                   const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw std::invalid_argument("cannot embed an empty token sequence");
  Mat out(static_cast<int>(tokens.size()), table.dim());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int row = vocab.lookup(tokens[i]);
    for (int c = 0; c < table.dim(); ++c) out(static_cast<int>(i), c) = table.vectors(row, c);
  }
  return out;
}

}  // namespace earnn
