#include "earnn/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "earnn/error.hpp"
#include "earnn/rng.hpp"
#include "json.hpp"

namespace earnn {

using nlohmann::json;

std::size_t Answer::word_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

std::int64_t Corpus::first_answer_time(const std::string& question_id) const {
  const auto it = answers.find(question_id);
  if (it == answers.end() || it->second.empty())
    throw ParseError("question '" + question_id + "' has no answers");
  return it->second.front().timestamp;  // list is sorted by timestamp
}

std::size_t Corpus::answer_count() const {
  std::size_t n = 0;
  for (const auto& [qid, list] : answers) n += list.size();
  return n;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    // strip leading/trailing ASCII punctuation
    std::size_t b = 0, e = current.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(current[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(current[e - 1]))) --e;
    if (e > b) tokens.emplace_back(current.substr(b, e - b));
    current.clear();
  };
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      flush();
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  flush();
  return tokens;
}

std::vector<std::vector<std::string>> split_sentences(std::string_view text) {
  std::vector<std::vector<std::string>> sentences;
  std::string current;
  auto flush = [&] {
    auto tokens = tokenize(current);
    if (!tokens.empty()) sentences.push_back(std::move(tokens));
    current.clear();
  };
  for (char ch : text) {
    if (ch == '.' || ch == '!' || ch == '?') {
      flush();
    } else {
      current.push_back(ch);
    }
  }
  flush();
  return sentences;
}

namespace {

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

int default_grade(std::int64_t upvotes) {
  return static_cast<int>(std::floor(std::log2(1.0 + static_cast<double>(upvotes))));
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path);

  Corpus corpus;
  std::vector<Answer> pending;  // linked after all questions are known
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      const std::string kind = record.at("kind").get<std::string>();
      if (kind == "question") {
        Question q;
        q.id = record.at("id").get<std::string>();
        q.tokens = tokenize(record.at("text").get<std::string>());
        for (const auto& phrase : record.at("topics")) {
          auto words = tokenize(phrase.get<std::string>());
          if (!words.empty()) q.topics.push_back(std::move(words));
        }
        q.post_time = record.at("post_time").get<std::int64_t>();
        if (q.tokens.empty()) throw ParseError("question '" + q.id + "': text has no tokens");
        if (corpus.questions.count(q.id)) throw ParseError("duplicate question id '" + q.id + "'");
        corpus.answers.emplace(q.id, std::vector<Answer>{});
        corpus.questions.emplace(q.id, std::move(q));
      } else if (kind == "answer") {
        Answer a;
        a.id = record.at("id").get<std::string>();
        a.question_id = record.at("question_id").get<std::string>();
        a.sentences = split_sentences(record.at("text").get<std::string>());
        a.timestamp = record.at("timestamp").get<std::int64_t>();
        a.upvotes = record.at("upvotes").get<std::int64_t>();
        a.grade = record.contains("grade") ? record.at("grade").get<int>() : default_grade(a.upvotes);
        if (a.sentences.empty()) throw ParseError("answer '" + a.id + "': text has no sentences");
        if (a.upvotes < 0) throw ParseError("answer '" + a.id + "': negative upvotes");
        pending.push_back(std::move(a));
      } else {
        throw ParseError("line " + std::to_string(line_no) + ": unknown kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }

  for (auto& a : pending) {
    const auto qit = corpus.questions.find(a.question_id);
    if (qit == corpus.questions.end())
      throw ParseError("answer '" + a.id + "': unknown question id '" + a.question_id + "'");
    if (a.timestamp < qit->second.post_time)
      throw ParseError("answer '" + a.id + "': timestamp precedes the question post time");
    corpus.answers[a.question_id].push_back(std::move(a));
  }
  for (auto& [qid, list] : corpus.answers) {
    std::sort(list.begin(), list.end(), [](const Answer& x, const Answer& y) {
      return std::tie(x.timestamp, x.id) < std::tie(y.timestamp, y.id);
    });
    for (std::size_t i = 1; i < list.size(); ++i)
      if (list[i].id == list[i - 1].id)
        throw ParseError("duplicate answer id '" + list[i].id + "'");
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus file: " + path);
  for (const auto& [qid, q] : corpus.questions) {
    json topics = json::array();
    for (const auto& phrase : q.topics) topics.push_back(join(phrase));
    json record = {{"kind", "question"},
                   {"id", q.id},
                   {"text", join(q.tokens)},
                   {"topics", topics},
                   {"post_time", q.post_time}};
    out << record.dump() << '\n';
    const auto it = corpus.answers.find(qid);
    if (it == corpus.answers.end()) continue;
    for (const Answer& a : it->second) {
      std::string text;
      for (const auto& sentence : a.sentences) {
        text += join(sentence);
        text += " . ";
      }
      json arec = {{"kind", "answer"},   {"id", a.id},           {"question_id", a.question_id},
                   {"text", text},       {"timestamp", a.timestamp}, {"upvotes", a.upvotes},
                   {"grade", a.grade}};
      out << arec.dump() << '\n';
    }
  }
}

Corpus filter_corpus(const Corpus& corpus, const FilterConfig& config) {
  // Word/topic/age filters run first so the answer-count filter sees the
  // final lists; that makes the whole pass idempotent.
  const std::int64_t age_cutoff =
      config.min_age_seconds > 0 ? config.collect_time - config.min_age_seconds : 0;

  Corpus out;
  for (const auto& [qid, q] : corpus.questions) {
    if (q.word_count() < config.min_words) continue;
    if (config.require_topics && q.topics.empty()) continue;
    if (config.min_age_seconds > 0 && q.post_time > age_cutoff) continue;

    std::vector<Answer> kept;
    const auto it = corpus.answers.find(qid);
    if (it != corpus.answers.end()) {
      for (const Answer& a : it->second) {
        if (a.word_count() < config.min_words) continue;
        if (config.min_age_seconds > 0 && a.timestamp > age_cutoff) continue;
        kept.push_back(a);
      }
    }
    if (static_cast<std::int64_t>(kept.size()) <= config.min_answers) continue;
    std::int64_t max_upvotes = 0;
    for (const Answer& a : kept) max_upvotes = std::max(max_upvotes, a.upvotes);
    if (max_upvotes <= config.min_max_upvotes) continue;

    out.questions.emplace(qid, q);
    out.answers.emplace(qid, std::move(kept));
  }
  return out;
}

std::map<std::string, int> label_selection(const Corpus& corpus, std::int64_t good_threshold) {
  std::map<std::string, int> labels;
  for (const auto& [qid, list] : corpus.answers)
    for (const Answer& a : list) labels[a.id] = a.upvotes > good_threshold ? 1 : 0;
  return labels;
}

std::vector<Triple> build_triples(const Corpus& corpus, const TripleOptions& options) {
  std::vector<Triple> triples;
  for (const auto& [qid, list] : corpus.answers) {
    if (options.strategy == TripleStrategy::good_vs_bad) {
      std::vector<const Answer*> good, bad;
      for (const Answer& a : list)
        (a.upvotes > options.good_threshold ? good : bad).push_back(&a);
      for (const Answer* g : good)
        for (const Answer* b : bad) triples.push_back({qid, g->id, b->id});
    } else {
      std::vector<Triple> pairs;
      for (std::size_t i = 0; i < list.size(); ++i)
        for (std::size_t j = 0; j < list.size(); ++j) {
          if (i == j) continue;
          if (list[i].upvotes > list[j].upvotes) pairs.push_back({qid, list[i].id, list[j].id});
        }
      if (options.strategy == TripleStrategy::sampled && pairs.size() > options.sample_k) {
        Rng rng(options.seed ^ fnv1a(qid));
        for (std::size_t idx : rng.sample_without_replacement(pairs.size(), options.sample_k))
          triples.push_back(pairs[idx]);
      } else {
        triples.insert(triples.end(), pairs.begin(), pairs.end());
      }
    }
  }
  return triples;
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train_fraction must lie strictly inside (0, 1)");

  std::vector<std::string> ids;
  ids.reserve(corpus.questions.size());
  for (const auto& [qid, q] : corpus.questions) ids.push_back(qid);
  Rng rng(seed);
  rng.shuffle(ids);

  const std::size_t n_train = static_cast<std::size_t>(train_fraction * static_cast<double>(ids.size()));
  Corpus train, test;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    Corpus& dst = i < n_train ? train : test;
    dst.questions.emplace(ids[i], corpus.questions.at(ids[i]));
    const auto it = corpus.answers.find(ids[i]);
    dst.answers.emplace(ids[i], it != corpus.answers.end() ? it->second : std::vector<Answer>{});
  }
  return {std::move(train), std::move(test)};
}

}  // namespace earnn
