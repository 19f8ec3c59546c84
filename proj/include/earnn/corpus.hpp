#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace earnn {

struct Question {
  std::string id;
  std::vector<std::string> tokens;                // the question is one sentence
  std::vector<std::vector<std::string>> topics;   // phrases, each a word list
  std::int64_t post_time = 0;

  std::size_t word_count() const { return tokens.size(); }
};

struct Answer {
  std::string id;
  std::string question_id;
  std::vector<std::vector<std::string>> sentences;
  std::int64_t timestamp = 0;
  std::int64_t upvotes = 0;
  int grade = 0;  // graded relevance for NDCG

  std::size_t word_count() const;
};

struct Corpus {
  std::map<std::string, Question> questions;
  std::map<std::string, std::vector<Answer>> answers;  // keyed by question id, sorted by timestamp

  // Timestamp of the earliest answer to the question.
  std::int64_t first_answer_time(const std::string& question_id) const;
  std::size_t answer_count() const;
};

struct Triple {
  std::string question_id;
  std::string pos_answer_id;
  std::string neg_answer_id;
};

// Lowercase, whitespace-split, leading/trailing ASCII punctuation stripped.
std::vector<std::string> tokenize(std::string_view text);
// Sentence boundaries at '.' '!' '?'; empty sentences dropped.
std::vector<std::vector<std::string>> split_sentences(std::string_view text);

// JSONL loader; throws ParseError with the line number or the offending record id.
Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

struct FilterConfig {
  std::int64_t min_answers = 10;       // keep questions with strictly more answers
  std::int64_t min_max_upvotes = 20;   // ... whose best answer has strictly more upvotes
  std::size_t min_words = 10;          // drop questions/answers with fewer words
  bool require_topics = true;
  // Optional stability filter: drop records younger than min_age_seconds
  // relative to collect_time. Disabled when min_age_seconds == 0.
  std::int64_t min_age_seconds = 0;
  std::int64_t collect_time = 0;
};

Corpus filter_corpus(const Corpus& corpus, const FilterConfig& config = {});

// Binary good/bad labels: 1 iff upvotes > threshold.
std::map<std::string, int> label_selection(const Corpus& corpus, std::int64_t good_threshold = 10);

enum class TripleStrategy { good_vs_bad, all_ordered_pairs, sampled };

struct TripleOptions {
  TripleStrategy strategy = TripleStrategy::good_vs_bad;
  std::int64_t good_threshold = 10;  // used by good_vs_bad
  std::size_t sample_k = 0;          // per-question cap, used by sampled
  std::uint64_t seed = 0;            // used by sampled
};

std::vector<Triple> build_triples(const Corpus& corpus, const TripleOptions& options = {});

// Question-level split: floor(fraction * n) questions to train, the rest to test.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double train_fraction, std::uint64_t seed);

// ---- synthetic corpus with a planted value function -----------------------

struct SynthSpec {
  std::size_t n_questions = 30;
  std::size_t answers_per_question = 12;
  std::size_t vocab_size = 300;
  std::uint64_t seed = 1;
  double decay_horizon = 1e6;  // seconds; +infinity removes the time effect
  // Topic words drawn per question. Raising both widens the planted value
  // range, keeping ground truth distinct across more answers.
  std::size_t min_topic_words = 3;
  std::size_t max_topic_words = 5;
  // Up to this many relevant-but-off-topic words per answer. Decoys carry no
  // planted value, so answer quality is question-specific, not just
  // "mentions words from the relevant set".
  std::size_t max_decoys = 2;
  // Topic words mixed into the question text itself. Zero makes the topic
  // phrases the only source of question-specific relevance.
  std::size_t question_topic_words = 2;
  // Text sizes. Longer sentences dilute mean-pooled representations while
  // leaving attention-selected ones intact.
  std::size_t question_filler_words = 10;
  std::size_t min_sentence_words = 4;
  std::size_t max_sentence_words = 6;
};

struct SynthResult {
  Corpus corpus;
  std::map<std::string, double> planted_value;  // answer id -> planted value
  std::vector<std::string> relevant_words;      // the planted topic word set
};

// value = overlap * exp(-age / horizon)
double planted_value(int topic_overlap, double age_seconds, double decay_horizon);

SynthResult synth_corpus(const SynthSpec& spec);

}  // namespace earnn
