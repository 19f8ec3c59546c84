#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <set>

#include "doctest.h"
#include "earnn/corpus.hpp"
#include "earnn/error.hpp"
#include "helpers.hpp"

using namespace earnn;

namespace {

std::string question_line(const std::string& id, const std::string& text,
                          const std::vector<std::string>& topics, std::int64_t post_time) {
  nlohmann::json j = {{"kind", "question"}, {"id", id}, {"text", text}, {"topics", topics},
                      {"post_time", post_time}};
  return j.dump() + "\n";
}

std::string answer_line(const std::string& id, const std::string& qid, const std::string& text,
                        std::int64_t ts, std::int64_t upvotes) {
  nlohmann::json j = {{"kind", "answer"}, {"id", id},        {"question_id", qid},
                      {"text", text},     {"timestamp", ts}, {"upvotes", upvotes}};
  return j.dump() + "\n";
}

// n_answers answers with given upvotes; every text is 10+ words.
Corpus make_question(std::int64_t base_time, const std::vector<std::int64_t>& upvotes) {
  Corpus c;
  Question q;
  q.id = "q1";
  q.tokens = {"what", "is", "the", "best", "lake", "to", "visit", "in", "the", "north"};
  q.topics = {{"travel"}, {"beautiful", "places"}};
  q.post_time = base_time;
  c.questions.emplace(q.id, q);
  std::vector<Answer> answers;
  for (std::size_t i = 0; i < upvotes.size(); ++i) {
    Answer a;
    a.id = "a" + std::to_string(i);
    a.question_id = "q1";
    a.sentences = {{"the", "lake", "is", "deep", "and"}, {"very", "cold", "all", "year", "round"}};
    a.timestamp = base_time + 100 + static_cast<std::int64_t>(i);
    a.upvotes = upvotes[i];
    answers.push_back(a);
  }
  c.answers.emplace("q1", answers);
  return c;
}

}  // namespace

TEST_CASE("tokenize lowercases, splits and strips punctuation") {
  CHECK(tokenize("Hello, World!") == std::vector<std::string>{"hello", "world"});
  CHECK(tokenize("  a  b\tc ") == std::vector<std::string>{"a", "b", "c"});
  CHECK(tokenize("...") == std::vector<std::string>{});
  CHECK(tokenize("don't") == std::vector<std::string>{"don't"});  // interior punctuation kept
}

TEST_CASE("split_sentences cuts at . ! ? and drops empties") {
  const auto s = split_sentences("First one. Second one! Third?");
  REQUIRE(s.size() == 3);
  CHECK(s[0] == std::vector<std::string>{"first", "one"});
  CHECK(s[2] == std::vector<std::string>{"third"});
  CHECK(split_sentences("no terminator at all").size() == 1);
  CHECK(split_sentences("..!?").empty());
}

TEST_CASE("load_corpus basic round trip and ordering") {
  testutil::TempDir dir("corpus_load");
  const std::string path = dir.file("c.jsonl");
  std::string body = question_line("q1", "what is the best lake to visit here", {"travel"}, 1000);
  body += answer_line("a2", "q1", "later answer with a full ten word sentence inside.", 3000, 5);
  body += answer_line("a1", "q1", "earlier answer with a full ten word sentence inside.", 2000, 7);
  testutil::write_file(path, body);

  const Corpus c = load_corpus(path);
  REQUIRE(c.questions.size() == 1);
  REQUIRE(c.answers.at("q1").size() == 2);
  CHECK(c.answers.at("q1")[0].id == "a1");  // earlier answer first
  CHECK(c.answers.at("q1")[1].id == "a2");
  CHECK(c.first_answer_time("q1") == 2000);
}

TEST_CASE("load_corpus: empty file gives empty corpus") {
  testutil::TempDir dir("corpus_empty");
  const std::string path = dir.file("empty.jsonl");
  testutil::write_file(path, "");
  const Corpus c = load_corpus(path);
  CHECK(c.questions.empty());
  CHECK(c.answer_count() == 0);
}

TEST_CASE("load_corpus: unknown question id names the answer") {
  testutil::TempDir dir("corpus_badref");
  const std::string path = dir.file("bad.jsonl");
  testutil::write_file(path, answer_line("a9", "missing", "some answer text with ten words or so here.", 10, 0));
  CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains("a9"), ParseError);
}

TEST_CASE("load_corpus: malformed json reports line number") {
  testutil::TempDir dir("corpus_badline");
  const std::string path = dir.file("bad.jsonl");
  testutil::write_file(path, question_line("q1", "text with enough words here to pass", {"t"}, 1) + "{oops\n");
  CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains("line 2"), ParseError);
}

TEST_CASE("filter keeps >10 answers and max upvotes >20") {
  std::vector<std::int64_t> ups(11, 1);
  ups[0] = 25;
  const Corpus keep = filter_corpus(make_question(1000, ups));
  CHECK(keep.questions.size() == 1);

  ups[0] = 20;  // boundary: 20 is not over 20
  CHECK(filter_corpus(make_question(1000, ups)).questions.empty());

  const Corpus ten = filter_corpus(make_question(1000, std::vector<std::int64_t>(10, 25)));
  CHECK(ten.questions.empty());  // 10 answers is not more than ten
}

TEST_CASE("filter removes short answers inside a retained question") {
  std::vector<std::int64_t> ups(12, 1);
  ups[0] = 25;
  Corpus c = make_question(1000, ups);
  c.answers.at("q1")[5].sentences = {{"nine", "words", "only", "in", "this", "one", "right", "here", "now"}};
  const Corpus filtered = filter_corpus(c);
  REQUIRE(filtered.questions.size() == 1);
  CHECK(filtered.answers.at("q1").size() == 11);
  for (const Answer& a : filtered.answers.at("q1")) CHECK(a.word_count() >= 10);
}

TEST_CASE("filter is idempotent and the survivor invariant scans clean") {
  SynthSpec spec;
  spec.seed = 42;
  Corpus c = synth_corpus(spec).corpus;
  // sabotage a few answers so the word filter has something to do
  c.answers.begin()->second[2].sentences = {{"short"}};
  const Corpus once = filter_corpus(c);
  const Corpus twice = filter_corpus(once);
  CHECK(once.questions.size() == twice.questions.size());
  CHECK(once.answer_count() == twice.answer_count());
  for (const auto& [qid, list] : once.answers) {
    CHECK(list.size() > 10);
    std::int64_t mx = 0;
    for (const Answer& a : list) mx = std::max(mx, a.upvotes);
    CHECK(mx > 20);
  }
}

TEST_CASE("label_selection thresholds at more-than-ten upvotes") {
  const Corpus c = make_question(1000, {11, 10, 0});
  const auto labels = label_selection(c);
  CHECK(labels.at("a0") == 1);
  CHECK(labels.at("a1") == 0);
  CHECK(labels.at("a2") == 0);
}

TEST_CASE("good_vs_bad triples are the full good x bad product") {
  const Corpus c = make_question(1000, {30, 20, 5, 5, 5});  // 2 good, 3 bad
  const auto triples = build_triples(c, {TripleStrategy::good_vs_bad, 10, 0, 0});
  CHECK(triples.size() == 6);
  for (const Triple& t : triples) {
    CHECK(t.question_id == "q1");
    CHECK(t.pos_answer_id != t.neg_answer_id);
  }
}

TEST_CASE("all_ordered_pairs needs strictly different upvotes") {
  const Corpus tied = make_question(1000, {5, 5, 5});
  CHECK(build_triples(tied, {TripleStrategy::all_ordered_pairs, 10, 0, 0}).empty());

  const Corpus mixed = make_question(1000, {7, 5, 5});
  const auto triples = build_triples(mixed, {TripleStrategy::all_ordered_pairs, 10, 0, 0});
  CHECK(triples.size() == 2);  // 7>5 twice
  for (const Triple& t : triples) CHECK(t.pos_answer_id == "a0");
}

TEST_CASE("sampled strategy caps per-question triples deterministically") {
  const Corpus c = make_question(1000, {9, 8, 7, 6, 5, 4});  // 15 ordered pairs
  TripleOptions opt{TripleStrategy::sampled, 10, 4, 123};
  const auto first = build_triples(c, opt);
  const auto second = build_triples(c, opt);
  CHECK(first.size() == 4);
  REQUIRE(first.size() == second.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].pos_answer_id == second[i].pos_answer_id);
    CHECK(first[i].neg_answer_id == second[i].neg_answer_id);
  }
  std::set<std::pair<std::string, std::string>> unique;
  for (const Triple& t : first) unique.insert({t.pos_answer_id, t.neg_answer_id});
  CHECK(unique.size() == 4);  // without replacement
}

TEST_CASE("split_corpus partitions questions by floor(frac*n)") {
  SynthSpec spec;
  spec.n_questions = 10;
  spec.seed = 7;
  const Corpus c = synth_corpus(spec).corpus;
  auto [train, test] = split_corpus(c, 0.9, 11);
  CHECK(train.questions.size() == 9);
  CHECK(test.questions.size() == 1);

  auto [train2, test2] = split_corpus(c, 0.9, 11);
  CHECK(train.questions.begin()->first == train2.questions.begin()->first);

  std::set<std::string> all;
  for (const auto& [qid, q] : train.questions) all.insert(qid);
  for (const auto& [qid, q] : test.questions) {
    CHECK(all.count(qid) == 0);  // disjoint
    all.insert(qid);
  }
  CHECK(all.size() == c.questions.size());  // union is everything

  CHECK_THROWS_AS(split_corpus(c, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_corpus(c, 1.0, 1), std::invalid_argument);
}

TEST_CASE("planted value follows overlap times exponential decay") {
  CHECK(planted_value(0, 123.0, 1e6) == 0.0);
  const double ratio = planted_value(3, 1e6, 1e6) / planted_value(3, 0.0, 1e6);
  CHECK(ratio == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(planted_value(2, 5e9, std::numeric_limits<double>::infinity()) == 2.0);
}

TEST_CASE("synth corpus is deterministic and passes the filter unchanged") {
  SynthSpec spec;
  spec.seed = 99;
  const SynthResult a = synth_corpus(spec);
  const SynthResult b = synth_corpus(spec);

  testutil::TempDir dir("synth_det");
  save_corpus(a.corpus, dir.file("a.jsonl"));
  save_corpus(b.corpus, dir.file("b.jsonl"));
  CHECK(testutil::read_file(dir.file("a.jsonl")) == testutil::read_file(dir.file("b.jsonl")));

  const Corpus filtered = filter_corpus(a.corpus);
  CHECK(filtered.questions.size() == a.corpus.questions.size());
  CHECK(filtered.answer_count() == a.corpus.answer_count());
}

TEST_CASE("synth upvotes are monotone in planted value") {
  SynthSpec spec;
  spec.seed = 5;
  const SynthResult r = synth_corpus(spec);
  for (const auto& [qid, list] : r.corpus.answers) {
    for (const Answer& x : list) {
      for (const Answer& y : list) {
        if (r.planted_value.at(x.id) > r.planted_value.at(y.id)) CHECK(x.upvotes >= y.upvotes);
      }
    }
  }
}

TEST_CASE("synth with infinite horizon plants value from overlap only") {
  SynthSpec spec;
  spec.seed = 3;
  spec.decay_horizon = std::numeric_limits<double>::infinity();
  const SynthResult r = synth_corpus(spec);
  for (const auto& [aid, value] : r.planted_value) {
    CHECK(value == doctest::Approx(std::round(value)));  // integral overlap counts
  }
}

TEST_CASE("corpus file round trip preserves structure") {
  SynthSpec spec;
  spec.seed = 21;
  spec.n_questions = 4;
  const Corpus c = synth_corpus(spec).corpus;
  testutil::TempDir dir("roundtrip");
  save_corpus(c, dir.file("c.jsonl"));
  const Corpus reloaded = load_corpus(dir.file("c.jsonl"));
  REQUIRE(reloaded.questions.size() == c.questions.size());
  CHECK(reloaded.answer_count() == c.answer_count());
  for (const auto& [qid, q] : c.questions) {
    CHECK(reloaded.questions.at(qid).tokens == q.tokens);
    CHECK(reloaded.questions.at(qid).topics == q.topics);
    const auto& original = c.answers.at(qid);
    const auto& copy = reloaded.answers.at(qid);
    REQUIRE(copy.size() == original.size());
    for (std::size_t i = 0; i < original.size(); ++i) {
      CHECK(copy[i].sentences == original[i].sentences);
      CHECK(copy[i].upvotes == original[i].upvotes);
      CHECK(copy[i].grade == original[i].grade);
    }
  }
}
