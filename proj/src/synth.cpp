#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "earnn/corpus.hpp"
#include "earnn/rng.hpp"

namespace earnn {

double planted_value(int topic_overlap, double age_seconds, double decay_horizon) {
  return static_cast<double>(topic_overlap) * std::exp(-age_seconds / decay_horizon);
}

namespace {

std::string word_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "w%04zu", i);
  return buf;
}

std::string padded_id(char prefix, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%c%04zu", prefix, i);
  return buf;
}

}  // namespace

SynthResult synth_corpus(const SynthSpec& spec) {
  Rng rng(spec.seed);
  SynthResult result;

  if (spec.min_topic_words < 1 || spec.max_topic_words < spec.min_topic_words)
    throw std::invalid_argument("synth_corpus: bad topic word range");
  const std::size_t n_relevant =
      std::max(std::clamp<std::size_t>(spec.vocab_size / 10, 6, 12), spec.max_topic_words);
  std::vector<std::string> relevant, filler;
  for (std::size_t i = 0; i < spec.vocab_size; ++i)
    (i < n_relevant ? relevant : filler).push_back(word_name(i));
  if (filler.empty()) filler.push_back("pad");
  result.relevant_words = relevant;

  auto draw_filler = [&] { return filler[rng.index(filler.size())]; };

  const bool finite_horizon = std::isfinite(spec.decay_horizon);
  const double age_range = finite_horizon ? 2.0 * spec.decay_horizon : 1e6;

  for (std::size_t qi = 0; qi < spec.n_questions; ++qi) {
    Question q;
    q.id = padded_id('q', qi);
    q.post_time = 1'600'000'000 + static_cast<std::int64_t>(qi) * 86'400;

    // Topic words for this question: distinct picks from the relevant set,
    // grouped into 2-3 phrases.
    const std::size_t n_topic_words =
        spec.min_topic_words + rng.index(spec.max_topic_words - spec.min_topic_words + 1);
    std::vector<std::string> topic_words;
    for (std::size_t idx : rng.sample_without_replacement(relevant.size(), n_topic_words))
      topic_words.push_back(relevant[idx]);
    const std::size_t n_phrases = 2 + rng.index(2);
    q.topics.assign(n_phrases, {});
    for (std::size_t w = 0; w < topic_words.size(); ++w)
      q.topics[w % n_phrases].push_back(topic_words[w]);

    // Question text: mostly filler with a few topic words mixed in.
    for (std::size_t w = 0; w < spec.question_filler_words; ++w) q.tokens.push_back(draw_filler());
    for (std::size_t w = 0; w < spec.question_topic_words; ++w) {
      const std::string& tw = topic_words[rng.index(topic_words.size())];
      q.tokens.insert(q.tokens.begin() + static_cast<std::ptrdiff_t>(rng.index(q.tokens.size() + 1)), tw);
    }

    std::vector<Answer> answers;
    const int max_overlap = static_cast<int>(topic_words.size());
    const double upvote_scale = 100.0 / max_overlap;
    for (std::size_t ai = 0; ai < spec.answers_per_question; ++ai) {
      Answer a;
      a.id = q.id + "_" + padded_id('a', ai);
      a.question_id = q.id;

      // One zero-age anchor answer per question; spread the rest over the horizon.
      const double age = ai == 0 ? 0.0 : rng.uniform(0.0, age_range);
      a.timestamp = q.post_time + 3'600 + static_cast<std::int64_t>(age);

      // Overlap schedule: the anchor gets the full topic set, exactly one
      // answer gets zero, the rest cycle through 1..max so ground-truth values
      // stay mostly distinct.
      int overlap;
      if (ai == 0)
        overlap = max_overlap;
      else if (ai == 1)
        overlap = 0;
      else
        overlap = 1 + static_cast<int>((ai - 2) % static_cast<std::size_t>(max_overlap));

      // Three filler sentences, then plant `overlap` distinct topic words and
      // occasionally a decoy drawn from the relevant set outside this
      // question's topics.
      a.sentences.assign(3, {});
      for (auto& sentence : a.sentences) {
        const std::size_t len =
            spec.min_sentence_words + rng.index(spec.max_sentence_words - spec.min_sentence_words + 1);
        for (std::size_t w = 0; w < len; ++w) sentence.push_back(draw_filler());
      }
      std::vector<std::string> decoys;
      for (const auto& w : relevant)
        if (std::find(topic_words.begin(), topic_words.end(), w) == topic_words.end())
          decoys.push_back(w);
      if (!decoys.empty()) {
        const std::size_t n_decoys = rng.index(spec.max_decoys + 1);
        for (std::size_t d = 0; d < n_decoys; ++d) {
          auto& sentence = a.sentences[rng.index(a.sentences.size())];
          sentence[rng.index(sentence.size())] = decoys[rng.index(decoys.size())];
        }
      }
      // Distinct slots so the text's distinct-topic-word count equals `overlap`
      // exactly (a planted word may evict the decoy, never another planted word).
      std::vector<std::pair<std::size_t, std::size_t>> slots;
      for (std::size_t s = 0; s < a.sentences.size(); ++s)
        for (std::size_t w = 0; w < a.sentences[s].size(); ++w) slots.emplace_back(s, w);
      std::vector<std::string> planted(topic_words);
      rng.shuffle(planted);
      const auto chosen = rng.sample_without_replacement(slots.size(), static_cast<std::size_t>(overlap));
      for (int w = 0; w < overlap; ++w) {
        const auto [s, pos] = slots[chosen[static_cast<std::size_t>(w)]];
        a.sentences[s][pos] = planted[static_cast<std::size_t>(w)];
      }

      const double value = planted_value(overlap, age, spec.decay_horizon);
      a.upvotes = static_cast<std::int64_t>(std::llround(value * upvote_scale));
      a.grade = static_cast<int>(std::floor(std::log2(1.0 + static_cast<double>(a.upvotes))));
      result.planted_value[a.id] = value;
      answers.push_back(std::move(a));
    }
    std::sort(answers.begin(), answers.end(), [](const Answer& x, const Answer& y) {
      return std::tie(x.timestamp, x.id) < std::tie(y.timestamp, y.id);
    });
    result.corpus.answers.emplace(q.id, std::move(answers));
    result.corpus.questions.emplace(q.id, std::move(q));
  }
  return result;
}

}  // namespace earnn
