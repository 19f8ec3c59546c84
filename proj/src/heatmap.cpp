#include "earnn/heatmap.hpp"

#include <sstream>

namespace earnn {

using nlohmann::json;

std::vector<int> quantile_buckets(const std::vector<double>& scores, int rates) {
  if (rates < 1) throw std::invalid_argument("bucket count must be >= 1");
  std::vector<int> buckets(scores.size(), 0);
  const double n = static_cast<double>(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    int below = 0;
    for (double other : scores)
      if (other < scores[i]) ++below;
    int b = static_cast<int>(static_cast<double>(below) / n * rates);
    buckets[i] = std::min(b, rates - 1);
  }
  return buckets;
}

namespace {

std::string escape_html(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

void render_sequence(std::ostream& out, const std::vector<std::string>& tokens,
                     const std::vector<double>& weights, int rates, bool color_words) {
  const auto buckets = color_words ? quantile_buckets(weights, rates) : std::vector<int>(tokens.size(), 0);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (color_words)
      out << "<span class=\"w r" << buckets[t] << "\">" << escape_html(tokens[t]) << "</span> ";
    else
      out << escape_html(tokens[t]) << ' ';
  }
}

}  // namespace

std::string render_heatmap_html(const ModelBundle& bundle, const Question& question,
                                const std::vector<Answer>& answers, std::int64_t first_answer_time,
                                const HeatmapOptions& options) {
  const bool word_level = bundle.variant.word_level();
  const int rates = options.rates;

  json scores_json;
  scores_json["question_id"] = question.id;
  scores_json["variant"] = bundle.variant.name();
  scores_json["pairs"] = json::array();

  std::ostringstream body;
  body << "<h1>Attention report</h1>\n";
  if (!word_level)
    body << "<p class=\"notice\">Sentence-level model: word scores are unavailable, only sentence "
            "stripes are shown.</p>\n";

  for (const Answer& answer : answers) {
    const EncodedQA instance = encode_instance(bundle.vocab, question, answer, first_answer_time);
    const ForwardTrace trace = forward(bundle.params, bundle.variant, instance);

    json pair;
    pair["answer_id"] = answer.id;
    pair["match_score"] = trace.match_score;
    pair["rank_score"] = trace.rank_score;
    pair["timestamp"] = answer.timestamp;
    pair["first_answer_time"] = first_answer_time;
    pair["sentence_scores"] = trace.sentence_weights;
    if (word_level) {
      pair["question_word_scores"] = trace.question_attn.weights;
      json per_sentence = json::array();
      for (const auto& attn : trace.sentence_attn) per_sentence.push_back(attn.weights);
      pair["answer_word_scores"] = per_sentence;
    }
    scores_json["pairs"].push_back(std::move(pair));

    body << "<div class=\"pair\">\n<h2>" << escape_html(answer.id) << "</h2>\n";
    body << "<p>match " << trace.match_score << " &middot; rank " << trace.rank_score << "</p>\n";
    body << "<div class=\"question\">";
    if (word_level)
      render_sequence(body, question.tokens, trace.question_attn.weights, rates, true);
    else
      render_sequence(body, question.tokens, {}, rates, false);
    body << "</div>\n";

    const auto sentence_buckets =
        quantile_buckets({trace.sentence_weights.begin(), trace.sentence_weights.end()}, rates);
    for (std::size_t j = 0; j < answer.sentences.size(); ++j) {
      body << "<div class=\"sentence s" << sentence_buckets[j] << "\"><span class=\"num\">"
           << (j + 1) << "</span> ";
      if (word_level)
        render_sequence(body, answer.sentences[j], trace.sentence_attn[j].weights, rates, true);
      else
        render_sequence(body, answer.sentences[j], {}, rates, false);
      body << "</div>\n";
    }
    body << "</div>\n";
  }

  // one color level and one stripe width per rate bucket
  std::ostringstream css;
  for (int r = 0; r < rates; ++r) {
    const double alpha = rates == 1 ? 0.5 : 0.08 + 0.84 * r / (rates - 1);
    css << ".w.r" << r << "{background:rgba(30,100,220," << alpha << ");}\n";
    css << ".sentence.s" << r << "{border-bottom:" << (1 + 2 * r) << "px solid rgba(30,100,220,0.8);}\n";
  }

  std::ostringstream out;
  out << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Attention report</title>\n"
      << "<style>\nbody{font-family:sans-serif;max-width:60em;margin:2em auto;}\n"
      << ".pair{margin-bottom:2em;border:1px solid #ccc;padding:1em;}\n"
      << ".question{font-weight:bold;margin-bottom:0.6em;}\n"
      << ".sentence{margin:0.4em 0;padding-bottom:2px;}\n"
      << ".num{color:#c00;font-weight:bold;margin-right:0.4em;}\n"
      << ".w{padding:0 2px;border-radius:2px;}\n"
      << ".notice{color:#a60;}\n"
      << css.str() << "</style>\n</head>\n<body>\n"
      << body.str()
      << "<script type=\"application/json\" id=\"attention-scores\">\n"
      << scores_json.dump(2) << "\n</script>\n</body>\n</html>\n";
  return out.str();
}

}  // namespace earnn
