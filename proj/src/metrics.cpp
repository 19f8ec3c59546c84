#include "earnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace earnn {

using nlohmann::json;

RankedList RankedList::from_scored(std::vector<RankedEntry> scored) {
  std::sort(scored.begin(), scored.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  return RankedList{std::move(scored)};
}

double precision_at_k(const RankedList& list, int k) {
  if (k < 1) throw std::invalid_argument("precision_at_k: k must be >= 1");
  int hits = 0;
  const int limit = std::min<int>(k, static_cast<int>(list.size()));
  for (int j = 0; j < limit; ++j) hits += list.entries[static_cast<std::size_t>(j)].label;
  return static_cast<double>(hits) / static_cast<double>(k);  // short lists count missing slots as 0
}

std::optional<double> average_precision(const RankedList& list) {
  int good = 0;
  for (const auto& e : list.entries) good += e.label;
  if (good == 0) return std::nullopt;
  double ap = 0.0;
  int seen = 0;
  for (std::size_t j = 0; j < list.size(); ++j) {
    if (list.entries[j].label) {
      ++seen;
      ap += static_cast<double>(seen) / static_cast<double>(j + 1);
    }
  }
  return ap / static_cast<double>(good);
}

std::optional<double> mrr(const RankedList& list) {
  for (std::size_t j = 0; j < list.size(); ++j)
    if (list.entries[j].label) return 1.0 / static_cast<double>(j + 1);
  return std::nullopt;
}

namespace {

// rel_1 + sum_{j>=2} rel_j / log2(j)
double dcg(const std::vector<double>& grades, int k) {
  const int limit = std::min<int>(k, static_cast<int>(grades.size()));
  double acc = 0.0;
  for (int j = 1; j <= limit; ++j) {
    const double rel = grades[static_cast<std::size_t>(j - 1)];
    acc += j == 1 ? rel : rel / std::log2(static_cast<double>(j));
  }
  return acc;
}

}  // namespace

double ndcg_at_k(const RankedList& list, int k) {
  if (k < 1) throw std::invalid_argument("ndcg_at_k: k must be >= 1");
  std::vector<double> predicted, ideal;
  for (const auto& e : list.entries) predicted.push_back(e.grade);
  ideal = predicted;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double denom = dcg(ideal, k);
  if (denom == 0.0) return 0.0;
  return dcg(predicted, k) / denom;
}

std::optional<double> doa(const RankedList& list, bool strict_ties) {
  const std::size_t n = list.size();
  if (n < 2) return std::nullopt;
  std::int64_t correct = 0, distinct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& better = list.entries[i];
      const auto& worse = list.entries[j];
      if (better.gt_value <= worse.gt_value) continue;  // only ground-truth-ordered pairs
      ++distinct;
      if (better.score >= worse.score) ++correct;  // predicted ties agree
    }
  }
  if (strict_ties) {
    if (distinct == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(distinct);
  }
  return 2.0 * static_cast<double>(correct) / (static_cast<double>(n) * static_cast<double>(n - 1));
}

QuestionMetrics score_list(const std::string& question_id, const RankedList& list, bool strict_doa_ties) {
  QuestionMetrics m;
  m.question_id = question_id;
  m.n_answers = static_cast<int>(list.size());
  m.p_at_5 = precision_at_k(list, 5);
  m.p_at_10 = precision_at_k(list, 10);
  m.ap = average_precision(list);
  m.rr = mrr(list);
  m.ndcg_at_1 = ndcg_at_k(list, 1);
  m.ndcg_at_5 = ndcg_at_k(list, 5);
  m.ndcg_at_10 = ndcg_at_k(list, 10);
  m.doa = doa(list, strict_doa_ties);
  return m;
}

namespace {

EvalReport aggregate(std::vector<QuestionMetrics> per_question) {
  EvalReport r;
  r.question_count = static_cast<int>(per_question.size());
  double map_sum = 0, mrr_sum = 0, doa_sum = 0;
  int map_n = 0, doa_n = 0;
  for (const auto& m : per_question) {
    r.p_at_5 += m.p_at_5;
    r.p_at_10 += m.p_at_10;
    r.ndcg_at_1 += m.ndcg_at_1;
    r.ndcg_at_5 += m.ndcg_at_5;
    r.ndcg_at_10 += m.ndcg_at_10;
    if (m.ap) {
      map_sum += *m.ap;
      mrr_sum += *m.rr;  // ap and rr are defined together
      ++map_n;
    }
    if (m.doa) {
      doa_sum += *m.doa;
      ++doa_n;
    }
  }
  const double n = std::max(1, r.question_count);
  r.p_at_5 /= n;
  r.p_at_10 /= n;
  r.ndcg_at_1 /= n;
  r.ndcg_at_5 /= n;
  r.ndcg_at_10 /= n;
  r.map = map_n ? map_sum / map_n : 0.0;
  r.mrr = map_n ? mrr_sum / map_n : 0.0;
  r.doa = doa_n ? doa_sum / doa_n : 0.0;
  r.excluded_no_good = r.question_count - map_n;
  r.excluded_doa = r.question_count - doa_n;
  r.per_question = std::move(per_question);
  return r;
}

}  // namespace

EvalReport evaluate(const ModelParams& params, const VariantConfig& variant, const Vocabulary& vocab,
                    const Corpus& corpus, const EvalOptions& options) {
  if (corpus.questions.empty()) throw std::invalid_argument("evaluate: empty corpus");
  ModelParams scored_params = params;
  if (options.h_decay_override) scored_params.h_decay = *options.h_decay_override;

  std::vector<QuestionMetrics> per_question;
  for (const auto& [qid, q] : corpus.questions) {
    const auto it = corpus.answers.find(qid);
    if (it == corpus.answers.end() || it->second.empty()) continue;
    const std::int64_t t0 = it->second.front().timestamp;
    std::vector<RankedEntry> scored;
    for (const Answer& a : it->second) {
      const EncodedQA instance = encode_instance(vocab, q, a, t0);
      const ForwardTrace trace = forward(scored_params, variant, instance);
      scored.push_back({a.id, trace.rank_score, a.upvotes > options.good_threshold ? 1 : 0,
                        static_cast<double>(a.grade), static_cast<double>(a.upvotes)});
    }
    per_question.push_back(
        score_list(qid, RankedList::from_scored(std::move(scored)), options.strict_doa_ties));
  }
  if (per_question.empty()) throw std::invalid_argument("evaluate: no answered questions in corpus");
  return aggregate(std::move(per_question));
}

json EvalReport::to_json(const std::string& task) const {
  json metrics;
  if (task == "selection") {
    metrics = {{"P@5", p_at_5}, {"P@10", p_at_10}, {"MAP", map}, {"MRR", mrr}};
  } else if (task == "ranking") {
    metrics = {{"NDCG@1", ndcg_at_1}, {"NDCG@5", ndcg_at_5}, {"NDCG@10", ndcg_at_10}, {"DOA", doa}};
  } else {
    throw std::invalid_argument("unknown task '" + task + "' (expected selection or ranking)");
  }
  json per_q = json::array();
  for (const auto& m : per_question) {
    json q = {{"question_id", m.question_id}, {"n_answers", m.n_answers}};
    if (task == "selection") {
      q["P@5"] = m.p_at_5;
      q["P@10"] = m.p_at_10;
      if (m.ap) q["AP"] = *m.ap;
      if (m.rr) q["RR"] = *m.rr;
    } else {
      q["NDCG@1"] = m.ndcg_at_1;
      q["NDCG@5"] = m.ndcg_at_5;
      q["NDCG@10"] = m.ndcg_at_10;
      if (m.doa) q["DOA"] = *m.doa;
    }
    per_q.push_back(std::move(q));
  }
  return json{{"task", task},
              {"question_count", question_count},
              {"excluded_no_good", excluded_no_good},
              {"excluded_doa", excluded_doa},
              {"metrics", metrics},
              {"per_question", per_q}};
}

std::string EvalReport::to_csv(const std::string& task) const {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  if (task == "selection") {
    out << "P@5,P@10,MAP,MRR\n" << p_at_5 << ',' << p_at_10 << ',' << map << ',' << mrr << '\n';
  } else if (task == "ranking") {
    out << "NDCG@1,NDCG@5,NDCG@10,DOA\n"
        << ndcg_at_1 << ',' << ndcg_at_5 << ',' << ndcg_at_10 << ',' << doa << '\n';
  } else {
    throw std::invalid_argument("unknown task '" + task + "' (expected selection or ranking)");
  }
  return out.str();
}

}  // namespace earnn
