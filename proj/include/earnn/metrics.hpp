#pragma once

#include <optional>
#include <string>
#include <vector>

#include "earnn/corpus.hpp"
#include "earnn/embedding.hpp"
#include "earnn/network.hpp"
#include "json.hpp"

namespace earnn {

struct RankedEntry {
  std::string id;
  double score = 0.0;     // predicted
  int label = 0;          // binary relevance
  double grade = 0.0;     // graded relevance for NDCG
  double gt_value = 0.0;  // ground-truth ordering key for DOA (upvotes)
};

// Entries sorted by score descending, ties broken by id ascending.
struct RankedList {
  std::vector<RankedEntry> entries;

  static RankedList from_scored(std::vector<RankedEntry> scored);
  std::size_t size() const { return entries.size(); }
};

double precision_at_k(const RankedList& list, int k);
// Empty optionals mean "no good answer, question excluded from the macro mean".
std::optional<double> average_precision(const RankedList& list);
std::optional<double> mrr(const RankedList& list);
// 0 when every grade is zero.
double ndcg_at_k(const RankedList& list, int k);
// Fraction of ground-truth-ordered pairs the prediction agrees with; predicted
// ties count as agreement. strict_ties switches the denominator to count only
// pairs with distinct ground truth. Empty for lists shorter than 2.
std::optional<double> doa(const RankedList& list, bool strict_ties = false);

struct QuestionMetrics {
  std::string question_id;
  int n_answers = 0;
  double p_at_5 = 0.0, p_at_10 = 0.0;
  std::optional<double> ap, rr;
  double ndcg_at_1 = 0.0, ndcg_at_5 = 0.0, ndcg_at_10 = 0.0;
  std::optional<double> doa;
};

struct EvalReport {
  std::vector<QuestionMetrics> per_question;
  int question_count = 0;
  int excluded_no_good = 0;  // questions without a good answer (MAP/MRR)
  int excluded_doa = 0;      // questions with fewer than 2 answers

  double p_at_5 = 0.0, p_at_10 = 0.0, map = 0.0, mrr = 0.0;
  double ndcg_at_1 = 0.0, ndcg_at_5 = 0.0, ndcg_at_10 = 0.0, doa = 0.0;

  nlohmann::json to_json(const std::string& task) const;
  std::string to_csv(const std::string& task) const;
};

struct EvalOptions {
  std::int64_t good_threshold = 10;
  bool strict_doa_ties = false;
  std::optional<double> h_decay_override;  // H sweep hook
};

// Scores every answer with the ranking score and macro-averages the metrics.
EvalReport evaluate(const ModelParams& params, const VariantConfig& variant, const Vocabulary& vocab,
                    const Corpus& corpus, const EvalOptions& options = {});

// Metrics for one already-scored list (used by evaluate and by tests).
QuestionMetrics score_list(const std::string& question_id, const RankedList& list, bool strict_doa_ties);

}  // namespace earnn
