#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "earnn/corpus.hpp"
#include "earnn/embedding.hpp"
#include "earnn/tensor.hpp"

namespace earnn {

// Gate weights act on the concatenation [x; h_prev], so every matrix is
// hidden x (embed + hidden). No peephole terms.
struct LstmParams {
  Mat w_input, w_forget, w_output, w_candidate;
  Vec b_input, b_forget, b_output, b_candidate;

  int hidden_dim() const { return static_cast<int>(b_input.size()); }
  int joined_dim() const { return w_input.cols; }
};

struct Dims {
  int embed = 50;      // K, word vector size
  int hidden = 50;     // LSTM hidden/cell size; must equal embed (pooled hidden
                       // states and word vectors share one space)
  int relevance = 50;  // U, width of the matching head's hidden layer
};

struct VariantConfig {
  enum class Attention { sentence_level, word_level };
  Attention attention = Attention::word_level;
  bool use_time_decay = true;

  static VariantConfig earnn() { return {Attention::word_level, true}; }
  static VariantConfig earnn_w() { return {Attention::word_level, false}; }
  static VariantConfig earnn_s() { return {Attention::sentence_level, false}; }

  bool word_level() const { return attention == Attention::word_level; }
  std::string name() const;
  static VariantConfig parse(const std::string& name);
};

struct ModelParams {
  Dims dims;
  LstmParams lstm_q;     // question encoder
  LstmParams lstm_a;     // answer encoder, separate parameters
  Mat bilinear_w;        // K x K translation matrix scoring topic-word affinity
  Mat mlp_w1;            // U x 2K
  Vec mlp_b1;            // U
  Vec mlp_w2;            // U (the 1 x U output row)
  double mlp_b2 = 0.0;
  EmbeddingTable embeddings;
  bool embeddings_trainable = true;
  double h_decay = 1e6;  // seconds
  double margin = 0.1;
};

// Shapes alone (weights zero); validates hidden == embed.
ModelParams make_model_shape(const Dims& dims, EmbeddingTable embeddings);

// A question/answer pair resolved to vocabulary indices.
struct EncodedQA {
  std::vector<int> question;                 // N token ids
  std::vector<std::vector<int>> sentences;   // M sentences of ids
  std::vector<std::vector<int>> topics;      // |C| phrases of ids
  std::int64_t answer_time = 0;
  std::int64_t first_answer_time = 0;
};

EncodedQA encode_instance(const Vocabulary& vocab, const Question& q, const Answer& a,
                          std::int64_t first_answer_time);

// Inverted-dropout masks for one forward pass (0/1 entries, scaled by 1/keep
// at apply time). Hidden states only; the recurrent path stays undropped.
struct DropoutPlan {
  double rate = 0.0;
  Mat question_mask;               // N x hidden
  std::vector<Mat> sentence_masks; // per sentence
};

class Rng;
DropoutPlan sample_dropout(Rng& rng, double rate, const EncodedQA& instance, int hidden_dim);

struct LstmStepTrace {
  Vec joined;      // [x; h_prev]
  Vec gate_input, gate_forget, gate_output, candidate;
  Vec cell, cell_tanh;
  Vec hidden;
  Vec dropped;     // hidden after dropout; equals hidden when no mask
  Vec drop_scale;  // per-unit mask/keep factors; empty when no dropout
};

struct SequenceTrace {
  std::vector<int> token_ids;
  std::vector<LstmStepTrace> steps;
  Vec final_cell;
  int length() const { return static_cast<int>(steps.size()); }
};

struct WordAttnTrace {
  Vec scores;   // bilinear scores, one per word
  Vec weights;  // softmax of scores
};

struct ForwardTrace {
  VariantConfig variant;
  SequenceTrace question;
  std::vector<SequenceTrace> answer;

  Vec topic_vec;                          // c^f (word-level variants)
  std::vector<std::vector<int>> topic_token_ids;
  WordAttnTrace question_attn;            // word-level only
  std::vector<WordAttnTrace> sentence_attn;

  Vec question_summary;                   // q^f
  std::vector<Vec> sentence_vecs;         // s_j
  Vec sentence_weights;                   // alpha, unnormalized cosine scores
  Vec answer_summary;                     // a^f

  Vec joined_summary;                     // [q^f ; a^f]
  Vec relevance_pre, relevance;           // u before/after tanh
  double match_pre = 0.0;                 // logit of V-hat
  double match_score = 0.0;               // V-hat in (0,1)
  double decay = 1.0;
  double rank_score = 0.0;                // V-tilde
};

// ---- individual layers -----------------------------------------------------

std::pair<Vec, Vec> lstm_step(const LstmParams& p, const Vec& h_prev, const Vec& z_prev, const Vec& x);

SequenceTrace encode_question(const ModelParams& p, const std::vector<int>& token_ids,
                              const Mat* dropout_mask, double dropout_rate);
std::vector<SequenceTrace> encode_answer(const ModelParams& p,
                                         const std::vector<std::vector<int>>& sentences,
                                         const Vec& question_final_cell,
                                         const std::vector<Mat>* dropout_masks, double dropout_rate);

// Cosine with zero-norm inputs scored 0.
double cosine(const Vec& a, const Vec& b);

// Mean-pooled question, cosine-weighted sentence combination.
void sent_attention(ForwardTrace& trace);

Vec topic_embed(const ModelParams& p, const std::vector<std::vector<int>>& topics);

// Topic-conditioned softmax over words in every sequence, then the cosine
// sentence combination on top.
void word_attention(const ModelParams& p, ForwardTrace& trace);

void match_score(const ModelParams& p, ForwardTrace& trace);

double rank_score(double match, std::int64_t t, std::int64_t t0, double h_decay, bool use_decay);

ForwardTrace forward(const ModelParams& p, const VariantConfig& variant, const EncodedQA& instance,
                     const DropoutPlan* dropout = nullptr);

}  // namespace earnn
