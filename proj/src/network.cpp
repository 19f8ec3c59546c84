#include "earnn/network.hpp"

#include <cmath>
#include <stdexcept>

#include "earnn/rng.hpp"

namespace earnn {

std::string VariantConfig::name() const {
  if (word_level()) return use_time_decay ? "earnn" : "earnn_w";
  return "earnn_s";
}

VariantConfig VariantConfig::parse(const std::string& name) {
  if (name == "earnn") return earnn();
  if (name == "earnn_w") return earnn_w();
  if (name == "earnn_s") return earnn_s();
  throw std::invalid_argument("unknown variant '" + name + "' (expected earnn, earnn_w or earnn_s)");
}

namespace {

LstmParams lstm_shape(int hidden, int embed) {
  LstmParams p;
  const int joined = embed + hidden;
  p.w_input = p.w_forget = p.w_output = p.w_candidate = Mat(hidden, joined);
  p.b_input = p.b_forget = p.b_output = p.b_candidate = Vec(hidden, 0.0);
  return p;
}

}  // namespace

ModelParams make_model_shape(const Dims& dims, EmbeddingTable embeddings) {
  if (dims.embed <= 0 || dims.hidden <= 0 || dims.relevance <= 0)
    throw std::invalid_argument("model dimensions must be positive");
  if (dims.hidden != dims.embed)
    throw std::invalid_argument("hidden size must equal the embedding size: pooled hidden states "
                                "and word vectors share one space");
  if (embeddings.dim() != dims.embed)
    throw std::invalid_argument("embedding table dimension does not match the model");
  ModelParams p;
  p.dims = dims;
  p.lstm_q = lstm_shape(dims.hidden, dims.embed);
  p.lstm_a = lstm_shape(dims.hidden, dims.embed);
  p.bilinear_w = Mat(dims.embed, dims.embed);
  p.mlp_w1 = Mat(dims.relevance, 2 * dims.embed);
  p.mlp_b1 = Vec(dims.relevance, 0.0);
  p.mlp_w2 = Vec(dims.relevance, 0.0);
  p.mlp_b2 = 0.0;
  p.embeddings = std::move(embeddings);
  return p;
}

EncodedQA encode_instance(const Vocabulary& vocab, const Question& q, const Answer& a,
                          std::int64_t first_answer_time) {
  EncodedQA e;
  for (const auto& t : q.tokens) e.question.push_back(vocab.lookup(t));
  for (const auto& sentence : a.sentences) {
    std::vector<int> ids;
    for (const auto& t : sentence) ids.push_back(vocab.lookup(t));
    e.sentences.push_back(std::move(ids));
  }
  for (const auto& phrase : q.topics) {
    std::vector<int> ids;
    for (const auto& t : phrase) ids.push_back(vocab.lookup(t));
    e.topics.push_back(std::move(ids));
  }
  e.answer_time = a.timestamp;
  e.first_answer_time = first_answer_time;
  return e;
}

DropoutPlan sample_dropout(Rng& rng, double rate, const EncodedQA& instance, int hidden_dim) {
  DropoutPlan plan;
  plan.rate = rate;
  if (rate <= 0.0) return plan;
  auto mask = [&](std::size_t n) {
    Mat m(static_cast<int>(n), hidden_dim);
    for (double& x : m.data) x = rng.bernoulli(rate) ? 0.0 : 1.0;
    return m;
  };
  plan.question_mask = mask(instance.question.size());
  for (const auto& sentence : instance.sentences) plan.sentence_masks.push_back(mask(sentence.size()));
  return plan;
}

std::pair<Vec, Vec> lstm_step(const LstmParams& p, const Vec& h_prev, const Vec& z_prev, const Vec& x) {
  if (static_cast<int>(x.size()) + static_cast<int>(h_prev.size()) != p.joined_dim() ||
      static_cast<int>(z_prev.size()) != p.hidden_dim())
    throw std::invalid_argument("lstm_step: input shapes do not match the parameters");
  const Vec joined = concat(x, h_prev);
  Vec i = matvec(p.w_input, joined);
  Vec f = matvec(p.w_forget, joined);
  Vec o = matvec(p.w_output, joined);
  Vec g = matvec(p.w_candidate, joined);
  const int h = p.hidden_dim();
  Vec cell(h), hidden(h);
  for (int k = 0; k < h; ++k) {
    const double ik = sigmoid(i[k] + p.b_input[k]);
    const double fk = sigmoid(f[k] + p.b_forget[k]);
    const double ok = sigmoid(o[k] + p.b_output[k]);
    const double gk = std::tanh(g[k] + p.b_candidate[k]);
    cell[k] = fk * z_prev[k] + ik * gk;
    hidden[k] = ok * std::tanh(cell[k]);
  }
  return {std::move(hidden), std::move(cell)};
}

namespace {

// Full-trace step used by the forward pass; lstm_step above is the public
// two-vector form of the same update.
LstmStepTrace traced_step(const LstmParams& p, const Vec& h_prev, const Vec& z_prev, const Vec& x) {
  LstmStepTrace t;
  t.joined = concat(x, h_prev);
  Vec ai = matvec(p.w_input, t.joined);
  Vec af = matvec(p.w_forget, t.joined);
  Vec ao = matvec(p.w_output, t.joined);
  Vec ag = matvec(p.w_candidate, t.joined);
  const int h = p.hidden_dim();
  t.gate_input.resize(h);
  t.gate_forget.resize(h);
  t.gate_output.resize(h);
  t.candidate.resize(h);
  t.cell.resize(h);
  t.cell_tanh.resize(h);
  t.hidden.resize(h);
  for (int k = 0; k < h; ++k) {
    t.gate_input[k] = sigmoid(ai[k] + p.b_input[k]);
    t.gate_forget[k] = sigmoid(af[k] + p.b_forget[k]);
    t.gate_output[k] = sigmoid(ao[k] + p.b_output[k]);
    t.candidate[k] = std::tanh(ag[k] + p.b_candidate[k]);
    t.cell[k] = t.gate_forget[k] * z_prev[k] + t.gate_input[k] * t.candidate[k];
    t.cell_tanh[k] = std::tanh(t.cell[k]);
    t.hidden[k] = t.gate_output[k] * t.cell_tanh[k];
  }
  return t;
}

SequenceTrace run_sequence(const LstmParams& p, const EmbeddingTable& emb,
                           const std::vector<int>& token_ids, const Vec& initial_cell,
                           const Mat* mask, double rate) {
  SequenceTrace trace;
  trace.token_ids = token_ids;
  const int h = p.hidden_dim();
  Vec hidden(h, 0.0), cell = initial_cell;
  const double keep = 1.0 - rate;
  for (std::size_t t = 0; t < token_ids.size(); ++t) {
    const Vec x = emb.vectors.row(token_ids[t]);
    LstmStepTrace step = traced_step(p, hidden, cell, x);
    hidden = step.hidden;
    cell = step.cell;
    step.dropped = step.hidden;
    if (mask != nullptr && rate > 0.0) {
      step.drop_scale.resize(h);
      for (int k = 0; k < h; ++k) {
        step.drop_scale[k] = (*mask)(static_cast<int>(t), k) / keep;
        step.dropped[k] *= step.drop_scale[k];
      }
    }
    trace.steps.push_back(std::move(step));
  }
  trace.final_cell = cell;
  return trace;
}

Vec mean_of_dropped(const SequenceTrace& seq) {
  const int h = static_cast<int>(seq.steps.front().hidden.size());
  Vec out(h, 0.0);
  for (const auto& step : seq.steps) axpy(1.0, step.dropped, out);
  for (double& x : out) x /= static_cast<double>(seq.steps.size());
  return out;
}

}  // namespace

SequenceTrace encode_question(const ModelParams& p, const std::vector<int>& token_ids,
                              const Mat* dropout_mask, double dropout_rate) {
  if (token_ids.empty()) throw std::invalid_argument("encode_question: empty token sequence");
  const Vec zero(p.dims.hidden, 0.0);
  return run_sequence(p.lstm_q, p.embeddings, token_ids, zero, dropout_mask, dropout_rate);
}

std::vector<SequenceTrace> encode_answer(const ModelParams& p,
                                         const std::vector<std::vector<int>>& sentences,
                                         const Vec& question_final_cell,
                                         const std::vector<Mat>* dropout_masks, double dropout_rate) {
  if (sentences.empty()) throw std::invalid_argument("encode_answer: empty sentence list");
  std::vector<SequenceTrace> traces;
  for (std::size_t j = 0; j < sentences.size(); ++j) {
    if (sentences[j].empty()) throw std::invalid_argument("encode_answer: empty sentence");
    const Mat* mask = dropout_masks != nullptr ? &(*dropout_masks)[j] : nullptr;
    traces.push_back(
        run_sequence(p.lstm_a, p.embeddings, sentences[j], question_final_cell, mask, dropout_rate));
  }
  return traces;
}

double cosine(const Vec& a, const Vec& b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

void sent_attention(ForwardTrace& trace) {
  trace.question_summary = mean_of_dropped(trace.question);
  const int h = static_cast<int>(trace.question_summary.size());
  trace.sentence_vecs.clear();
  trace.sentence_weights.clear();
  trace.answer_summary.assign(h, 0.0);
  for (const auto& sentence : trace.answer) {
    Vec s = mean_of_dropped(sentence);
    const double alpha = cosine(trace.question_summary, s);
    axpy(alpha, s, trace.answer_summary);
    trace.sentence_vecs.push_back(std::move(s));
    trace.sentence_weights.push_back(alpha);
  }
}

Vec topic_embed(const ModelParams& p, const std::vector<std::vector<int>>& topics) {
  if (topics.empty()) throw std::invalid_argument("topic_embed: no topic phrases");
  Vec out(p.dims.embed, 0.0);
  for (const auto& phrase : topics) {
    if (phrase.empty()) throw std::invalid_argument("topic_embed: empty topic phrase");
    Vec phrase_mean(p.dims.embed, 0.0);
    for (int id : phrase) axpy(1.0, p.embeddings.vectors.row(id), phrase_mean);
    axpy(1.0 / static_cast<double>(phrase.size()), phrase_mean, out);
  }
  for (double& x : out) x /= static_cast<double>(topics.size());
  return out;
}

void word_attention(const ModelParams& p, ForwardTrace& trace) {
  // scores_t = c^T W h_t; precompute c^T W once per pass.
  Vec c_w(p.dims.embed, 0.0);
  matvec_transpose_acc(p.bilinear_w, trace.topic_vec, c_w);

  auto attend = [&](const SequenceTrace& seq, Vec& pooled) {
    WordAttnTrace attn;
    for (const auto& step : seq.steps) attn.scores.push_back(dot(c_w, step.dropped));
    attn.weights = softmax(attn.scores);
    pooled.assign(p.dims.embed, 0.0);
    for (std::size_t t = 0; t < seq.steps.size(); ++t)
      axpy(attn.weights[t], seq.steps[t].dropped, pooled);
    return attn;
  };

  trace.question_attn = attend(trace.question, trace.question_summary);
  trace.sentence_attn.clear();
  trace.sentence_vecs.clear();
  trace.sentence_weights.clear();
  trace.answer_summary.assign(p.dims.embed, 0.0);
  for (const auto& sentence : trace.answer) {
    Vec s;
    trace.sentence_attn.push_back(attend(sentence, s));
    const double alpha = cosine(trace.question_summary, s);
    axpy(alpha, s, trace.answer_summary);
    trace.sentence_vecs.push_back(std::move(s));
    trace.sentence_weights.push_back(alpha);
  }
}

void match_score(const ModelParams& p, ForwardTrace& trace) {
  trace.joined_summary = concat(trace.question_summary, trace.answer_summary);
  trace.relevance_pre = matvec(p.mlp_w1, trace.joined_summary);
  trace.relevance.resize(trace.relevance_pre.size());
  for (std::size_t k = 0; k < trace.relevance_pre.size(); ++k) {
    trace.relevance_pre[k] += p.mlp_b1[k];
    trace.relevance[k] = std::tanh(trace.relevance_pre[k]);
  }
  trace.match_pre = dot(p.mlp_w2, trace.relevance) + p.mlp_b2;
  trace.match_score = sigmoid(trace.match_pre);
}

double rank_score(double match, std::int64_t t, std::int64_t t0, double h_decay, bool use_decay) {
  if (t < t0) throw std::invalid_argument("rank_score: answer timestamp precedes the first answer");
  if (!use_decay) return match;
  if (h_decay <= 0.0) throw std::invalid_argument("rank_score: decay horizon must be positive");
  return std::exp(-static_cast<double>(t - t0) / h_decay) * match;
}

ForwardTrace forward(const ModelParams& p, const VariantConfig& variant, const EncodedQA& instance,
                     const DropoutPlan* dropout) {
  ForwardTrace trace;
  trace.variant = variant;

  const Mat* q_mask = nullptr;
  const std::vector<Mat>* a_masks = nullptr;
  double rate = 0.0;
  if (dropout != nullptr && dropout->rate > 0.0) {
    rate = dropout->rate;
    q_mask = &dropout->question_mask;
    a_masks = &dropout->sentence_masks;
  }

  trace.question = encode_question(p, instance.question, q_mask, rate);
  trace.answer = encode_answer(p, instance.sentences, trace.question.final_cell, a_masks, rate);

  if (variant.word_level()) {
    trace.topic_vec = topic_embed(p, instance.topics);
    trace.topic_token_ids = instance.topics;
    word_attention(p, trace);
  } else {
    sent_attention(trace);
  }

  match_score(p, trace);
  trace.decay = variant.use_time_decay
                    ? std::exp(-static_cast<double>(instance.answer_time - instance.first_answer_time) /
                               p.h_decay)
                    : 1.0;
  trace.rank_score =
      rank_score(trace.match_score, instance.answer_time, instance.first_answer_time, p.h_decay,
                 variant.use_time_decay);
  return trace;
}

}  // namespace earnn
