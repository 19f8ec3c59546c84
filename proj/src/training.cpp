#include "earnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "earnn/metrics.hpp"
#include "earnn/rng.hpp"

namespace earnn {

namespace {

LstmGrads lstm_grads_like(const LstmParams& p) {
  LstmGrads g;
  g.w_input = g.w_forget = g.w_output = g.w_candidate = Mat(p.w_input.rows, p.w_input.cols);
  g.b_input = g.b_forget = g.b_output = g.b_candidate = Vec(p.b_input.size(), 0.0);
  return g;
}

void glorot_fill(Mat& m, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
  for (double& x : m.data) x = rng.uniform(-bound, bound);
}

}  // namespace

Gradients Gradients::zeros_like(const ModelParams& p) {
  Gradients g;
  g.lstm_q = lstm_grads_like(p.lstm_q);
  g.lstm_a = lstm_grads_like(p.lstm_a);
  g.bilinear_w = Mat(p.bilinear_w.rows, p.bilinear_w.cols);
  g.mlp_w1 = Mat(p.mlp_w1.rows, p.mlp_w1.cols);
  g.mlp_b1 = Vec(p.mlp_b1.size(), 0.0);
  g.mlp_w2 = Vec(p.mlp_w2.size(), 0.0);
  g.mlp_b2 = 0.0;
  g.embeddings = Mat(p.embeddings.vectors.rows, p.embeddings.vectors.cols);
  return g;
}

void Gradients::clear() {
  auto zero_mat = [](Mat& m) { std::fill(m.data.begin(), m.data.end(), 0.0); };
  auto zero_vec = [](Vec& v) { std::fill(v.begin(), v.end(), 0.0); };
  for (LstmGrads* g : {&lstm_q, &lstm_a}) {
    zero_mat(g->w_input);
    zero_mat(g->w_forget);
    zero_mat(g->w_output);
    zero_mat(g->w_candidate);
    zero_vec(g->b_input);
    zero_vec(g->b_forget);
    zero_vec(g->b_output);
    zero_vec(g->b_candidate);
  }
  zero_mat(bilinear_w);
  zero_mat(mlp_w1);
  zero_vec(mlp_b1);
  zero_vec(mlp_w2);
  mlp_b2 = 0.0;
  zero_mat(embeddings);
}

ModelParams init_params(const Dims& dims, EmbeddingTable embeddings, std::uint64_t seed,
                        double h_decay, double margin) {
  ModelParams p = make_model_shape(dims, std::move(embeddings));
  p.h_decay = h_decay;
  p.margin = margin;
  Rng rng(seed);
  for (LstmParams* lstm : {&p.lstm_q, &p.lstm_a}) {
    glorot_fill(lstm->w_input, rng);
    glorot_fill(lstm->w_forget, rng);
    glorot_fill(lstm->w_output, rng);
    glorot_fill(lstm->w_candidate, rng);
  }
  glorot_fill(p.bilinear_w, rng);
  glorot_fill(p.mlp_w1, rng);
  {
    // the 1 x U output row
    const double bound = std::sqrt(6.0 / static_cast<double>(p.mlp_w2.size() + 1));
    for (double& x : p.mlp_w2) x = rng.uniform(-bound, bound);
  }
  return p;
}

TripleEval triple_loss(const ModelParams& p, const VariantConfig& variant, const EncodedQA& pos,
                       const EncodedQA& neg, const DropoutPlan* pos_dropout,
                       const DropoutPlan* neg_dropout) {
  TripleEval eval;
  eval.pos = forward(p, variant, pos, pos_dropout);
  eval.neg = forward(p, variant, neg, neg_dropout);
  eval.delta = p.margin + eval.neg.rank_score - eval.pos.rank_score;
  eval.loss = std::max(0.0, eval.delta);
  return eval;
}

namespace {

// d/dq of cos(q, s) and d/ds, accumulated into the given vectors.
void cosine_backward(const Vec& q, const Vec& s, double d_alpha, Vec& dq, Vec& ds) {
  const double nq = norm(q), ns = norm(s);
  if (nq == 0.0 || ns == 0.0) return;  // cosine defined 0 there; subgradient 0
  const double c = dot(q, s) / (nq * ns);
  for (std::size_t k = 0; k < q.size(); ++k) {
    dq[k] += d_alpha * (s[k] / (nq * ns) - c * q[k] / (nq * nq));
    ds[k] += d_alpha * (q[k] / (nq * ns) - c * s[k] / (ns * ns));
  }
}

// BPTT over one sequence. d_dropped holds dL/d(dropped hidden state) per step;
// d_final_cell is the gradient flowing into the last cell from outside (the
// answer encoder's initial-cell handoff). Returns dL/d(initial cell).
Vec backprop_sequence(const LstmParams& p, LstmGrads& g, const SequenceTrace& seq,
                      const Vec& initial_cell, const std::vector<Vec>& d_dropped,
                      const Vec& d_final_cell, Mat* d_embeddings) {
  const int h = p.hidden_dim();
  const int n = seq.length();
  const int embed = p.joined_dim() - h;
  Vec d_h_carry(h, 0.0);
  Vec d_z_carry = d_final_cell;
  Vec d_ai(h), d_af(h), d_ao(h), d_ag(h);
  for (int t = n - 1; t >= 0; --t) {
    const LstmStepTrace& step = seq.steps[static_cast<std::size_t>(t)];
    const Vec& z_prev = t > 0 ? seq.steps[static_cast<std::size_t>(t - 1)].cell : initial_cell;

    Vec d_hidden = d_h_carry;
    if (step.drop_scale.empty()) {
      axpy(1.0, d_dropped[static_cast<std::size_t>(t)], d_hidden);
    } else {
      for (int k = 0; k < h; ++k)
        d_hidden[k] += d_dropped[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] *
                       step.drop_scale[static_cast<std::size_t>(k)];
    }

    for (int k = 0; k < h; ++k) {
      const double i = step.gate_input[k], f = step.gate_forget[k];
      const double o = step.gate_output[k], cand = step.candidate[k];
      const double d_z = d_z_carry[k] + d_hidden[k] * o * (1.0 - step.cell_tanh[k] * step.cell_tanh[k]);
      d_ao[k] = d_hidden[k] * step.cell_tanh[k] * o * (1.0 - o);
      d_ai[k] = d_z * cand * i * (1.0 - i);
      d_af[k] = d_z * z_prev[k] * f * (1.0 - f);
      d_ag[k] = d_z * i * (1.0 - cand * cand);
      d_z_carry[k] = d_z * f;
    }

    outer_acc(g.w_input, d_ai, step.joined);
    outer_acc(g.w_forget, d_af, step.joined);
    outer_acc(g.w_output, d_ao, step.joined);
    outer_acc(g.w_candidate, d_ag, step.joined);
    axpy(1.0, d_ai, g.b_input);
    axpy(1.0, d_af, g.b_forget);
    axpy(1.0, d_ao, g.b_output);
    axpy(1.0, d_ag, g.b_candidate);

    Vec d_joined(static_cast<std::size_t>(p.joined_dim()), 0.0);
    matvec_transpose_acc(p.w_input, d_ai, d_joined);
    matvec_transpose_acc(p.w_forget, d_af, d_joined);
    matvec_transpose_acc(p.w_output, d_ao, d_joined);
    matvec_transpose_acc(p.w_candidate, d_ag, d_joined);

    if (d_embeddings != nullptr) {
      const int row = seq.token_ids[static_cast<std::size_t>(t)];
      for (int k = 0; k < embed; ++k)
        (*d_embeddings)(row, k) += d_joined[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < h; ++k) d_h_carry[k] = d_joined[static_cast<std::size_t>(embed + k)];
  }
  return d_z_carry;
}

// Backprop of one forward trace with dL/d(rank score) = d_rank.
void backprop_trace(const ModelParams& p, const ForwardTrace& trace, double d_rank, Gradients& g,
                    FaultInjection fault) {
  const int embed = p.dims.embed;
  const double tanh_sign = fault == FaultInjection::tanh_derivative ? -1.0 : 1.0;
  Mat* d_emb = p.embeddings_trainable ? &g.embeddings : nullptr;

  // evaluation head: V-tilde = decay * sigmoid(w2 . tanh(W1 [qf;af] + b1) + b2)
  const double d_match = d_rank * trace.decay;
  const double d_pre = d_match * trace.match_score * (1.0 - trace.match_score);
  axpy(d_pre, trace.relevance, g.mlp_w2);
  g.mlp_b2 += d_pre;
  Vec d_relevance_pre(trace.relevance.size());
  for (std::size_t k = 0; k < trace.relevance.size(); ++k)
    d_relevance_pre[k] =
        d_pre * p.mlp_w2[k] * tanh_sign * (1.0 - trace.relevance[k] * trace.relevance[k]);
  outer_acc(g.mlp_w1, d_relevance_pre, trace.joined_summary);
  axpy(1.0, d_relevance_pre, g.mlp_b1);
  Vec d_joined(trace.joined_summary.size(), 0.0);
  matvec_transpose_acc(p.mlp_w1, d_relevance_pre, d_joined);
  Vec d_qf(d_joined.begin(), d_joined.begin() + embed);
  Vec d_af(d_joined.begin() + embed, d_joined.end());

  // answer combination: af = sum_j alpha_j s_j with alpha_j = cos(qf, s_j)
  const std::size_t m = trace.sentence_vecs.size();
  std::vector<Vec> d_sentence(m, Vec(static_cast<std::size_t>(embed), 0.0));
  for (std::size_t j = 0; j < m; ++j) {
    const double d_alpha = dot(d_af, trace.sentence_vecs[j]);
    axpy(trace.sentence_weights[j], d_af, d_sentence[j]);
    cosine_backward(trace.question_summary, trace.sentence_vecs[j], d_alpha, d_qf, d_sentence[j]);
  }

  // per-step gradients on the dropped hidden states
  std::vector<Vec> d_q_steps(trace.question.steps.size(), Vec(static_cast<std::size_t>(embed), 0.0));
  std::vector<std::vector<Vec>> d_a_steps;
  for (const auto& sentence : trace.answer)
    d_a_steps.emplace_back(sentence.steps.size(), Vec(static_cast<std::size_t>(embed), 0.0));

  if (trace.variant.word_level()) {
    // scores_t = c^T W y_t, weights = softmax, pooled = sum_t beta_t y_t
    Vec w_t_c(static_cast<std::size_t>(embed), 0.0);  // W^T c
    matvec_transpose_acc(p.bilinear_w, trace.topic_vec, w_t_c);
    Vec d_topic(static_cast<std::size_t>(embed), 0.0);

    auto attend_backward = [&](const SequenceTrace& seq, const WordAttnTrace& attn,
                               const Vec& d_pooled, std::vector<Vec>& d_steps) {
      const std::size_t n = seq.steps.size();
      Vec d_beta(n);
      for (std::size_t t = 0; t < n; ++t) {
        d_beta[t] = dot(d_pooled, seq.steps[t].dropped);
        axpy(attn.weights[t], d_pooled, d_steps[t]);
      }
      double inner = 0.0;
      for (std::size_t t = 0; t < n; ++t) inner += attn.weights[t] * d_beta[t];
      for (std::size_t t = 0; t < n; ++t) {
        const double d_score = attn.weights[t] * (d_beta[t] - inner);
        if (d_score == 0.0) continue;
        outer_acc(g.bilinear_w, trace.topic_vec, seq.steps[t].dropped, d_score);
        axpy(d_score, matvec(p.bilinear_w, seq.steps[t].dropped), d_topic);
        axpy(d_score, w_t_c, d_steps[t]);
      }
    };

    attend_backward(trace.question, trace.question_attn, d_qf, d_q_steps);
    for (std::size_t j = 0; j < m; ++j)
      attend_backward(trace.answer[j], trace.sentence_attn[j], d_sentence[j], d_a_steps[j]);

    // topic vector is a nested mean of raw embedding rows
    if (d_emb != nullptr) {
      const double n_phrases = static_cast<double>(trace.topic_token_ids.size());
      for (const auto& phrase : trace.topic_token_ids) {
        const double scale = 1.0 / (n_phrases * static_cast<double>(phrase.size()));
        for (int row : phrase)
          for (int k = 0; k < embed; ++k)
            (*d_emb)(row, k) += scale * d_topic[static_cast<std::size_t>(k)];
      }
    }
  } else {
    // mean pooling on both sides
    const double inv_n = 1.0 / static_cast<double>(trace.question.steps.size());
    for (auto& d : d_q_steps) axpy(inv_n, d_qf, d);
    for (std::size_t j = 0; j < m; ++j) {
      const double inv = 1.0 / static_cast<double>(trace.answer[j].steps.size());
      for (auto& d : d_a_steps[j]) axpy(inv, d_sentence[j], d);
    }
  }

  // answer sentences: independent BPTT runs, all handing gradient back into
  // the question's final cell
  Vec d_q_final_cell(static_cast<std::size_t>(p.dims.hidden), 0.0);
  for (std::size_t j = 0; j < trace.answer.size(); ++j) {
    const Vec zero(static_cast<std::size_t>(p.dims.hidden), 0.0);
    Vec d_init = backprop_sequence(p.lstm_a, g.lstm_a, trace.answer[j], trace.question.final_cell,
                                   d_a_steps[j], zero, d_emb);
    axpy(1.0, d_init, d_q_final_cell);
  }

  const Vec q_zero(static_cast<std::size_t>(p.dims.hidden), 0.0);
  backprop_sequence(p.lstm_q, g.lstm_q, trace.question, q_zero, d_q_steps, d_q_final_cell, d_emb);
}

}  // namespace

Gradients backward(const ModelParams& p, const TripleEval& eval, FaultInjection fault) {
  if (!(eval.delta > 0.0))
    throw std::logic_error("backward called on a non-violating triple (delta <= 0)");
  Gradients g = Gradients::zeros_like(p);
  backprop_trace(p, eval.neg, 1.0, g, fault);
  backprop_trace(p, eval.pos, -1.0, g, fault);
  return g;
}

void sgd_step(ModelParams& p, const Gradients& g, double learning_rate) {
  auto step_mat = [&](Mat& m, const Mat& d) {
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] -= learning_rate * d.data[i];
  };
  auto step_vec = [&](Vec& v, const Vec& d) {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= learning_rate * d[i];
  };
  for (auto [lp, lg] : {std::pair{&p.lstm_q, &g.lstm_q}, std::pair{&p.lstm_a, &g.lstm_a}}) {
    step_mat(lp->w_input, lg->w_input);
    step_mat(lp->w_forget, lg->w_forget);
    step_mat(lp->w_output, lg->w_output);
    step_mat(lp->w_candidate, lg->w_candidate);
    step_vec(lp->b_input, lg->b_input);
    step_vec(lp->b_forget, lg->b_forget);
    step_vec(lp->b_output, lg->b_output);
    step_vec(lp->b_candidate, lg->b_candidate);
  }
  step_mat(p.bilinear_w, g.bilinear_w);
  step_mat(p.mlp_w1, g.mlp_w1);
  step_vec(p.mlp_b1, g.mlp_b1);
  step_vec(p.mlp_w2, g.mlp_w2);
  p.mlp_b2 -= learning_rate * g.mlp_b2;
  if (p.embeddings_trainable) step_mat(p.embeddings.vectors, g.embeddings);
}

TrainResult train(const Corpus& corpus, const std::vector<Triple>& triples, const Vocabulary& vocab,
                  ModelParams initial, const TrainConfig& config,
                  const std::function<bool(const EpochStats&)>& on_epoch) {
  if (triples.empty()) throw std::invalid_argument("train: no triples");
  TrainResult result;
  result.params = std::move(initial);
  result.params.margin = config.margin;
  result.params.h_decay = config.h_decay;

  // Resolve every (question, answer) pair up front; forward passes then work
  // on token ids only.
  std::unordered_map<std::string, EncodedQA> encoded;
  for (const auto& [qid, list] : corpus.answers) {
    if (list.empty()) continue;
    const Question& q = corpus.questions.at(qid);
    const std::int64_t t0 = list.front().timestamp;
    for (const Answer& a : list) encoded.emplace(a.id, encode_instance(vocab, q, a, t0));
  }
  for (const Triple& t : triples) {
    if (!encoded.count(t.pos_answer_id) || !encoded.count(t.neg_answer_id))
      throw std::invalid_argument("train: triple references an answer missing from the corpus");
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(triples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  EvalOptions eval_options;
  eval_options.good_threshold = config.good_threshold;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) rng.shuffle(order);
    double loss_sum = 0.0;
    int skipped = 0;
    for (std::size_t idx : order) {
      const Triple& t = triples[idx];
      const EncodedQA& pos = encoded.at(t.pos_answer_id);
      const EncodedQA& neg = encoded.at(t.neg_answer_id);

      DropoutPlan pos_plan, neg_plan;
      const DropoutPlan* pos_ptr = nullptr;
      const DropoutPlan* neg_ptr = nullptr;
      if (config.dropout > 0.0) {
        pos_plan = sample_dropout(rng, config.dropout, pos, result.params.dims.hidden);
        neg_plan = sample_dropout(rng, config.dropout, neg, result.params.dims.hidden);
        pos_ptr = &pos_plan;
        neg_ptr = &neg_plan;
      }

      const TripleEval eval = triple_loss(result.params, config.variant, pos, neg, pos_ptr, neg_ptr);
      if (!std::isfinite(eval.loss))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", triple (" + t.question_id + ", " + t.pos_answer_id + ", " +
                                 t.neg_answer_id + ")");
      loss_sum += eval.loss;
      if (eval.delta <= 0.0) {
        ++skipped;  // parameters stay untouched
        continue;
      }
      const Gradients g = backward(result.params, eval);
      sgd_step(result.params, g, config.learning_rate);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(triples.size());
    stats.skipped = skipped;
    const EvalReport report = evaluate(result.params, config.variant, vocab, corpus, eval_options);
    stats.train_map = report.map;
    stats.train_doa = report.doa;
    result.log.push_back(stats);
    if (on_epoch && !on_epoch(stats)) break;
  }
  return result;
}

namespace {

// ---- extended-precision loss evaluation for the finite-difference oracle ---
//
// Central differences divide an O(eps_machine * |loss|) evaluation error by
// 2*epsilon; in plain double that noise floor sits right where the 1e-4
// tolerance lives. Evaluating the probe losses in long double pushes it three
// orders of magnitude down while the parameters themselves stay double.

using LD = long double;
using LV = std::vector<LD>;

LV ld_matvec(const Mat& m, const LV& x) {
  LV out(static_cast<std::size_t>(m.rows), 0.0L);
  for (int r = 0; r < m.rows; ++r) {
    LD acc = 0.0L;
    for (int c = 0; c < m.cols; ++c) acc += static_cast<LD>(m(r, c)) * x[static_cast<std::size_t>(c)];
    out[static_cast<std::size_t>(r)] = acc;
  }
  return out;
}

LD ld_sigmoid(LD x) { return 1.0L / (1.0L + std::exp(-x)); }

void ld_lstm_cell(const LstmParams& p, const LV& x, LV& h, LV& z) {
  LV joined(x);
  joined.insert(joined.end(), h.begin(), h.end());
  const LV ai = ld_matvec(p.w_input, joined), af = ld_matvec(p.w_forget, joined);
  const LV ao = ld_matvec(p.w_output, joined), ag = ld_matvec(p.w_candidate, joined);
  for (std::size_t k = 0; k < h.size(); ++k) {
    const LD i = ld_sigmoid(ai[k] + static_cast<LD>(p.b_input[k]));
    const LD f = ld_sigmoid(af[k] + static_cast<LD>(p.b_forget[k]));
    const LD o = ld_sigmoid(ao[k] + static_cast<LD>(p.b_output[k]));
    const LD g = std::tanh(ag[k] + static_cast<LD>(p.b_candidate[k]));
    z[k] = f * z[k] + i * g;
    h[k] = o * std::tanh(z[k]);
  }
}

LV ld_row(const Mat& m, int r) {
  LV out(static_cast<std::size_t>(m.cols));
  for (int c = 0; c < m.cols; ++c) out[static_cast<std::size_t>(c)] = m(r, c);
  return out;
}

LD ld_dot(const LV& a, const LV& b) {
  LD s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

LD ld_rank_score(const ModelParams& p, const VariantConfig& variant, const EncodedQA& e) {
  const std::size_t dim = static_cast<std::size_t>(p.dims.embed);
  LV qh(dim, 0.0L), qz(dim, 0.0L);
  std::vector<LV> q_hidden;
  for (int id : e.question) {
    ld_lstm_cell(p.lstm_q, ld_row(p.embeddings.vectors, id), qh, qz);
    q_hidden.push_back(qh);
  }
  std::vector<std::vector<LV>> sent_hidden;
  for (const auto& s : e.sentences) {
    LV h(dim, 0.0L), z = qz;
    std::vector<LV> states;
    for (int id : s) {
      ld_lstm_cell(p.lstm_a, ld_row(p.embeddings.vectors, id), h, z);
      states.push_back(h);
    }
    sent_hidden.push_back(std::move(states));
  }

  auto mean_of = [&](const std::vector<LV>& rows) {
    LV out(dim, 0.0L);
    for (const LV& r : rows)
      for (std::size_t k = 0; k < dim; ++k) out[k] += r[k];
    for (LD& x : out) x /= static_cast<LD>(rows.size());
    return out;
  };

  LV qf, af(dim, 0.0L);
  std::vector<LV> sentence_vecs;
  if (variant.word_level()) {
    LV cf(dim, 0.0L);
    for (const auto& phrase : e.topics) {
      LV pm(dim, 0.0L);
      for (int id : phrase)
        for (std::size_t k = 0; k < dim; ++k) pm[k] += static_cast<LD>(p.embeddings.vectors(id, static_cast<int>(k)));
      for (std::size_t k = 0; k < dim; ++k) cf[k] += pm[k] / static_cast<LD>(phrase.size());
    }
    for (LD& x : cf) x /= static_cast<LD>(e.topics.size());

    LV c_w(dim, 0.0L);  // W^T c
    for (int r = 0; r < p.bilinear_w.rows; ++r)
      for (int c = 0; c < p.bilinear_w.cols; ++c)
        c_w[static_cast<std::size_t>(c)] += cf[static_cast<std::size_t>(r)] * static_cast<LD>(p.bilinear_w(r, c));

    auto soft_pool = [&](const std::vector<LV>& hidden) {
      LV scores;
      for (const LV& h : hidden) scores.push_back(ld_dot(c_w, h));
      LD mx = scores[0];
      for (LD s : scores) mx = std::max(mx, s);
      LD sum = 0.0L;
      LV w(scores.size());
      for (std::size_t t = 0; t < scores.size(); ++t) sum += w[t] = std::exp(scores[t] - mx);
      LV pooled(dim, 0.0L);
      for (std::size_t t = 0; t < scores.size(); ++t)
        for (std::size_t k = 0; k < dim; ++k) pooled[k] += w[t] / sum * hidden[t][k];
      return pooled;
    };
    qf = soft_pool(q_hidden);
    for (const auto& hidden : sent_hidden) sentence_vecs.push_back(soft_pool(hidden));
  } else {
    qf = mean_of(q_hidden);
    for (const auto& hidden : sent_hidden) sentence_vecs.push_back(mean_of(hidden));
  }

  const LD qn = std::sqrt(ld_dot(qf, qf));
  for (const LV& s : sentence_vecs) {
    const LD sn = std::sqrt(ld_dot(s, s));
    const LD alpha = (qn == 0.0L || sn == 0.0L) ? 0.0L : ld_dot(qf, s) / (qn * sn);
    for (std::size_t k = 0; k < dim; ++k) af[k] += alpha * s[k];
  }

  LV joined(qf);
  joined.insert(joined.end(), af.begin(), af.end());
  LV u = ld_matvec(p.mlp_w1, joined);
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = std::tanh(u[k] + static_cast<LD>(p.mlp_b1[k]));
  LD pre = static_cast<LD>(p.mlp_b2);
  for (std::size_t k = 0; k < u.size(); ++k) pre += static_cast<LD>(p.mlp_w2[k]) * u[k];
  LD match = ld_sigmoid(pre);
  if (!variant.use_time_decay) return match;
  const LD age = static_cast<LD>(e.answer_time - e.first_answer_time);
  return std::exp(-age / static_cast<LD>(p.h_decay)) * match;
}

LD ld_hinge_loss(const ModelParams& p, const VariantConfig& variant, const EncodedQA& pos,
                 const EncodedQA& neg) {
  const LD delta = static_cast<LD>(p.margin) + ld_rank_score(p, variant, neg) - ld_rank_score(p, variant, pos);
  return std::max(0.0L, delta);
}

struct TensorRef {
  std::string name;
  double* data;
  std::size_t size;
};

std::vector<TensorRef> tensor_refs(ModelParams& p) {
  std::vector<TensorRef> refs;
  auto add_lstm = [&](const std::string& prefix, LstmParams& l) {
    refs.push_back({prefix + ".w_input", l.w_input.data.data(), l.w_input.size()});
    refs.push_back({prefix + ".w_forget", l.w_forget.data.data(), l.w_forget.size()});
    refs.push_back({prefix + ".w_output", l.w_output.data.data(), l.w_output.size()});
    refs.push_back({prefix + ".w_candidate", l.w_candidate.data.data(), l.w_candidate.size()});
    refs.push_back({prefix + ".b_input", l.b_input.data(), l.b_input.size()});
    refs.push_back({prefix + ".b_forget", l.b_forget.data(), l.b_forget.size()});
    refs.push_back({prefix + ".b_output", l.b_output.data(), l.b_output.size()});
    refs.push_back({prefix + ".b_candidate", l.b_candidate.data(), l.b_candidate.size()});
  };
  add_lstm("lstm_q", p.lstm_q);
  add_lstm("lstm_a", p.lstm_a);
  refs.push_back({"bilinear_w", p.bilinear_w.data.data(), p.bilinear_w.size()});
  refs.push_back({"mlp_w1", p.mlp_w1.data.data(), p.mlp_w1.size()});
  refs.push_back({"mlp_b1", p.mlp_b1.data(), p.mlp_b1.size()});
  refs.push_back({"mlp_w2", p.mlp_w2.data(), p.mlp_w2.size()});
  refs.push_back({"mlp_b2", &p.mlp_b2, 1});
  if (p.embeddings_trainable)
    refs.push_back({"embeddings", p.embeddings.vectors.data.data(), p.embeddings.vectors.size()});
  return refs;
}

std::vector<TensorRef> tensor_refs(Gradients& g, bool embeddings_trainable) {
  std::vector<TensorRef> refs;
  auto add_lstm = [&](const std::string& prefix, LstmGrads& l) {
    refs.push_back({prefix + ".w_input", l.w_input.data.data(), l.w_input.size()});
    refs.push_back({prefix + ".w_forget", l.w_forget.data.data(), l.w_forget.size()});
    refs.push_back({prefix + ".w_output", l.w_output.data.data(), l.w_output.size()});
    refs.push_back({prefix + ".w_candidate", l.w_candidate.data.data(), l.w_candidate.size()});
    refs.push_back({prefix + ".b_input", l.b_input.data(), l.b_input.size()});
    refs.push_back({prefix + ".b_forget", l.b_forget.data(), l.b_forget.size()});
    refs.push_back({prefix + ".b_output", l.b_output.data(), l.b_output.size()});
    refs.push_back({prefix + ".b_candidate", l.b_candidate.data(), l.b_candidate.size()});
  };
  add_lstm("lstm_q", g.lstm_q);
  add_lstm("lstm_a", g.lstm_a);
  refs.push_back({"bilinear_w", g.bilinear_w.data.data(), g.bilinear_w.size()});
  refs.push_back({"mlp_w1", g.mlp_w1.data.data(), g.mlp_w1.size()});
  refs.push_back({"mlp_b1", g.mlp_b1.data(), g.mlp_b1.size()});
  refs.push_back({"mlp_w2", g.mlp_w2.data(), g.mlp_w2.size()});
  refs.push_back({"mlp_b2", &g.mlp_b2, 1});
  if (embeddings_trainable)
    refs.push_back({"embeddings", g.embeddings.data.data(), g.embeddings.size()});
  return refs;
}

}  // namespace

GradCheckResult grad_check(const ModelParams& p, const VariantConfig& variant, const EncodedQA& pos,
                           const EncodedQA& neg, double epsilon, std::size_t coords_per_tensor,
                           std::uint64_t seed, FaultInjection fault) {
  const TripleEval base = triple_loss(p, variant, pos, neg);
  if (!(base.delta > 0.0))
    throw std::invalid_argument("grad_check: probe triple must violate the margin (delta > 0)");
  Gradients analytic = backward(p, base, fault);

  ModelParams probe = p;
  auto param_refs = tensor_refs(probe);
  auto grad_refs = tensor_refs(analytic, p.embeddings_trainable);

  Rng rng(seed);
  GradCheckResult result;
  for (std::size_t t = 0; t < param_refs.size(); ++t) {
    const auto& pr = param_refs[t];
    std::vector<std::size_t> coords;
    if (pr.size <= coords_per_tensor) {
      coords.resize(pr.size);
      for (std::size_t i = 0; i < pr.size; ++i) coords[i] = i;
    } else {
      coords = rng.sample_without_replacement(pr.size, coords_per_tensor);
    }
    for (std::size_t c : coords) {
      const double saved = pr.data[c];
      pr.data[c] = saved + epsilon;
      const LD up = ld_hinge_loss(probe, variant, pos, neg);
      pr.data[c] = saved - epsilon;
      const LD down = ld_hinge_loss(probe, variant, pos, neg);
      pr.data[c] = saved;
      const double numeric = static_cast<double>((up - down) / (2.0L * static_cast<LD>(epsilon)));
      const double a = grad_refs[t].data[c];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_tensor = pr.name;
        result.worst_index = c;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace earnn
