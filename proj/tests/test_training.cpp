#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "earnn/corpus.hpp"
#include "earnn/embedding.hpp"
#include "earnn/metrics.hpp"
#include "earnn/training.hpp"
#include "helpers.hpp"

using namespace earnn;

namespace {

// Probe pair guaranteed to violate the margin: arms are swapped when needed,
// which flips delta to 2m - delta >= m.
std::pair<EncodedQA, EncodedQA> violating_probe(const ModelParams& p, const VariantConfig& variant,
                                                Rng& rng, int vocab_words) {
  const EncodedQA a = testutil::random_instance(rng, vocab_words);
  const EncodedQA b = testutil::random_instance(rng, vocab_words);
  const TripleEval eval = triple_loss(p, variant, a, b);
  if (eval.delta > 1e-3) return {a, b};
  return {b, a};
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
  return a.lstm_q.w_input.data == b.lstm_q.w_input.data &&
         a.lstm_q.w_candidate.data == b.lstm_q.w_candidate.data &&
         a.lstm_a.w_input.data == b.lstm_a.w_input.data && a.bilinear_w.data == b.bilinear_w.data &&
         a.mlp_w1.data == b.mlp_w1.data && a.mlp_b1 == b.mlp_b1 && a.mlp_w2 == b.mlp_w2 &&
         a.mlp_b2 == b.mlp_b2 && a.embeddings.vectors.data == b.embeddings.vectors.data;
}

}  // namespace

TEST_CASE("init_params: Glorot bounds per matrix, zero biases, deterministic") {
  Dims dims;
  dims.embed = dims.hidden = 50;
  dims.relevance = 50;
  const auto vocab = testutil::toy_vocab(20);
  ModelParams p = init_params(dims, init_embeddings(vocab, 50, 1), 42);

  // gate matrices are 50 x 100: bound sqrt(6/150) ~ 0.2
  const double gate_bound = std::sqrt(6.0 / 150.0);
  CHECK(gate_bound == doctest::Approx(0.2).epsilon(0.01));
  double max_abs = 0.0;
  for (double x : p.lstm_q.w_input.data) max_abs = std::max(max_abs, std::abs(x));
  CHECK(max_abs <= gate_bound);
  CHECK(max_abs > 0.5 * gate_bound);  // the draw actually fills the range

  const double w1_bound = std::sqrt(6.0 / (50.0 + 100.0));
  for (double x : p.mlp_w1.data) CHECK(std::abs(x) <= w1_bound);
  for (double b : p.mlp_b1) CHECK(b == 0.0);
  CHECK(p.mlp_b2 == 0.0);

  ModelParams q = init_params(dims, init_embeddings(vocab, 50, 1), 42);
  CHECK(params_equal(p, q));
}

TEST_CASE("triple_loss hinge arithmetic") {
  // engineered scores via a direct check of the formula on real forwards
  ModelParams p = testutil::tiny_params(3, 10, 7);
  Rng rng(1);
  const EncodedQA pos = testutil::random_instance(rng, 10);
  const EncodedQA neg = testutil::random_instance(rng, 10);
  const VariantConfig variant = VariantConfig::earnn();

  const double s_pos = forward(p, variant, pos).rank_score;
  const double s_neg = forward(p, variant, neg).rank_score;
  const TripleEval eval = triple_loss(p, variant, pos, neg);
  CHECK(eval.delta == doctest::Approx(p.margin + s_neg - s_pos).epsilon(1e-15));
  CHECK(eval.loss == std::max(0.0, eval.delta));

  // margin zero and a winning positive arm: zero loss
  ModelParams zero_margin = p;
  zero_margin.margin = 0.0;
  const auto [win, lose] = s_pos > s_neg ? std::pair{pos, neg} : std::pair{neg, pos};
  CHECK(triple_loss(zero_margin, variant, win, lose).loss == 0.0);

  // equal arms lose exactly the margin
  CHECK(triple_loss(p, variant, pos, pos).loss == doctest::Approx(p.margin).epsilon(1e-15));
}

TEST_CASE("backward rejects non-violating triples") {
  ModelParams p = testutil::tiny_params(3, 10, 3);
  Rng rng(2);
  const EncodedQA a = testutil::random_instance(rng, 10);
  TripleEval eval = triple_loss(p, VariantConfig::earnn_w(), a, a);
  eval.delta = -0.5;
  CHECK_THROWS_AS(backward(p, eval), std::logic_error);
}

TEST_CASE("sgd_step arithmetic and fixed points") {
  ModelParams p = testutil::tiny_params(2, 5, 9);
  const ModelParams before = p;

  Gradients zero = Gradients::zeros_like(p);
  sgd_step(p, zero, 0.5);
  CHECK(params_equal(p, before));

  Gradients g = Gradients::zeros_like(p);
  g.mlp_b2 = 2.0;
  g.mlp_w1(0, 0) = 1.0;
  sgd_step(p, g, 0.0);  // zero rate
  CHECK(params_equal(p, before));

  p.mlp_b2 = 1.0;
  sgd_step(p, g, 0.1);
  CHECK(p.mlp_b2 == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(p.mlp_w1(0, 0) == doctest::Approx(before.mlp_w1(0, 0) - 0.1).epsilon(1e-15));
}

TEST_CASE("gradient check passes for every variant") {
  Rng rng(2718);
  for (const auto& variant : {VariantConfig::earnn(), VariantConfig::earnn_w(), VariantConfig::earnn_s()}) {
    for (int trial = 0; trial < 3; ++trial) {
      ModelParams p = testutil::tiny_params(4, 9, 600 + trial);
      const auto [pos, neg] = violating_probe(p, variant, rng, 9);
      const GradCheckResult r = grad_check(p, variant, pos, neg, 1e-5, 200, 77);
      INFO("variant ", variant.name(), " trial ", trial, " worst ", r.worst_tensor, "[", r.worst_index,
           "] analytic ", r.analytic, " numeric ", r.numeric);
      CHECK(r.max_rel_error <= 1e-4);
    }
  }
}

TEST_CASE("gradient check covers frozen embeddings correctly") {
  Rng rng(555);
  ModelParams p = testutil::tiny_params(4, 9, 13);
  p.embeddings_trainable = false;
  const auto [pos, neg] = violating_probe(p, VariantConfig::earnn(), rng, 9);
  const GradCheckResult r = grad_check(p, VariantConfig::earnn(), pos, neg, 1e-5, 200, 78);
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("fault injection is caught by the gradient check") {
  Rng rng(31415);
  ModelParams p = testutil::tiny_params(4, 9, 21);
  const auto [pos, neg] = violating_probe(p, VariantConfig::earnn(), rng, 9);
  const GradCheckResult r =
      grad_check(p, VariantConfig::earnn(), pos, neg, 1e-5, 200, 79, FaultInjection::tanh_derivative);
  CHECK(r.max_rel_error >= 1e-1);
}

TEST_CASE("skip rule leaves parameters bit-identical") {
  SynthSpec spec;
  spec.n_questions = 3;
  spec.answers_per_question = 4;
  spec.vocab_size = 60;
  spec.seed = 17;
  const Corpus corpus = synth_corpus(spec).corpus;
  const Vocabulary vocab = build_vocab(corpus, 1);

  // A margin of zero makes every correctly-ordered triple a skip.
  TrainConfig config;
  config.variant = VariantConfig::earnn_w();
  config.margin = 0.0;
  config.dropout = 0.0;
  config.epochs = 1;
  config.seed = 4;

  Dims dims;
  dims.embed = dims.hidden = dims.relevance = 4;
  ModelParams initial = init_params(dims, init_embeddings(vocab, 4, 2), 3);
  const ModelParams snapshot = initial;

  // pick triples the model already orders correctly
  const auto all = build_triples(corpus, {TripleStrategy::all_ordered_pairs, 10, 0, 0});
  std::vector<Triple> skippable;
  std::unordered_map<std::string, EncodedQA> enc;
  for (const auto& [qid, list] : corpus.answers) {
    const std::int64_t t0 = list.front().timestamp;
    for (const Answer& a : list)
      enc.emplace(a.id, encode_instance(vocab, corpus.questions.at(qid), a, t0));
  }
  for (const Triple& t : all) {
    ModelParams probe = initial;
    probe.margin = 0.0;
    if (triple_loss(probe, config.variant, enc.at(t.pos_answer_id), enc.at(t.neg_answer_id)).delta <= 0.0)
      skippable.push_back(t);
  }
  REQUIRE(!skippable.empty());

  const TrainResult result = train(corpus, skippable, vocab, std::move(initial), config);
  CHECK(params_equal(result.params, snapshot));
  CHECK(result.log.front().skipped == static_cast<int>(skippable.size()));
}

TEST_CASE("one small step on a violating triple decreases its loss") {
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    ModelParams p = testutil::tiny_params(4, 8, 800 + trial);
    const VariantConfig variant = trial % 2 ? VariantConfig::earnn() : VariantConfig::earnn_s();
    const auto [pos, neg] = violating_probe(p, variant, rng, 8);
    const TripleEval before = triple_loss(p, variant, pos, neg);
    REQUIRE(before.delta > 0.0);
    const Gradients g = backward(p, before);
    sgd_step(p, g, 1e-4);
    const TripleEval after = triple_loss(p, variant, pos, neg);
    CHECK(after.loss < before.loss);
  }
}

TEST_CASE("doubling the margin never decreases a triple's loss") {
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    ModelParams p = testutil::tiny_params(3, 8, 300 + trial);
    const EncodedQA pos = testutil::random_instance(rng, 8);
    const EncodedQA neg = testutil::random_instance(rng, 8);
    const double base = triple_loss(p, VariantConfig::earnn(), pos, neg).loss;
    p.margin *= 2.0;
    CHECK(triple_loss(p, VariantConfig::earnn(), pos, neg).loss >= base);
  }
}

TEST_CASE("decay at the first-answer timestamp leaves gradients unchanged") {
  Rng rng(7);
  ModelParams p = testutil::tiny_params(4, 9, 55);
  EncodedQA pos = testutil::random_instance(rng, 9);
  EncodedQA neg = testutil::random_instance(rng, 9);
  pos.answer_time = pos.first_answer_time;
  neg.answer_time = neg.first_answer_time;

  auto grads_for = [&](const VariantConfig& variant) {
    TripleEval eval = triple_loss(p, variant, pos, neg);
    if (eval.delta <= 0.0) {
      std::swap(pos, neg);
      eval = triple_loss(p, variant, pos, neg);
    }
    REQUIRE(eval.delta > 0.0);
    return backward(p, eval);
  };
  const Gradients with_decay = grads_for(VariantConfig::earnn());
  const Gradients without = grads_for(VariantConfig::earnn_w());
  CHECK(with_decay.mlp_b2 == without.mlp_b2);
  CHECK(with_decay.bilinear_w.data == without.bilinear_w.data);
  CHECK(with_decay.lstm_q.w_input.data == without.lstm_q.w_input.data);
  CHECK(with_decay.embeddings.data == without.embeddings.data);
}

TEST_CASE("zero epochs returns the initialization") {
  SynthSpec spec;
  spec.n_questions = 2;
  spec.answers_per_question = 3;
  spec.vocab_size = 40;
  spec.seed = 6;
  const Corpus corpus = synth_corpus(spec).corpus;
  const Vocabulary vocab = build_vocab(corpus, 1);
  const auto triples = build_triples(corpus, {TripleStrategy::all_ordered_pairs, 10, 0, 0});
  REQUIRE(!triples.empty());

  Dims dims;
  dims.embed = dims.hidden = dims.relevance = 3;
  ModelParams initial = init_params(dims, init_embeddings(vocab, 3, 1), 2);
  const ModelParams snapshot = initial;
  TrainConfig config;
  config.epochs = 0;
  const TrainResult result = train(corpus, triples, vocab, std::move(initial), config);
  CHECK(params_equal(result.params, snapshot));
  CHECK(result.log.empty());
}

TEST_CASE("a single separable triple is learned to zero loss and then skipped") {
  SynthSpec spec;
  spec.n_questions = 1;
  spec.answers_per_question = 3;
  spec.vocab_size = 30;
  spec.seed = 10;
  const Corpus corpus = synth_corpus(spec).corpus;
  const Vocabulary vocab = build_vocab(corpus, 1);
  auto triples = build_triples(corpus, {TripleStrategy::all_ordered_pairs, 10, 0, 0});
  REQUIRE(!triples.empty());
  triples.resize(1);

  TrainConfig config;
  config.variant = VariantConfig::earnn_w();
  config.epochs = 400;
  config.learning_rate = 0.2;
  config.dropout = 0.0;
  config.seed = 3;

  Dims dims;
  dims.embed = dims.hidden = dims.relevance = 4;
  ModelParams initial = init_params(dims, init_embeddings(vocab, 4, 8), 5);
  const TrainResult result = train(corpus, triples, vocab, std::move(initial), config);
  CHECK(result.log.back().mean_loss == 0.0);
  CHECK(result.log.back().skipped == 1);
}

TEST_CASE("training is deterministic for a fixed seed") {
  SynthSpec spec;
  spec.n_questions = 3;
  spec.answers_per_question = 4;
  spec.vocab_size = 50;
  spec.seed = 12;
  const Corpus corpus = synth_corpus(spec).corpus;
  const Vocabulary vocab = build_vocab(corpus, 1);
  const auto triples = build_triples(corpus, {TripleStrategy::all_ordered_pairs, 10, 0, 0});

  TrainConfig config;
  config.variant = VariantConfig::earnn();
  config.epochs = 3;
  config.dropout = 0.2;
  config.seed = 19;

  Dims dims;
  dims.embed = dims.hidden = dims.relevance = 4;
  auto run = [&] {
    ModelParams initial = init_params(dims, init_embeddings(vocab, 4, 2), 6);
    return train(corpus, triples, vocab, std::move(initial), config);
  };
  const TrainResult a = run();
  const TrainResult b = run();
  CHECK(params_equal(a.params, b.params));
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].mean_loss == b.log[i].mean_loss);
    CHECK(a.log[i].skipped == b.log[i].skipped);
  }
}
