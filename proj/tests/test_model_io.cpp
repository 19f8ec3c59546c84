#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "earnn/error.hpp"
#include "earnn/heatmap.hpp"
#include "earnn/model_io.hpp"
#include "earnn/rng.hpp"
#include "helpers.hpp"

using namespace earnn;

namespace {

ModelBundle toy_bundle(std::uint64_t seed) {
  ModelBundle b;
  b.vocab = testutil::toy_vocab(12);
  Dims dims;
  dims.embed = dims.hidden = 4;
  dims.relevance = 5;
  b.params = init_params(dims, init_embeddings(b.vocab, 4, seed + 1), seed);
  b.variant = VariantConfig::earnn();
  b.meta = {{"seed", seed}, {"note", "toy"}};
  return b;
}

}  // namespace

TEST_CASE("model save/load round trip is bit exact") {
  testutil::TempDir dir("model_io");
  const std::string path = dir.file("m.earnn");
  const ModelBundle original = toy_bundle(31);
  save_model(path, original);
  const ModelBundle loaded = load_model(path);

  CHECK(loaded.variant.name() == original.variant.name());
  CHECK(loaded.vocab.index_to_word == original.vocab.index_to_word);
  CHECK(loaded.params.h_decay == original.params.h_decay);
  CHECK(loaded.params.margin == original.params.margin);
  CHECK(loaded.params.lstm_q.w_input.data == original.params.lstm_q.w_input.data);
  CHECK(loaded.params.lstm_a.w_candidate.data == original.params.lstm_a.w_candidate.data);
  CHECK(loaded.params.bilinear_w.data == original.params.bilinear_w.data);
  CHECK(loaded.params.mlp_w1.data == original.params.mlp_w1.data);
  CHECK(loaded.params.mlp_b1 == original.params.mlp_b1);
  CHECK(loaded.params.mlp_w2 == original.params.mlp_w2);
  CHECK(loaded.params.mlp_b2 == original.params.mlp_b2);
  CHECK(loaded.params.embeddings.vectors.data == original.params.embeddings.vectors.data);
  CHECK(loaded.meta.at("note") == "toy");

  // scores on a probe set are bitwise identical
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const EncodedQA instance = testutil::random_instance(rng, 12);
    const ForwardTrace a = forward(original.params, original.variant, instance);
    const ForwardTrace b = forward(loaded.params, loaded.variant, instance);
    CHECK(a.rank_score == b.rank_score);
    CHECK(a.match_score == b.match_score);
  }
}

TEST_CASE("identical bundles serialize to byte-identical files") {
  testutil::TempDir dir("model_det");
  save_model(dir.file("a.earnn"), toy_bundle(7));
  save_model(dir.file("b.earnn"), toy_bundle(7));
  CHECK(testutil::read_file(dir.file("a.earnn")) == testutil::read_file(dir.file("b.earnn")));
  save_model(dir.file("c.earnn"), toy_bundle(8));
  CHECK(testutil::read_file(dir.file("a.earnn")) != testutil::read_file(dir.file("c.earnn")));
}

TEST_CASE("loader rejects garbage and truncated files") {
  testutil::TempDir dir("model_bad");
  testutil::write_file(dir.file("junk.earnn"), "not a model at all");
  CHECK_THROWS_AS(load_model(dir.file("junk.earnn")), ParseError);

  const std::string path = dir.file("trunc.earnn");
  save_model(path, toy_bundle(3));
  const std::string full = testutil::read_file(path);
  testutil::write_file(path, full.substr(0, full.size() / 2));
  CHECK_THROWS_AS(load_model(path), ParseError);
  CHECK_THROWS_AS(load_model(dir.file("missing.earnn")), IoError);
}

TEST_CASE("quantile buckets spread scores and collapse ties") {
  const auto spread = quantile_buckets({0.1, 0.4, 0.2, 0.9}, 4);
  CHECK(spread == std::vector<int>{0, 2, 1, 3});
  const auto uniform = quantile_buckets({0.5, 0.5, 0.5}, 5);
  CHECK(uniform == std::vector<int>{0, 0, 0});
  CHECK_THROWS_AS(quantile_buckets({0.5}, 0), std::invalid_argument);
}

TEST_CASE("heatmap embeds exact scores and respects the variant") {
  SynthSpec spec;
  spec.n_questions = 1;
  spec.answers_per_question = 2;
  spec.vocab_size = 40;
  spec.seed = 9;
  const Corpus corpus = synth_corpus(spec).corpus;
  const Question& q = corpus.questions.begin()->second;
  const auto& answers = corpus.answers.begin()->second;
  const std::int64_t t0 = answers.front().timestamp;

  ModelBundle bundle;
  bundle.vocab = build_vocab(corpus, 1);
  Dims dims;
  dims.embed = dims.hidden = dims.relevance = 4;
  bundle.params = init_params(dims, init_embeddings(bundle.vocab, 4, 2), 3);
  bundle.variant = VariantConfig::earnn();

  const std::string html = render_heatmap_html(bundle, q, {answers.begin(), answers.end()}, t0);
  CHECK(html.find("<!DOCTYPE html>") == 0);
  CHECK(html.find("attention-scores") != std::string::npos);

  // embedded JSON equals the trace to full precision
  const auto start = html.find("<script type=\"application/json\" id=\"attention-scores\">");
  REQUIRE(start != std::string::npos);
  const auto open = html.find('\n', start) + 1;
  const auto close = html.find("</script>", open);
  const auto payload = nlohmann::json::parse(html.substr(open, close - open));
  REQUIRE(payload.at("pairs").size() == 2);

  const EncodedQA instance = encode_instance(bundle.vocab, q, answers[0], t0);
  const ForwardTrace trace = forward(bundle.params, bundle.variant, instance);
  const auto& pair = payload.at("pairs")[0];
  CHECK(pair.at("match_score").get<double>() == trace.match_score);
  CHECK(pair.at("rank_score").get<double>() == trace.rank_score);
  const auto beta = pair.at("question_word_scores").get<std::vector<double>>();
  REQUIRE(beta.size() == trace.question_attn.weights.size());
  for (std::size_t i = 0; i < beta.size(); ++i) CHECK(beta[i] == trace.question_attn.weights[i]);
  double sum = 0.0;
  for (double b : beta) sum += b;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

  // sentence-level model: no word scores, notice shown
  bundle.variant = VariantConfig::earnn_s();
  const std::string s_html = render_heatmap_html(bundle, q, {answers[0]}, t0);
  CHECK(s_html.find("word scores are unavailable") != std::string::npos);
  CHECK(s_html.find("question_word_scores") == std::string::npos);

  // rate flag controls the number of color levels in the stylesheet
  bundle.variant = VariantConfig::earnn();
  HeatmapOptions opt;
  opt.rates = 7;
  const std::string r_html = render_heatmap_html(bundle, q, {answers[0]}, t0, opt);
  for (int r = 0; r < 7; ++r)
    CHECK(r_html.find(".w.r" + std::to_string(r) + "{") != std::string::npos);
  CHECK(r_html.find(".w.r7{") == std::string::npos);
}
