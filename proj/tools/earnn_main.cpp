// Command line front end: corpus ingestion, synthetic data, training,
// evaluation, ranking, attention visualization and gradient verification.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "earnn/corpus.hpp"
#include "earnn/embedding.hpp"
#include "earnn/error.hpp"
#include "earnn/heatmap.hpp"
#include "earnn/metrics.hpp"
#include "earnn/model_io.hpp"
#include "earnn/rng.hpp"
#include "earnn/training.hpp"
#include "json.hpp"

using nlohmann::json;
using namespace earnn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerification = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

std::uint64_t env_seed() {
  if (const char* s = std::getenv("EARNN_SEED")) {
    try {
      return std::stoull(s);
    } catch (...) {
      throw std::invalid_argument("EARNN_SEED is not a valid unsigned integer");
    }
  }
  return 0;
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("config file " + path + ": " + e.what());
  }
}

// flags > config file > built-in default
template <class T>
void cfg_override(const CLI::App* cmd, const std::string& flag, const json& cfg, const char* key,
                  T& value) {
  if (cmd->count(flag) == 0 && cfg.contains(key)) value = cfg.at(key).get<T>();
}

double mean_or_zero(double sum, std::size_t n) { return n ? sum / static_cast<double>(n) : 0.0; }

void print_corpus_stats(std::ostream& out, const Corpus& corpus) {
  std::size_t n_answers = 0, q_words = 0, a_words = 0, a_sentences = 0, topics = 0;
  for (const auto& [qid, q] : corpus.questions) {
    q_words += q.word_count();
    topics += q.topics.size();
  }
  for (const auto& [qid, list] : corpus.answers) {
    n_answers += list.size();
    for (const Answer& a : list) {
      a_words += a.word_count();
      a_sentences += a.sentences.size();
    }
  }
  const auto triples = build_triples(corpus, {TripleStrategy::good_vs_bad, 10, 0, 0});
  const std::size_t nq = corpus.questions.size();
  out << "Total number of questions                 " << nq << "\n"
      << "Total number of answers                   " << n_answers << "\n"
      << "Average number of answers per question    " << mean_or_zero(static_cast<double>(n_answers), nq) << "\n"
      << "Average number of words per question      " << mean_or_zero(static_cast<double>(q_words), nq) << "\n"
      << "Average number of words per answer        " << mean_or_zero(static_cast<double>(a_words), n_answers) << "\n"
      << "Average number of sentences per answer    " << mean_or_zero(static_cast<double>(a_sentences), n_answers) << "\n"
      << "Average number of topics per question     " << mean_or_zero(static_cast<double>(topics), nq) << "\n"
      << "Average number of triples per question    " << mean_or_zero(static_cast<double>(triples.size()), nq) << "\n";
}

TripleStrategy parse_strategy(const std::string& name) {
  if (name == "good_vs_bad") return TripleStrategy::good_vs_bad;
  if (name == "all_ordered_pairs") return TripleStrategy::all_ordered_pairs;
  if (name == "sampled") return TripleStrategy::sampled;
  throw std::invalid_argument("unknown triple strategy '" + name + "'");
}

// warns when a large share of corpus tokens falls back to OOV
void warn_on_vocab_mismatch(const Vocabulary& vocab, const Corpus& corpus) {
  std::size_t total = 0, oov = 0;
  auto scan = [&](const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) {
      ++total;
      if (vocab.lookup(t) == vocab.oov_index) ++oov;
    }
  };
  for (const auto& [qid, q] : corpus.questions) {
    scan(q.tokens);
    for (const auto& phrase : q.topics) scan(phrase);
  }
  for (const auto& [qid, list] : corpus.answers)
    for (const Answer& a : list)
      for (const auto& s : a.sentences) scan(s);
  if (total > 0 && static_cast<double>(oov) / static_cast<double>(total) > 0.3)
    std::cerr << "warning: " << oov << "/" << total
              << " corpus tokens are out of the model vocabulary; scores degrade to OOV lookups\n";
}

// ---- subcommand actions ----------------------------------------------------

struct SynthArgs {
  std::string output;
  SynthSpec spec;
};

int run_synth(const SynthArgs& a) {
  const SynthResult result = synth_corpus(a.spec);
  save_corpus(result.corpus, a.output);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0, sum = 0.0;
  for (const auto& [aid, v] : result.planted_value) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
  }
  std::cout << "wrote " << result.corpus.questions.size() << " questions, "
            << result.corpus.answer_count() << " answers to " << a.output << "\n"
            << "planted value: min " << lo << ", mean "
            << mean_or_zero(sum, result.planted_value.size()) << ", max " << hi << "\n"
            << "relevant words: " << result.relevant_words.size() << "\n";
  return kExitOk;
}

struct IngestArgs {
  std::string input, output;
  FilterConfig filter;
  bool allow_missing_topics = false;
};

int run_ingest(const IngestArgs& a) {
  Corpus corpus = load_corpus(a.input);
  FilterConfig filter = a.filter;
  filter.require_topics = !a.allow_missing_topics;
  const Corpus filtered = filter_corpus(corpus, filter);
  save_corpus(filtered, a.output);
  print_corpus_stats(std::cout, filtered);
  return kExitOk;
}

struct TrainArgs {
  std::string corpus_path, model_out, log_out, config_path, embeddings_path;
  std::string variant = "earnn";
  std::string strategy = "good_vs_bad";
  std::size_t sample_k = 0;
  int dim = 50;
  int relevance = 50;
  int min_count = 5;
  bool freeze_embeddings = false;
  bool no_shuffle = false;
  TrainConfig config;
};

int run_train(TrainArgs& a, const CLI::App* cmd) {
  const json cfg = load_config_file(a.config_path);
  cfg_override(cmd, "--epochs", cfg, "epochs", a.config.epochs);
  cfg_override(cmd, "--lr", cfg, "lr", a.config.learning_rate);
  cfg_override(cmd, "--margin", cfg, "margin", a.config.margin);
  cfg_override(cmd, "--h-decay", cfg, "h_decay", a.config.h_decay);
  cfg_override(cmd, "--dropout", cfg, "dropout", a.config.dropout);
  cfg_override(cmd, "--seed", cfg, "seed", a.config.seed);
  cfg_override(cmd, "--dim", cfg, "dim", a.dim);
  cfg_override(cmd, "--relevance-dim", cfg, "relevance_dim", a.relevance);
  cfg_override(cmd, "--min-count", cfg, "min_count", a.min_count);
  cfg_override(cmd, "--variant", cfg, "variant", a.variant);
  cfg_override(cmd, "--triples", cfg, "triples", a.strategy);
  cfg_override(cmd, "--good-threshold", cfg, "good_threshold", a.config.good_threshold);

  a.config.variant = VariantConfig::parse(a.variant);
  a.config.shuffle = !a.no_shuffle;

  const Corpus corpus = load_corpus(a.corpus_path);
  if (corpus.questions.empty()) throw std::runtime_error("training corpus is empty");

  TripleOptions topt;
  topt.strategy = parse_strategy(a.strategy);
  topt.good_threshold = a.config.good_threshold;
  topt.sample_k = a.sample_k;
  topt.seed = a.config.seed;
  const auto triples = build_triples(corpus, topt);
  if (triples.empty()) throw std::runtime_error("no training triples could be built from the corpus");

  const Vocabulary vocab = build_vocab(corpus, a.min_count);
  EmbeddingTable table = a.embeddings_path.empty()
                             ? init_embeddings(vocab, a.dim, a.config.seed)
                             : load_embeddings(vocab, a.embeddings_path, a.config.seed);
  if (table.dim() != a.dim)
    throw std::runtime_error("embedding file dimension " + std::to_string(table.dim()) +
                             " does not match --dim " + std::to_string(a.dim));

  Dims dims;
  dims.embed = dims.hidden = a.dim;
  dims.relevance = a.relevance;
  ModelParams params = init_params(dims, std::move(table), a.config.seed, a.config.h_decay, a.config.margin);
  params.embeddings_trainable = !a.freeze_embeddings;

  std::cout << "training " << a.config.variant.name() << " on " << corpus.questions.size()
            << " questions, " << triples.size() << " triples\n";
  const std::string log_path = a.log_out.empty() ? a.model_out + ".log.jsonl" : a.log_out;
  std::ofstream log(log_path);
  if (!log) throw IoError("cannot write training log: " + log_path);

  const TrainResult result =
      train(corpus, triples, vocab, std::move(params), a.config, [&](const EpochStats& s) {
        const json line = {{"epoch", s.epoch},         {"mean_loss", s.mean_loss},
                           {"skipped", s.skipped},     {"train_map", s.train_map},
                           {"train_doa", s.train_doa}};
        log << line.dump() << '\n';
        std::cout << "epoch " << s.epoch << "  loss " << s.mean_loss << "  skipped " << s.skipped
                  << "  map " << s.train_map << "  doa " << s.train_doa << "\n";
        return true;
      });

  ModelBundle bundle;
  bundle.params = result.params;
  bundle.variant = a.config.variant;
  bundle.vocab = vocab;
  bundle.meta = {{"variant", a.variant},
                 {"epochs", a.config.epochs},
                 {"lr", a.config.learning_rate},
                 {"margin", a.config.margin},
                 {"h_decay", a.config.h_decay},
                 {"dropout", a.config.dropout},
                 {"seed", a.config.seed},
                 {"dim", a.dim},
                 {"relevance_dim", a.relevance},
                 {"min_count", a.min_count},
                 {"triples", a.strategy},
                 {"good_threshold", a.config.good_threshold},
                 {"freeze_embeddings", a.freeze_embeddings}};
  save_model(a.model_out, bundle);
  std::cout << "model written to " << a.model_out << ", log to " << log_path << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string model_path, corpus_path, task;
  std::string json_out, csv_out, sweep;
  std::string config_path;
  EvalOptions options;
};

int run_eval(EvalArgs& a, const CLI::App* cmd) {
  const json cfg = load_config_file(a.config_path);
  cfg_override(cmd, "--good-threshold", cfg, "good_threshold", a.options.good_threshold);
  if (a.task != "selection" && a.task != "ranking")
    throw std::invalid_argument("--task must be selection or ranking");

  const ModelBundle bundle = load_model(a.model_path);
  const Corpus corpus = load_corpus(a.corpus_path);
  warn_on_vocab_mismatch(bundle.vocab, corpus);

  if (!a.sweep.empty()) {
    const auto sep = a.sweep.find("..");
    if (sep == std::string::npos)
      throw std::invalid_argument("--sweep-H expects a range like 1e5..1e9");
    const double lo = std::stod(a.sweep.substr(0, sep));
    const double hi = std::stod(a.sweep.substr(sep + 2));
    if (!(lo > 0) || hi < lo) throw std::invalid_argument("--sweep-H range is invalid");
    std::cout << "H";
    const char* names_sel[] = {"P@5", "P@10", "MAP", "MRR"};
    const char* names_rank[] = {"NDCG@1", "NDCG@5", "NDCG@10", "DOA"};
    for (const char* n : (a.task == "selection" ? names_sel : names_rank)) std::cout << '\t' << n;
    std::cout << '\n';
    for (double h = lo; h <= hi * 1.0000001; h *= 10.0) {
      EvalOptions opt = a.options;
      opt.h_decay_override = h;
      const EvalReport r = evaluate(bundle.params, bundle.variant, bundle.vocab, corpus, opt);
      std::cout << h;
      if (a.task == "selection")
        std::cout << '\t' << r.p_at_5 << '\t' << r.p_at_10 << '\t' << r.map << '\t' << r.mrr;
      else
        std::cout << '\t' << r.ndcg_at_1 << '\t' << r.ndcg_at_5 << '\t' << r.ndcg_at_10 << '\t' << r.doa;
      std::cout << '\n';
    }
    return kExitOk;
  }

  const EvalReport report = evaluate(bundle.params, bundle.variant, bundle.vocab, corpus, a.options);
  if (a.task == "selection") {
    std::cout << "P@5     " << report.p_at_5 << "\nP@10    " << report.p_at_10 << "\nMAP     "
              << report.map << "\nMRR     " << report.mrr << "\n";
  } else {
    std::cout << "NDCG@1  " << report.ndcg_at_1 << "\nNDCG@5  " << report.ndcg_at_5 << "\nNDCG@10 "
              << report.ndcg_at_10 << "\nDOA     " << report.doa << "\n";
  }
  if (!a.json_out.empty()) {
    std::ofstream out(a.json_out);
    if (!out) throw IoError("cannot write report: " + a.json_out);
    out << report.to_json(a.task).dump(2) << '\n';
  }
  if (!a.csv_out.empty()) {
    std::ofstream out(a.csv_out);
    if (!out) throw IoError("cannot write report: " + a.csv_out);
    out << report.to_csv(a.task);
  }
  return kExitOk;
}

struct RankArgs {
  std::string model_path, input_path;
  bool no_decay = false;
};

int run_rank(const RankArgs& a) {
  const ModelBundle bundle = load_model(a.model_path);
  const Corpus corpus = load_corpus(a.input_path);
  if (corpus.questions.size() != 1)
    throw std::invalid_argument("rank expects exactly one question in the input file");
  const Question& q = corpus.questions.begin()->second;
  const auto& answers = corpus.answers.begin()->second;
  if (answers.empty()) throw std::invalid_argument("rank input has no answers");
  const std::int64_t t0 = answers.front().timestamp;

  VariantConfig variant = bundle.variant;
  if (a.no_decay) variant.use_time_decay = false;

  std::vector<RankedEntry> scored;
  for (const Answer& ans : answers) {
    const EncodedQA instance = encode_instance(bundle.vocab, q, ans, t0);
    const ForwardTrace trace = forward(bundle.params, variant, instance);
    scored.push_back({ans.id, trace.rank_score, 0, 0.0, 0.0});
  }
  const RankedList ranked = RankedList::from_scored(std::move(scored));
  for (const auto& e : ranked.entries) std::cout << e.id << '\t' << e.score << '\n';
  return kExitOk;
}

struct VisualizeArgs {
  std::string model_path, corpus_path, question_id, output;
  std::vector<std::string> answer_ids;
  int rates = 5;
};

int run_visualize(const VisualizeArgs& a) {
  const ModelBundle bundle = load_model(a.model_path);
  const Corpus corpus = load_corpus(a.corpus_path);
  const auto qit = corpus.questions.find(a.question_id);
  if (qit == corpus.questions.end())
    throw std::invalid_argument("question '" + a.question_id + "' not found in the corpus");
  const auto& all = corpus.answers.at(a.question_id);
  if (all.empty()) throw std::invalid_argument("question '" + a.question_id + "' has no answers");

  std::vector<Answer> selected;
  if (a.answer_ids.empty()) {
    selected.assign(all.begin(), all.end());
  } else {
    for (const std::string& id : a.answer_ids) {
      const auto it = std::find_if(all.begin(), all.end(), [&](const Answer& x) { return x.id == id; });
      if (it == all.end()) throw std::invalid_argument("answer '" + id + "' not found for the question");
      selected.push_back(*it);
    }
  }

  HeatmapOptions opt;
  opt.rates = a.rates;
  const std::string html =
      render_heatmap_html(bundle, qit->second, selected, all.front().timestamp, opt);
  std::ofstream out(a.output);
  if (!out) throw IoError("cannot write heatmap: " + a.output);
  out << html;
  std::cout << "heatmap for " << selected.size() << " answer(s) written to " << a.output << "\n";
  return kExitOk;
}

struct GradCheckArgs {
  std::string variant = "all";
  std::string fault = "none";
  std::string config_path;
  double epsilon = 1e-5;
  std::size_t coords = 200;
  std::uint64_t seed = 0;
};

int run_gradcheck(GradCheckArgs& a, const CLI::App* cmd) {
  const json cfg = load_config_file(a.config_path);
  cfg_override(cmd, "--eps", cfg, "eps", a.epsilon);
  cfg_override(cmd, "--coords", cfg, "coords", a.coords);
  cfg_override(cmd, "--seed", cfg, "seed", a.seed);

  FaultInjection fault;
  if (a.fault == "none") fault = FaultInjection::none;
  else if (a.fault == "tanh-deriv") fault = FaultInjection::tanh_derivative;
  else throw std::invalid_argument("--inject-fault must be none or tanh-deriv");

  std::vector<VariantConfig> variants;
  if (a.variant == "all")
    variants = {VariantConfig::earnn(), VariantConfig::earnn_w(), VariantConfig::earnn_s()};
  else
    variants = {VariantConfig::parse(a.variant)};

  // self-contained tiny probe: embed = hidden = 4, short sequences
  const int vocab_words = 9;
  Vocabulary vocab;
  for (int i = 0; i < vocab_words; ++i) {
    vocab.word_to_index.emplace("w" + std::to_string(i), i);
    vocab.index_to_word.push_back("w" + std::to_string(i));
  }
  vocab.oov_index = vocab_words;
  vocab.index_to_word.push_back("<oov>");

  bool all_pass = true;
  Rng rng(a.seed + 2718);
  for (const auto& variant : variants) {
    Dims dims;
    dims.embed = dims.hidden = dims.relevance = 4;
    ModelParams params = init_params(dims, init_embeddings(vocab, 4, a.seed + 1), a.seed + 7);

    auto draw_instance = [&] {
      auto ids = [&](int n) {
        std::vector<int> out;
        for (int i = 0; i < n; ++i) out.push_back(static_cast<int>(rng.index(vocab_words)));
        return out;
      };
      EncodedQA e;
      e.question = ids(1 + static_cast<int>(rng.index(3)));
      const int m = 1 + static_cast<int>(rng.index(3));
      for (int j = 0; j < m; ++j) e.sentences.push_back(ids(1 + static_cast<int>(rng.index(3))));
      e.topics = {ids(1 + static_cast<int>(rng.index(2)))};
      e.first_answer_time = 1'000'000;
      e.answer_time = e.first_answer_time + static_cast<std::int64_t>(rng.index(1'500'000));
      return e;
    };
    EncodedQA pos = draw_instance();
    EncodedQA neg = draw_instance();
    if (triple_loss(params, variant, pos, neg).delta <= 0.05) std::swap(pos, neg);

    const GradCheckResult r = grad_check(params, variant, pos, neg, a.epsilon, a.coords, a.seed + 13, fault);
    const bool pass = r.max_rel_error <= 1e-4;
    all_pass = all_pass && pass;
    std::cout << "variant " << variant.name() << ": max relative error " << r.max_rel_error
              << " at " << r.worst_tensor << "[" << r.worst_index << "] (analytic " << r.analytic
              << ", numeric " << r.numeric << ") " << (pass ? "PASS" : "FAIL") << "\n";
  }
  return all_pass ? kExitOk : kExitVerification;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EARNN answer value model: train, evaluate and inspect"};
  app.require_subcommand(1);

  std::uint64_t default_seed = 0;
  try {
    default_seed = env_seed();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  SynthArgs synth_args;
  if (default_seed) synth_args.spec.seed = default_seed;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus with planted answer values");
  synth_cmd->add_option("-o,--output", synth_args.output, "Output corpus JSONL")->required();
  synth_cmd->add_option("--questions", synth_args.spec.n_questions, "Number of questions");
  synth_cmd->add_option("--answers-per-question", synth_args.spec.answers_per_question, "Answers per question");
  synth_cmd->add_option("--vocab-size", synth_args.spec.vocab_size, "Vocabulary size");
  synth_cmd->add_option("--seed", synth_args.spec.seed, "Random seed");
  synth_cmd->add_option("--decay-horizon", synth_args.spec.decay_horizon, "Planted decay horizon (seconds)");

  IngestArgs ingest_args;
  auto* ingest_cmd = app.add_subcommand("ingest", "Load, filter and rewrite a corpus with statistics");
  ingest_cmd->add_option("-i,--input", ingest_args.input, "Input corpus JSONL")->required();
  ingest_cmd->add_option("-o,--output", ingest_args.output, "Filtered corpus JSONL")->required();
  ingest_cmd->add_option("--min-answers", ingest_args.filter.min_answers, "Keep questions with strictly more answers");
  ingest_cmd->add_option("--min-max-upvotes", ingest_args.filter.min_max_upvotes, "Keep questions whose top answer has strictly more upvotes");
  ingest_cmd->add_option("--min-words", ingest_args.filter.min_words, "Drop questions/answers with fewer words");
  ingest_cmd->add_flag("--allow-missing-topics", ingest_args.allow_missing_topics, "Keep questions without topics");
  ingest_cmd->add_option("--min-age-seconds", ingest_args.filter.min_age_seconds, "Drop records younger than this (0 disables)");
  ingest_cmd->add_option("--collect-time", ingest_args.filter.collect_time, "Reference time for the age filter");

  TrainArgs train_args;
  train_args.config.seed = default_seed;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a corpus");
  train_cmd->add_option("--corpus", train_args.corpus_path, "Training corpus JSONL")->required();
  train_cmd->add_option("--model-out", train_args.model_out, "Output model file")->required();
  train_cmd->add_option("--log-out", train_args.log_out, "Training log JSONL (default: <model>.log.jsonl)");
  train_cmd->add_option("--config", train_args.config_path, "JSON config file (flags take precedence)");
  train_cmd->add_option("--variant", train_args.variant, "earnn, earnn_w or earnn_s");
  train_cmd->add_option("--epochs", train_args.config.epochs, "Training epochs");
  train_cmd->add_option("--lr", train_args.config.learning_rate, "SGD learning rate");
  train_cmd->add_option("--margin", train_args.config.margin, "Hinge margin");
  train_cmd->add_option("--h-decay", train_args.config.h_decay, "Decay horizon H in seconds");
  train_cmd->add_option("--dropout", train_args.config.dropout, "Dropout probability on hidden states");
  train_cmd->add_option("--seed", train_args.config.seed, "Random seed");
  train_cmd->add_option("--dim", train_args.dim, "Embedding and hidden size");
  train_cmd->add_option("--relevance-dim", train_args.relevance, "Matching head hidden width");
  train_cmd->add_option("--min-count", train_args.min_count, "Vocabulary frequency cutoff");
  train_cmd->add_option("--triples", train_args.strategy, "good_vs_bad, all_ordered_pairs or sampled");
  train_cmd->add_option("--sample-k", train_args.sample_k, "Per-question cap for the sampled strategy");
  train_cmd->add_option("--good-threshold", train_args.config.good_threshold, "Upvotes strictly above this are good");
  train_cmd->add_option("--embeddings", train_args.embeddings_path, "Pretrained embedding text file");
  train_cmd->add_flag("--freeze-embeddings", train_args.freeze_embeddings, "Exclude embeddings from training");
  train_cmd->add_flag("--no-shuffle", train_args.no_shuffle, "Keep triple order fixed across epochs");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a corpus");
  eval_cmd->add_option("--model", eval_args.model_path, "Model file")->required();
  eval_cmd->add_option("--corpus", eval_args.corpus_path, "Evaluation corpus JSONL")->required();
  eval_cmd->add_option("--task", eval_args.task, "selection or ranking")->required();
  eval_cmd->add_option("--json", eval_args.json_out, "Write the full report as JSON");
  eval_cmd->add_option("--csv", eval_args.csv_out, "Write the headline metrics as CSV");
  eval_cmd->add_option("--sweep-H", eval_args.sweep, "Evaluate over a horizon range, e.g. 1e5..1e9");
  eval_cmd->add_option("--good-threshold", eval_args.options.good_threshold, "Upvotes strictly above this are good");
  eval_cmd->add_flag("--strict-doa", eval_args.options.strict_doa_ties, "Count only ground-truth-distinct pairs in the DOA denominator");
  eval_cmd->add_option("--config", eval_args.config_path, "JSON config file (flags take precedence)");

  RankArgs rank_args;
  auto* rank_cmd = app.add_subcommand("rank", "Rank the answers of one question");
  rank_cmd->add_option("--model", rank_args.model_path, "Model file")->required();
  rank_cmd->add_option("--input", rank_args.input_path, "JSONL with one question and its answers")->required();
  rank_cmd->add_flag("--no-decay", rank_args.no_decay, "Order by the match score, ignoring timestamps");

  VisualizeArgs vis_args;
  auto* vis_cmd = app.add_subcommand("visualize", "Render an attention heatmap HTML report");
  vis_cmd->add_option("--model", vis_args.model_path, "Model file")->required();
  vis_cmd->add_option("--corpus", vis_args.corpus_path, "Corpus JSONL")->required();
  vis_cmd->add_option("--question", vis_args.question_id, "Question id")->required();
  vis_cmd->add_option("--answers", vis_args.answer_ids, "Answer ids (default: all)")->delimiter(',');
  vis_cmd->add_option("-o,--output", vis_args.output, "Output HTML path")->required();
  vis_cmd->add_option("--rates", vis_args.rates, "Number of display buckets");

  GradCheckArgs grad_args;
  grad_args.seed = default_seed;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Verify analytic gradients with finite differences");
  grad_cmd->add_option("--variant", grad_args.variant, "earnn, earnn_w, earnn_s or all");
  grad_cmd->add_option("--eps", grad_args.epsilon, "Finite difference step");
  grad_cmd->add_option("--coords", grad_args.coords, "Sampled coordinates per tensor");
  grad_cmd->add_option("--seed", grad_args.seed, "Random seed");
  grad_cmd->add_option("--inject-fault", grad_args.fault, "none or tanh-deriv (negative control)");
  grad_cmd->add_option("--config", grad_args.config_path, "JSON config file (flags take precedence)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) return run_synth(synth_args);
    if (ingest_cmd->parsed()) return run_ingest(ingest_args);
    if (train_cmd->parsed()) return run_train(train_args, train_cmd);
    if (eval_cmd->parsed()) return run_eval(eval_args, eval_cmd);
    if (rank_cmd->parsed()) return run_rank(rank_args);
    if (vis_cmd->parsed()) return run_visualize(vis_args);
    if (grad_cmd->parsed()) return run_gradcheck(grad_args, grad_cmd);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitVerification;
  }
  return kExitUsage;
}
