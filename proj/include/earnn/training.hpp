#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "earnn/corpus.hpp"
#include "earnn/embedding.hpp"
#include "earnn/network.hpp"

namespace earnn {

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 50;
  double margin = 0.1;
  double h_decay = 1e6;  // seconds
  double dropout = 0.2;
  std::uint64_t seed = 0;
  VariantConfig variant = VariantConfig::earnn();
  bool shuffle = true;
  std::int64_t good_threshold = 10;  // for the per-epoch training metrics
};

struct LstmGrads {
  Mat w_input, w_forget, w_output, w_candidate;
  Vec b_input, b_forget, b_output, b_candidate;
};

// Shape-congruent with ModelParams.
struct Gradients {
  LstmGrads lstm_q, lstm_a;
  Mat bilinear_w;
  Mat mlp_w1;
  Vec mlp_b1;
  Vec mlp_w2;
  double mlp_b2 = 0.0;
  Mat embeddings;

  static Gradients zeros_like(const ModelParams& p);
  void clear();
};

// Glorot-uniform weights (bound sqrt(6/(nin+nout)) per matrix), zero biases.
ModelParams init_params(const Dims& dims, EmbeddingTable embeddings, std::uint64_t seed,
                        double h_decay = 1e6, double margin = 0.1);

struct TripleEval {
  double loss = 0.0;   // max(0, delta)
  double delta = 0.0;  // margin + S(neg) - S(pos)
  ForwardTrace pos;
  ForwardTrace neg;
};

TripleEval triple_loss(const ModelParams& p, const VariantConfig& variant, const EncodedQA& pos,
                       const EncodedQA& neg, const DropoutPlan* pos_dropout = nullptr,
                       const DropoutPlan* neg_dropout = nullptr);

enum class FaultInjection { none, tanh_derivative };

// Exact gradients of the hinge through both traces. Contract: delta > 0.
Gradients backward(const ModelParams& p, const TripleEval& eval,
                   FaultInjection fault = FaultInjection::none);

void sgd_step(ModelParams& p, const Gradients& g, double learning_rate);

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  int skipped = 0;
  double train_map = 0.0;
  double train_doa = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> log;
};

// Per-triple SGD with the skip rule; deterministic given (corpus, config, seed).
// on_epoch may return false to stop early.
TrainResult train(const Corpus& corpus, const std::vector<Triple>& triples, const Vocabulary& vocab,
                  ModelParams initial, const TrainConfig& config,
                  const std::function<bool(const EpochStats&)>& on_epoch = {});

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central finite differences over every tensor (random subsample of
// coordinates when a tensor is larger than coords_per_tensor).
GradCheckResult grad_check(const ModelParams& p, const VariantConfig& variant, const EncodedQA& pos,
                           const EncodedQA& neg, double epsilon, std::size_t coords_per_tensor,
                           std::uint64_t seed, FaultInjection fault = FaultInjection::none);

}  // namespace earnn
