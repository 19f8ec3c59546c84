#pragma once

#include <string>
#include <vector>

#include "earnn/corpus.hpp"
#include "earnn/model_io.hpp"

namespace earnn {

struct HeatmapOptions {
  int rates = 5;  // number of display buckets for word/sentence scores
};

// Quantile bucket per score: fraction of strictly smaller scores mapped onto
// [0, rates). Uniform inputs land in one bucket.
std::vector<int> quantile_buckets(const std::vector<double>& scores, int rates);

// Self-contained HTML page: word color depth from the word attention, sentence
// stripe thickness from the sentence attention, raw scores embedded as JSON.
std::string render_heatmap_html(const ModelBundle& bundle, const Question& question,
                                const std::vector<Answer>& answers, std::int64_t first_answer_time,
                                const HeatmapOptions& options = {});

}  // namespace earnn
