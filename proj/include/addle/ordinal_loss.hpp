#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "addle/tape.hpp"

namespace addle {

// Frank-Hall decomposition of a K-class ordinal label into K-1 "label > k"
// binary targets. t_k = 1 iff y > k, so the vector is a non-increasing staircase.
std::vector<double> encode_label(int label, std::size_t num_classes);

// [B x (K-1)] staircase targets for a batch of labels.
Tensor encode_labels(std::span<const int> labels, std::size_t num_classes);

// Sum of the K-1 binary cross-entropies, from logits.
double fh_loss(std::span<const double> logits, int label);

// Tape form over a batch: sum of fh_loss over rows of logits [B x (K-1)].
Var fh_loss_sum(Tape& tape, Var logits, std::span<const int> labels);

// Severity score: sum of the K-1 head probabilities, in [0, K-1].
double severity_score(std::span<const double> logits);

// Row-wise severity score of a [B x (K-1)] logit tensor.
std::vector<double> severity_scores(const Tensor& logits);

}  // namespace addle
