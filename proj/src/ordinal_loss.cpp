#include "addle/ordinal_loss.hpp"

#include <stdexcept>
#include <string>

namespace addle {

std::vector<double> encode_label(int label, std::size_t num_classes) {
  if (num_classes < 2) throw std::invalid_argument("encode_label: need at least two classes");
  if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
    throw std::out_of_range("encode_label: label " + std::to_string(label) + " outside [0, " +
                            std::to_string(num_classes) + ")");
  }
  std::vector<double> t(num_classes - 1);
  for (std::size_t k = 0; k + 1 < num_classes; ++k) t[k] = label > static_cast<int>(k) ? 1.0 : 0.0;
  return t;
}

Tensor encode_labels(std::span<const int> labels, std::size_t num_classes) {
  Tensor out({labels.size(), num_classes - 1});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto t = encode_label(labels[i], num_classes);
    for (std::size_t k = 0; k < t.size(); ++k) out.at(i, k) = t[k];
  }
  return out;
}

double fh_loss(std::span<const double> logits, int label) {
  const auto t = encode_label(label, logits.size() + 1);
  double acc = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) acc += softplus(logits[k]) - t[k] * logits[k];
  return acc;
}

Var fh_loss_sum(Tape& tape, Var logits, std::span<const int> labels) {
  const Tensor& l = tape.value(logits);
  if (l.rank() != 2 || l.dim(0) != labels.size()) {
    throw std::invalid_argument("fh_loss_sum: logits " + shape_string(l.shape()) + " do not match " +
                                std::to_string(labels.size()) + " labels");
  }
  return tape.bce_with_logits_sum(logits, encode_labels(labels, l.dim(1) + 1));
}

double severity_score(std::span<const double> logits) {
  double acc = 0.0;
  for (double l : logits) acc += sigmoid(l);
  return acc;
}

std::vector<double> severity_scores(const Tensor& logits) {
  if (logits.rank() != 2) throw std::invalid_argument("severity_scores: logits must be [B x (K-1)]");
  std::vector<double> out(logits.dim(0));
  const std::size_t w = logits.dim(1);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = severity_score(logits.data().subspan(i * w, w));
  return out;
}

}  // namespace addle
