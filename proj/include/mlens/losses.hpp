#pragma once

// Instance-wise multilabel losses and expectations under a joint distribution.
//
//   hamming_loss(y, s)   = (1/K) sum_k [y_k != s_k]
//   subset_loss(y, s)    = [y != s]
//   f_measure(y, s)      = 2 sum_k y_k s_k / (sum_k y_k + sum_k s_k),
//                          defined as 1 when both vectors are all-zero
//   f_loss(y, s)         = 1 - f_measure(y, s)
//
// All losses are in [0,1]; F-measure is a score (higher is better), its loss
// form is what the risk minimizers consume.

#include <bit>

#include "mlens/types.hpp"

namespace mlens {

enum class LossKind { Hamming, SubsetZeroOne, FMeasure };

inline const char* loss_name(LossKind loss) {
  switch (loss) {
    case LossKind::Hamming: return "hamming";
    case LossKind::SubsetZeroOne: return "subset";
    case LossKind::FMeasure: return "f1";
  }
  return "?";
}

inline double hamming_loss(const LabelVector& y, const LabelVector& yhat) {
  if (y.size() != yhat.size()) throw std::invalid_argument("hamming_loss: size mismatch");
  return static_cast<double>((y != yhat).count()) / static_cast<double>(y.size());
}

inline double subset_loss(const LabelVector& y, const LabelVector& yhat) {
  if (y.size() != yhat.size()) throw std::invalid_argument("subset_loss: size mismatch");
  return (y == yhat).all() ? 0.0 : 1.0;
}

inline double f_measure(const LabelVector& y, const LabelVector& yhat) {
  if (y.size() != yhat.size()) throw std::invalid_argument("f_measure: size mismatch");
  const double denom = static_cast<double>(y.sum() + yhat.sum());
  if (denom == 0.0) return 1.0;  // both empty: perfect agreement
  const double inter = static_cast<double>((y * yhat).sum());
  return 2.0 * inter / denom;
}

inline double f_loss(const LabelVector& y, const LabelVector& yhat) { return 1.0 - f_measure(y, yhat); }

// Loss dispatch (always a loss: F-measure enters as 1 - F).
inline double loss_value(LossKind loss, const LabelVector& y, const LabelVector& yhat) {
  switch (loss) {
    case LossKind::Hamming: return hamming_loss(y, yhat);
    case LossKind::SubsetZeroOne: return subset_loss(y, yhat);
    case LossKind::FMeasure: return f_loss(y, yhat);
  }
  throw std::logic_error("loss_value: unknown loss");
}

// Same losses on encoded vectors (bit k = label k); O(1) via popcount, used
// by the brute-force risk minimizer where decoding every pair would dominate.
inline double loss_value_encoded(LossKind loss, std::uint64_t y, std::uint64_t yhat, int num_labels) {
  switch (loss) {
    case LossKind::Hamming:
      return static_cast<double>(std::popcount(y ^ yhat)) / static_cast<double>(num_labels);
    case LossKind::SubsetZeroOne: return y == yhat ? 0.0 : 1.0;
    case LossKind::FMeasure: {
      const int denom = std::popcount(y) + std::popcount(yhat);
      if (denom == 0) return 0.0;  // F(0,0) = 1
      return 1.0 - 2.0 * static_cast<double>(std::popcount(y & yhat)) / static_cast<double>(denom);
    }
  }
  throw std::logic_error("loss_value_encoded: unknown loss");
}

// E_{y ~ dist}[ loss(y, yhat) ] by full enumeration of the joint table.
inline double expected_loss(const JointDistribution& dist, const LabelVector& yhat, LossKind loss) {
  if (static_cast<int>(yhat.size()) != dist.num_labels())
    throw std::invalid_argument("expected_loss: label count mismatch");
  double total = 0.0;
  for (Eigen::Index code = 0; code < dist.size(); ++code) {
    const double p = dist.prob(static_cast<std::uint64_t>(code));
    if (p == 0.0) continue;
    total += p * loss_value(loss, decode_labels(static_cast<std::uint64_t>(code), dist.num_labels()), yhat);
  }
  return total;
}

// Per-label marginals P(y_k = 1) of a joint distribution.
inline MarginalVector marginalize(const JointDistribution& dist) {
  MarginalVector m = MarginalVector::Zero(dist.num_labels());
  for (Eigen::Index code = 0; code < dist.size(); ++code) {
    const double p = dist.prob(static_cast<std::uint64_t>(code));
    if (p == 0.0) continue;
    for (int k = 0; k < dist.num_labels(); ++k)
      if ((code >> k) & 1) m[k] += p;
  }
  return m;
}

}  // namespace mlens
