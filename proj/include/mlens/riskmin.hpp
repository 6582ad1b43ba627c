#pragma once

// Loss-specific risk minimizers: given a distribution over label vectors
// (full joint or per-label marginals), produce the prediction minimizing the
// expected loss.
//
//   Hamming        -> threshold each marginal at 1/2 (boundary goes to 0)
//   subset 0/1     -> mode of the joint distribution
//   F-measure      -> plug-in maximizer of E[F] under label independence:
//                     the optimum sets some h labels with the largest
//                     marginals to 1, so scanning h = 0..K and scoring each
//                     candidate with a Poisson-binomial DP is exact for
//                     product distributions (O(K^3) total).

#include <algorithm>
#include <numeric>

#include "mlens/losses.hpp"

namespace mlens {

// Hamming-optimal prediction from marginals: y_k = 1 iff P(y_k=1) > 1/2.
inline LabelVector predict_hamming(const MarginalVector& m) {
  LabelVector y(m.size());
  for (Eigen::Index k = 0; k < m.size(); ++k) y[k] = m[k] > 0.5 ? 1 : 0;
  return y;
}

// Subset-0/1-optimal prediction: the joint mode. Ties break to the smallest
// encoding (ascending scan with strict improvement).
inline LabelVector predict_subset_mode(const JointDistribution& dist) {
  Eigen::Index best = 0;
  for (Eigen::Index code = 1; code < dist.size(); ++code)
    if (dist.table()[code] > dist.table()[best]) best = code;
  return decode_labels(static_cast<std::uint64_t>(best), dist.num_labels());
}

// PMF of a sum of independent Bernoulli(p_i) (Poisson-binomial), by iterative
// convolution; entry c is P(sum = c), c = 0..n.
inline Eigen::ArrayXd poisson_binomial_pmf(const Eigen::ArrayXd& p) {
  const Eigen::Index n = p.size();
  std::vector<long double> pmf(static_cast<std::size_t>(n) + 1, 0.0L);
  pmf[0] = 1.0L;
  for (Eigen::Index i = 0; i < n; ++i) {
    const long double q = static_cast<long double>(p[i]);
    for (Eigen::Index c = i + 1; c >= 1; --c)
      pmf[static_cast<std::size_t>(c)] =
          pmf[static_cast<std::size_t>(c)] * (1.0L - q) + pmf[static_cast<std::size_t>(c) - 1] * q;
    pmf[0] *= (1.0L - q);
  }
  Eigen::ArrayXd out(n + 1);
  for (Eigen::Index c = 0; c <= n; ++c) out[c] = static_cast<double>(pmf[static_cast<std::size_t>(c)]);
  return out;
}

// E[F(Y, yhat)] when the Y_k are independent with the given marginals.
// Split the labels by yhat: A = |Y restricted to predicted positives|,
// B = |Y restricted to predicted negatives|; A, B independent Poisson-
// binomial, F = 2A / (h + A + B) with h = |yhat| (and F = 1 at h=0, B=0).
inline double expected_f_independent(const MarginalVector& m, const LabelVector& yhat) {
  if (m.size() != yhat.size()) throw std::invalid_argument("expected_f_independent: size mismatch");
  const Eigen::Index k = m.size();
  std::vector<double> pa, pb;
  pa.reserve(static_cast<std::size_t>(k));
  pb.reserve(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) (yhat[i] != 0 ? pa : pb).push_back(m[i]);
  const int h = static_cast<int>(pa.size());
  if (h == 0) {
    double all_zero = 1.0;
    for (double q : pb) all_zero *= 1.0 - q;
    return all_zero;  // F is 1 iff Y is empty too
  }
  const Eigen::ArrayXd pmf_a = poisson_binomial_pmf(Eigen::Map<const Eigen::ArrayXd>(pa.data(), h));
  const Eigen::ArrayXd pmf_b =
      poisson_binomial_pmf(Eigen::Map<const Eigen::ArrayXd>(pb.data(), static_cast<Eigen::Index>(pb.size())));
  double e = 0.0;
  for (Eigen::Index a = 1; a < pmf_a.size(); ++a) {
    if (pmf_a[a] == 0.0) continue;
    double inner = 0.0;
    for (Eigen::Index b = 0; b < pmf_b.size(); ++b)
      inner += pmf_b[b] * (2.0 * static_cast<double>(a)) / static_cast<double>(h + a + b);
    e += pmf_a[a] * inner;
  }
  return e;
}

// Plug-in F-optimal prediction under label independence. Candidates are the
// top-h marginal sets for h = 0..K; ties keep the smaller h.
inline LabelVector predict_f_independent(const MarginalVector& m) {
  const Eigen::Index k = m.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return m[a] > m[b]; });

  LabelVector cand = LabelVector::Zero(k);
  LabelVector best = cand;
  double best_e = expected_f_independent(m, cand);
  for (Eigen::Index h = 1; h <= k; ++h) {
    cand[order[static_cast<std::size_t>(h - 1)]] = 1;
    const double e = expected_f_independent(m, cand);
    if (e > best_e) {
      best_e = e;
      best = cand;
    }
  }
  return best;
}

// Exhaustive risk minimizer over all 2^K candidates; reference implementation
// for tests and small K. Ties break to the smallest encoding.
inline LabelVector bayes_optimal_bruteforce(const JointDistribution& dist, LossKind loss) {
  const int k = dist.num_labels();
  if (k > 14) throw std::invalid_argument("bayes_optimal_bruteforce: K > 14 would enumerate 4^K pairs");
  const Eigen::Index n = dist.size();
  std::uint64_t best_code = 0;
  double best_risk = std::numeric_limits<double>::infinity();
  for (Eigen::Index cand = 0; cand < n; ++cand) {
    double risk = 0.0;
    for (Eigen::Index y = 0; y < n; ++y) {
      const double p = dist.table()[y];
      if (p == 0.0) continue;
      risk += p * loss_value_encoded(loss, static_cast<std::uint64_t>(y), static_cast<std::uint64_t>(cand), k);
    }
    if (risk < best_risk) {
      best_risk = risk;
      best_code = static_cast<std::uint64_t>(cand);
    }
  }
  return decode_labels(best_code, k);
}

// Pred_l on a full joint distribution.
inline LabelVector predict_for_loss(LossKind loss, const JointDistribution& dist) {
  switch (loss) {
    case LossKind::Hamming: return predict_hamming(marginalize(dist));
    case LossKind::SubsetZeroOne: return predict_subset_mode(dist);
    case LossKind::FMeasure: return predict_f_independent(marginalize(dist));
  }
  throw std::logic_error("predict_for_loss: unknown loss");
}

// Pred_l on per-label marginals (label independence assumed). The subset
// case is the mode of the product distribution, which factorizes to the same
// 1/2 threshold as Hamming (boundary to 0 keeps the smaller encoding).
inline LabelVector predict_for_loss_marginals(LossKind loss, const MarginalVector& m) {
  switch (loss) {
    case LossKind::Hamming: return predict_hamming(m);
    case LossKind::SubsetZeroOne: return predict_hamming(m);
    case LossKind::FMeasure: return predict_f_independent(m);
  }
  throw std::logic_error("predict_for_loss_marginals: unknown loss");
}

}  // namespace mlens
