#pragma once

// Core label-space types. A multilabel prediction over K labels is a 0/1
// vector; a joint distribution over {0,1}^K is stored as a dense table of
// 2^K probabilities indexed little-endian: bit k of the index is label k.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mlens {

using LabelVector = Eigen::ArrayXi;     // entries in {0,1}
using MarginalVector = Eigen::ArrayXd;  // entries in [0,1], P(y_k = 1)

inline void check_label_vector(const LabelVector& y) {
  for (Eigen::Index k = 0; k < y.size(); ++k)
    if (y[k] != 0 && y[k] != 1) throw std::invalid_argument("label vector entries must be 0 or 1");
}

// index -> label vector (little-endian, label 0 at bit 0)
inline LabelVector decode_labels(std::uint64_t code, int num_labels) {
  LabelVector y(num_labels);
  for (int k = 0; k < num_labels; ++k) y[k] = static_cast<int>((code >> k) & 1u);
  return y;
}

inline std::uint64_t encode_labels(const LabelVector& y) {
  std::uint64_t code = 0;
  for (Eigen::Index k = 0; k < y.size(); ++k)
    if (y[k] != 0) code |= (1ull << k);
  return code;
}

// "Smaller encoding" order for tie-breaking, valid for any K (compares the
// implied little-endian integers without materializing them).
inline bool encoding_less(const LabelVector& a, const LabelVector& b) {
  for (Eigen::Index k = a.size() - 1; k >= 0; --k) {
    if (a[k] != b[k]) return a[k] < b[k];
  }
  return false;
}

// Full joint distribution over {0,1}^K, K <= joint_max_labels. Probabilities
// are renormalized on construction when their sum is within 1e-6 of 1;
// anything further off is an error.
inline constexpr int joint_max_labels = 24;

class JointDistribution {
 public:
  JointDistribution(int num_labels, Eigen::ArrayXd probs) : k_(num_labels), p_(std::move(probs)) {
    if (k_ < 1 || k_ > joint_max_labels)
      throw std::invalid_argument("JointDistribution: need 1 <= K <= " + std::to_string(joint_max_labels));
    if (p_.size() != (Eigen::Index{1} << k_))
      throw std::invalid_argument("JointDistribution: probability table must have 2^K entries");
    if ((p_ < 0.0).any()) throw std::invalid_argument("JointDistribution: negative probability");
    const double total = p_.sum();
    if (std::abs(total - 1.0) > 1e-6)
      throw std::invalid_argument("JointDistribution: probabilities sum to " + std::to_string(total));
    p_ /= total;
  }

  static JointDistribution point_mass(const LabelVector& y) {
    check_label_vector(y);
    Eigen::ArrayXd p = Eigen::ArrayXd::Zero(Eigen::Index{1} << y.size());
    p[static_cast<Eigen::Index>(encode_labels(y))] = 1.0;
    return JointDistribution(static_cast<int>(y.size()), std::move(p));
  }

  static JointDistribution uniform(int num_labels) {
    const Eigen::Index n = Eigen::Index{1} << num_labels;
    return JointDistribution(num_labels, Eigen::ArrayXd::Constant(n, 1.0 / static_cast<double>(n)));
  }

  // Independent-labels product distribution with the given marginals.
  static JointDistribution from_marginals(const MarginalVector& m) {
    const int k = static_cast<int>(m.size());
    const Eigen::Index n = Eigen::Index{1} << k;
    Eigen::ArrayXd p(n);
    for (Eigen::Index code = 0; code < n; ++code) {
      double q = 1.0;
      for (int j = 0; j < k; ++j) q *= ((code >> j) & 1) ? m[j] : 1.0 - m[j];
      p[code] = q;
    }
    return JointDistribution(k, std::move(p));
  }

  int num_labels() const { return k_; }
  Eigen::Index size() const { return p_.size(); }
  double prob(std::uint64_t code) const { return p_[static_cast<Eigen::Index>(code)]; }
  double prob_of(const LabelVector& y) const { return prob(encode_labels(y)); }
  const Eigen::ArrayXd& table() const { return p_; }

 private:
  int k_;
  Eigen::ArrayXd p_;
};

}  // namespace mlens
