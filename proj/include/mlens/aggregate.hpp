#pragma once

// Ensemble aggregation strategies: graded/binary majority voting (GMV/BMV),
// combine-then-predict (CTP: average the members' relevance estimates, then
// apply the loss-specific predictor once) and predict-then-combine (PTC:
// apply the predictor per member, then combine the decisions label-wise or
// by taking the most frequent prediction).

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "mlens/riskmin.hpp"

namespace mlens {

enum class StrategyKind { GMV, BMV, CTP, PTC_LW, PTC_MODE };

inline const char* strategy_name(StrategyKind s) {
  switch (s) {
    case StrategyKind::GMV: return "gmv";
    case StrategyKind::BMV: return "bmv";
    case StrategyKind::CTP: return "ctp";
    case StrategyKind::PTC_LW: return "ptc-lw";
    case StrategyKind::PTC_MODE: return "ptc-mode";
  }
  return "?";
}

// GMV/BMV do their own arithmetic loss-obliviously; target_loss still rides
// along so results can be labeled with the loss they were evaluated under.
struct Strategy {
  StrategyKind kind;
  LossKind target_loss;
};

inline void check_members_nonempty(std::size_t m) {
  if (m == 0) throw std::invalid_argument("aggregation needs at least one member");
}

// Arithmetic mean of member marginals (the CTP combination step).
inline MarginalVector ctp_mean_marginals(const std::vector<MarginalVector>& members) {
  check_members_nonempty(members.size());
  MarginalVector mean = members.front();
  for (std::size_t j = 1; j < members.size(); ++j) {
    if (members[j].size() != mean.size()) throw std::invalid_argument("ctp_mean_marginals: length mismatch");
    mean += members[j];
  }
  return mean / static_cast<double>(members.size());
}

// Entrywise mean of member joints (small-K CTP variant), renormalized.
inline JointDistribution ctp_mean_joint(const std::vector<JointDistribution>& members) {
  check_members_nonempty(members.size());
  Eigen::ArrayXd mean = members.front().table();
  for (std::size_t j = 1; j < members.size(); ++j) {
    if (members[j].num_labels() != members.front().num_labels())
      throw std::invalid_argument("ctp_mean_joint: label count mismatch");
    mean += members[j].table();
  }
  mean /= static_cast<double>(members.size());
  return JointDistribution(members.front().num_labels(), std::move(mean));
}

// Graded majority vote: per label, sum the members' confidence in 1 against
// their confidence in 0; ties go to 0.
inline LabelVector gmv(const std::vector<MarginalVector>& members) {
  check_members_nonempty(members.size());
  const Eigen::Index k = members.front().size();
  LabelVector y(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    double score1 = 0.0, score0 = 0.0;
    for (const auto& p : members) {
      if (p.size() != k) throw std::invalid_argument("gmv: length mismatch");
      score1 += p[i];
      score0 += 1.0 - p[i];
    }
    y[i] = score1 > score0 ? 1 : 0;
  }
  return y;
}

// Binary majority vote over hard member decisions; ties go to 0.
inline LabelVector bmv(const std::vector<LabelVector>& members) {
  check_members_nonempty(members.size());
  const Eigen::Index k = members.front().size();
  LabelVector y(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    int ones = 0;
    for (const auto& v : members) {
      if (v.size() != k) throw std::invalid_argument("bmv: length mismatch");
      ones += v[i];
    }
    y[i] = 2 * ones > static_cast<int>(members.size()) ? 1 : 0;
  }
  return y;
}

// PTC label-wise combination is the same vote; the pipeline differs only in
// what it feeds in (loss-tailored member predictions instead of relevances).
inline LabelVector ptc_label_wise(const std::vector<LabelVector>& members) { return bmv(members); }

// Most frequent member prediction. Frequency ties prefer the candidate with
// the highest agreement score s(yhat) = sum_k sum_j [yhat_k = yhat_{k,j}]
// (computable from per-label vote counts); remaining ties take the smallest
// little-endian encoding.
inline LabelVector ptc_mode(const std::vector<LabelVector>& members) {
  check_members_nonempty(members.size());
  const Eigen::Index k = members.front().size();
  const int m = static_cast<int>(members.size());

  std::map<std::vector<int>, int> freq;
  std::vector<int> ones_per_label(static_cast<std::size_t>(k), 0);
  for (const auto& v : members) {
    if (v.size() != k) throw std::invalid_argument("ptc_mode: length mismatch");
    std::vector<int> key(v.data(), v.data() + v.size());
    ++freq[key];
    for (Eigen::Index i = 0; i < k; ++i) ones_per_label[static_cast<std::size_t>(i)] += v[i];
  }

  auto agreement = [&](const std::vector<int>& cand) {
    int s = 0;
    for (Eigen::Index i = 0; i < k; ++i) {
      const int ones = ones_per_label[static_cast<std::size_t>(i)];
      s += cand[static_cast<std::size_t>(i)] == 1 ? ones : m - ones;
    }
    return s;
  };
  auto encoding_less_vec = [&](const std::vector<int>& a, const std::vector<int>& b) {
    for (Eigen::Index i = k - 1; i >= 0; --i) {
      const auto ia = static_cast<std::size_t>(i);
      if (a[ia] != b[ia]) return a[ia] < b[ia];
    }
    return false;
  };

  const std::vector<int>* best = nullptr;
  int best_freq = -1, best_score = -1;
  for (const auto& [cand, count] : freq) {
    const int score = agreement(cand);
    if (count > best_freq || (count == best_freq && score > best_score) ||
        (count == best_freq && score == best_score && encoding_less_vec(cand, *best))) {
      best = &cand;
      best_freq = count;
      best_score = score;
    }
  }
  LabelVector y(k);
  for (Eigen::Index i = 0; i < k; ++i) y[i] = (*best)[static_cast<std::size_t>(i)];
  return y;
}

// Full pipeline on member relevance vectors: strategy in, final prediction
// out. CTP under subset 0/1 uses the independence shortcut (threshold of the
// averaged marginals); the joint-averaging variant lives in
// ctp_predict_joint for small K.
inline LabelVector aggregate_members(const Strategy& strategy, const std::vector<MarginalVector>& members) {
  check_members_nonempty(members.size());
  switch (strategy.kind) {
    case StrategyKind::GMV: return gmv(members);
    case StrategyKind::BMV: {
      std::vector<LabelVector> votes;
      votes.reserve(members.size());
      for (const auto& p : members) votes.push_back(predict_hamming(p));
      return bmv(votes);
    }
    case StrategyKind::CTP: return predict_for_loss_marginals(strategy.target_loss, ctp_mean_marginals(members));
    case StrategyKind::PTC_LW:
    case StrategyKind::PTC_MODE: {
      std::vector<LabelVector> preds;
      preds.reserve(members.size());
      for (const auto& p : members) preds.push_back(predict_for_loss_marginals(strategy.target_loss, p));
      return strategy.kind == StrategyKind::PTC_LW ? ptc_label_wise(preds) : ptc_mode(preds);
    }
  }
  throw std::logic_error("aggregate_members: unknown strategy");
}

// CTP on full member joints: average the tables, then apply the exact
// loss-specific predictor (no independence assumption).
inline LabelVector ctp_predict_joint(LossKind loss, const std::vector<JointDistribution>& members) {
  return predict_for_loss(loss, ctp_mean_joint(members));
}

}  // namespace mlens
