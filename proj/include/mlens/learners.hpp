#pragma once

// Base learners and ensemble constructors. Three ensemble kinds, all of
// which expose per-member relevance information as a MarginalVector:
//
//   EBR   - bagged binary relevance: M x K independent logistic models,
//           each trained on its own bootstrap sample
//   ECC   - classifier chains: per member a random label permutation sigma;
//           classifier k sees the original features plus the true values of
//           the sigma-earlier labels at training time, and the hard 0/1
//           predictions of those labels at inference time
//   EMODT - bagged multi-objective decision trees: axis-parallel CART-style
//           trees minimizing label-averaged Gini impurity, leaves store raw
//           per-label relevance proportions

#include <cstdint>
#include <string>
#include <vector>

#include "mlens/aggregate.hpp"
#include "mlens/rng.hpp"

namespace mlens {

enum class LearnerKind { EBR, ECC, EMODT };

const char* learner_name(LearnerKind kind);
LearnerKind learner_from_name(const std::string& name);

struct LearnerConfig {
  double l2_lambda = 1e-4;
  int max_iters = 500;
  double grad_tolerance = 1e-6;
  int tree_min_leaf = 5;
  int tree_max_depth = -1;  // -1 = unlimited
  bool bootstrap = true;
  bool leaf_smoothing = false;  // Laplace +1 on leaf proportions
};

struct LinearModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
};

// L2-regularized logistic regression (bias unpenalized), full-batch gradient
// descent with backtracking line search from a zero start. All-same targets
// short-circuit to a constant model with Laplace-smoothed frequency.
LinearModel train_logistic(const Eigen::MatrixXd& features, const Eigen::VectorXi& targets,
                           const LearnerConfig& config);

// Sigmoid of the linear score, clamped into [1e-12, 1 - 1e-12].
double predict_proba(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

struct BrMember {
  std::vector<LinearModel> per_label;  // size K
};

struct ChainMember {
  std::vector<int> order;            // sigma: order[i] = label trained at chain position i
  std::vector<LinearModel> models;   // models[i] takes d + i features
};

// Flat tree storage; nodes[0] is the root, feature < 0 marks a leaf.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  MarginalVector leaf_probs;  // set on leaves only
  int support = 0;
};

struct ModtTree {
  std::vector<TreeNode> nodes;
};

struct EnsembleModel {
  LearnerKind kind = LearnerKind::EBR;
  int num_labels = 0;
  int num_features = 0;
  std::uint64_t seed = 0;
  LearnerConfig config;
  std::vector<BrMember> br_members;
  std::vector<ChainMember> chain_members;
  std::vector<ModtTree> tree_members;

  int size() const {
    switch (kind) {
      case LearnerKind::EBR: return static_cast<int>(br_members.size());
      case LearnerKind::ECC: return static_cast<int>(chain_members.size());
      case LearnerKind::EMODT: return static_cast<int>(tree_members.size());
    }
    return 0;
  }
};

// Ensemble trainers. labels is N x K over {0,1}; features N x d. Member j's
// randomness is derived from (seed, kind, j) only, so growing M keeps the
// first members bit-identical.
EnsembleModel train_ebr(const Eigen::MatrixXd& features, const Eigen::MatrixXi& labels, int ensemble_size,
                        const LearnerConfig& config, std::uint64_t seed);
EnsembleModel train_ecc(const Eigen::MatrixXd& features, const Eigen::MatrixXi& labels, int ensemble_size,
                        const LearnerConfig& config, std::uint64_t seed);
EnsembleModel train_emodt(const Eigen::MatrixXd& features, const Eigen::MatrixXi& labels, int ensemble_size,
                          const LearnerConfig& config, std::uint64_t seed);
EnsembleModel train_ensemble(LearnerKind kind, const Eigen::MatrixXd& features, const Eigen::MatrixXi& labels,
                             int ensemble_size, const LearnerConfig& config, std::uint64_t seed);

// Single multi-objective decision tree on the given instances (the EMODT
// building block; exposed for tests). The seed is accepted for interface
// stability; greedy induction itself is deterministic.
ModtTree train_modt(const Eigen::MatrixXd& features, const Eigen::MatrixXi& labels, const LearnerConfig& config,
                    std::uint64_t seed);

// Chain inference: walk sigma, threshold each predicted probability at 1/2
// to feed the next classifier, return probabilities in natural label order.
MarginalVector predict_chain(const ChainMember& member, const Eigen::Ref<const Eigen::VectorXd>& x,
                             int num_features);

// Route x to a leaf and return its stored proportions.
MarginalVector predict_tree(const ModtTree& tree, const Eigen::Ref<const Eigen::VectorXd>& x);

// Per-member marginal relevance vectors for one instance (length M).
std::vector<MarginalVector> member_relevance(const EnsembleModel& ensemble,
                                             const Eigen::Ref<const Eigen::VectorXd>& x);

// Full pipeline: relevance extraction followed by the chosen aggregation.
inline LabelVector ensemble_predict(const EnsembleModel& ensemble, const Eigen::Ref<const Eigen::VectorXd>& x,
                                    const Strategy& strategy) {
  return aggregate_members(strategy, member_relevance(ensemble, x));
}

// Lossless text serialization (versioned JSON container).
std::string model_to_json(const EnsembleModel& ensemble);
EnsembleModel model_from_json(const std::string& text);
void save_model(const EnsembleModel& ensemble, const std::string& path);
EnsembleModel load_model(const std::string& path);

}  // namespace mlens
