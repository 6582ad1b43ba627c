#include "mlens/learners.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace mlens {

using nlohmann::json;

const char* learner_name(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::EBR: return "ebr";
    case LearnerKind::ECC: return "ecc";
    case LearnerKind::EMODT: return "emodt";
  }
  return "?";
}

LearnerKind learner_from_name(const std::string& name) {
  if (name == "ebr") return LearnerKind::EBR;
  if (name == "ecc") return LearnerKind::ECC;
  if (name == "emodt") return LearnerKind::EMODT;
  throw std::invalid_argument("unknown learner '" + name + "' (expected ebr, ecc or emodt)");
}

namespace {

double softplus(double u) { return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u)); }

double clamp_proba(double p) { return std::min(1.0 - 1e-12, std::max(1e-12, p)); }

// f(w,b) = (1/N) sum_i softplus(-m_i (w.x_i + b)) + lambda ||w||^2, m = 2t-1
double logistic_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& m, const Eigen::VectorXd& w, double b,
                          double lambda) {
  const Eigen::VectorXd z = x * w + Eigen::VectorXd::Constant(x.rows(), b);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) loss += softplus(-m[i] * z[i]);
  return loss / static_cast<double>(x.rows()) + lambda * w.squaredNorm();
}

void logistic_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& m, const Eigen::VectorXd& w, double b,
                       double lambda, Eigen::VectorXd& grad_w, double& grad_b) {
  const Eigen::Index n = x.rows();
  const Eigen::VectorXd z = x * w + Eigen::VectorXd::Constant(n, b);
  // d/dz softplus(-m z) = -m * sigmoid(-m z)
  Eigen::VectorXd coeff(n);
  for (Eigen::Index i = 0; i < n; ++i) coeff[i] = -m[i] / (1.0 + std::exp(m[i] * z[i]));
  grad_w = x.transpose() * coeff / static_cast<double>(n) + 2.0 * lambda * w;
  grad_b = coeff.sum() / static_cast<double>(n);
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<int>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
  return out;
}

Eigen::MatrixXi take_rows(const Eigen::MatrixXi& x, const std::vector<int>& idx) {
  Eigen::MatrixXi out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
  return out;
}

std::vector<int> identity_indices(int n) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

void check_training_inputs(const Eigen::MatrixXd& features, const Eigen::MatrixXi& labels, int ensemble_size) {
  if (features.rows() == 0 || features.cols() == 0) throw std::invalid_argument("training data is empty");
  if (labels.rows() != features.rows()) throw std::invalid_argument("feature/label row count mismatch");
  if (labels.cols() == 0) throw std::invalid_argument("no labels");
  if (ensemble_size < 1) throw std::invalid_argument("ensemble size must be >= 1");
  for (Eigen::Index i = 0; i < labels.rows(); ++i)
    for (Eigen::Index k = 0; k < labels.cols(); ++k)
      if (labels(i, k) != 0 && labels(i, k) != 1) throw std::invalid_argument("labels must be 0/1");
}

}  // namespace

LinearModel train_logistic(const Eigen::MatrixXd& features, const Eigen::VectorXi& targets,
                           const LearnerConfig& config) {
  const Eigen::Index n = features.rows();
  if (n == 0 || features.cols() == 0) throw std::invalid_argument("train_logistic: empty input");
  if (targets.size() != n) throw std::invalid_argument("train_logistic: target length mismatch");

  const int positives = targets.sum();
  if (positives == 0 || positives == n) {
    // Degenerate column: constant model at the Laplace-smoothed frequency.
    const double p = (static_cast<double>(positives) + 1.0) / (static_cast<double>(n) + 2.0);
    LinearModel model;
    model.weights = Eigen::VectorXd::Zero(features.cols());
    model.bias = std::log(p / (1.0 - p));
    return model;
  }

  Eigen::VectorXd m(n);
  for (Eigen::Index i = 0; i < n; ++i) m[i] = targets[i] == 1 ? 1.0 : -1.0;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(features.cols());
  double b = 0.0;
  double f = logistic_objective(features, m, w, b, config.l2_lambda);
  Eigen::VectorXd g(features.cols());
  double gb = 0.0;
  double step = 1.0;

  for (int iter = 0; iter < config.max_iters; ++iter) {
    logistic_gradient(features, m, w, b, config.l2_lambda, g, gb);
    const double gnorm2 = g.squaredNorm() + gb * gb;
    if (std::sqrt(gnorm2) <= config.grad_tolerance) break;

    step = std::min(step * 2.0, 1e3);
    bool accepted = false;
    while (step >= 1e-12) {
      const Eigen::VectorXd w_new = w - step * g;
      const double b_new = b - step * gb;
      const double f_new = logistic_objective(features, m, w_new, b_new, config.l2_lambda);
      if (f_new <= f - 1e-4 * step * gnorm2) {
        w = w_new;
        b = b_new;
        f = f_new;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent step representable; already at the optimum numerically
  }

  LinearModel model;
  model.weights = std::move(w);
  model.bias = b;
  return model;
}

double predict_proba(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.weights.size()) throw std::invalid_argument("predict_proba: dimension mismatch");
  const double z = model.weights.dot(x) + model.bias;
  return clamp_proba(1.0 / (1.0 + std::exp(-z)));
}

EnsembleModel train_ebr(const Eigen::MatrixXd& features, const Eigen::MatrixXi& labels, int ensemble_size,
                        const LearnerConfig& config, std::uint64_t seed) {
  check_training_inputs(features, labels, ensemble_size);
  const int n = static_cast<int>(features.rows());
  const int k = static_cast<int>(labels.cols());

  EnsembleModel model;
  model.kind = LearnerKind::EBR;
  model.num_labels = k;
  model.num_features = static_cast<int>(features.cols());
  model.seed = seed;
  model.config = config;
  model.br_members.resize(static_cast<std::size_t>(ensemble_size));

  for (int j = 0; j < ensemble_size; ++j) {
    auto& member = model.br_members[static_cast<std::size_t>(j)];
    member.per_label.resize(static_cast<std::size_t>(k));
    for (int label = 0; label < k; ++label) {
      std::vector<int> idx = identity_indices(n);
      if (config.bootstrap) {
        Rng g(derive_seed(seed, "ebr", j, label, "boot"));
        idx = bootstrap_indices(g, n);
      }
      const Eigen::MatrixXd x = take_rows(features, idx);
      Eigen::VectorXi t(static_cast<Eigen::Index>(idx.size()));
      for (std::size_t i = 0; i < idx.size(); ++i) t[static_cast<Eigen::Index>(i)] = labels(idx[i], label);
      member.per_label[static_cast<std::size_t>(label)] = train_logistic(x, t, config);
    }
  }
  return model;
}

EnsembleModel train_ecc(const Eigen::MatrixXd& features, const Eigen::MatrixXi& labels, int ensemble_size,
                        const LearnerConfig& config, std::uint64_t seed) {
  check_training_inputs(features, labels, ensemble_size);
  const int n = static_cast<int>(features.rows());
  const int d = static_cast<int>(features.cols());
  const int k = static_cast<int>(labels.cols());

  EnsembleModel model;
  model.kind = LearnerKind::ECC;
  model.num_labels = k;
  model.num_features = d;
  model.seed = seed;
  model.config = config;
  model.chain_members.resize(static_cast<std::size_t>(ensemble_size));

  for (int j = 0; j < ensemble_size; ++j) {
    auto& member = model.chain_members[static_cast<std::size_t>(j)];
    {
      Rng g(derive_seed(seed, "ecc", j, "perm"));
      member.order = random_permutation(g, k);
    }
    std::vector<int> idx = identity_indices(n);
    if (config.bootstrap) {
      Rng g(derive_seed(seed, "ecc", j, "boot"));
      idx = bootstrap_indices(g, n);
    }
    const Eigen::MatrixXd x = take_rows(features, idx);
    const Eigen::MatrixXi y = take_rows(labels, idx);
    const Eigen::Index rows = x.rows();

    // Classifier at chain position i sees x plus the true values of the
    // i earlier chain labels.
    member.models.resize(static_cast<std::size_t>(k));
    Eigen::MatrixXd augmented(rows, d + k - 1);
    augmented.leftCols(d) = x;
    for (int pos = 0; pos < k; ++pos) {
      const int label = member.order[static_cast<std::size_t>(pos)];
      if (pos > 0) {
        const int prev = member.order[static_cast<std::size_t>(pos - 1)];
        augmented.col(d + pos - 1) = y.col(prev).cast<double>();
      }
      Eigen::VectorXi t = y.col(label);
      member.models[static_cast<std::size_t>(pos)] =
          train_logistic(augmented.leftCols(d + pos), t, config);
    }
  }
  return model;
}

MarginalVector predict_chain(const ChainMember& member, const Eigen::Ref<const Eigen::VectorXd>& x,
                             int num_features) {
  if (x.size() != num_features) throw std::invalid_argument("predict_chain: dimension mismatch");
  const int k = static_cast<int>(member.order.size());
  Eigen::VectorXd augmented(num_features + k - 1 > 0 ? num_features + k - 1 : 1);
  augmented.head(num_features) = x;
  MarginalVector probs(k);
  for (int pos = 0; pos < k; ++pos) {
    const double q = predict_proba(member.models[static_cast<std::size_t>(pos)],
                                   augmented.head(num_features + pos));
    probs[member.order[static_cast<std::size_t>(pos)]] = q;
    if (pos + 1 < k) augmented[num_features + pos] = q > 0.5 ? 1.0 : 0.0;
  }
  return probs;
}

namespace {

double gini_from_counts(const std::vector<int>& ones, int n, int k) {
  double imp = 0.0;
  for (int label = 0; label < k; ++label) {
    const double p = static_cast<double>(ones[static_cast<std::size_t>(label)]) / static_cast<double>(n);
    imp += 2.0 * p * (1.0 - p);
  }
  return imp / static_cast<double>(k);
}

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double score = std::numeric_limits<double>::infinity();  // weighted child impurity
};

int build_modt_node(const Eigen::MatrixXd& x, const Eigen::MatrixXi& y, std::vector<int>& idx, int depth,
                    const LearnerConfig& config, std::vector<TreeNode>& nodes) {
  const int n = static_cast<int>(idx.size());
  const int k = static_cast<int>(y.cols());
  const int d = static_cast<int>(x.cols());

  std::vector<int> ones(static_cast<std::size_t>(k), 0);
  for (int i : idx)
    for (int label = 0; label < k; ++label) ones[static_cast<std::size_t>(label)] += y(i, label);
  const double impurity = gini_from_counts(ones, n, k);

  auto make_leaf = [&]() {
    TreeNode leaf;
    leaf.support = n;
    leaf.leaf_probs = MarginalVector(k);
    for (int label = 0; label < k; ++label) {
      const double count = static_cast<double>(ones[static_cast<std::size_t>(label)]);
      leaf.leaf_probs[label] = config.leaf_smoothing ? (count + 1.0) / (static_cast<double>(n) + 2.0)
                                                     : count / static_cast<double>(n);
    }
    nodes.push_back(std::move(leaf));
    return static_cast<int>(nodes.size()) - 1;
  };

  const bool depth_capped = config.tree_max_depth >= 0 && depth >= config.tree_max_depth;
  if (n < 2 * config.tree_min_leaf || depth_capped || impurity <= 0.0) return make_leaf();

  SplitChoice best;
  std::vector<std::pair<double, int>> column(static_cast<std::size_t>(n));
  std::vector<int> left_ones(static_cast<std::size_t>(k));
  for (int feature = 0; feature < d; ++feature) {
    for (int i = 0; i < n; ++i) column[static_cast<std::size_t>(i)] = {x(idx[static_cast<std::size_t>(i)], feature), idx[static_cast<std::size_t>(i)]};
    std::sort(column.begin(), column.end());
    if (column.front().first == column.back().first) continue;  // constant feature here

    std::fill(left_ones.begin(), left_ones.end(), 0);
    for (int i = 0; i < n - 1; ++i) {
      const int row = column[static_cast<std::size_t>(i)].second;
      for (int label = 0; label < k; ++label) left_ones[static_cast<std::size_t>(label)] += y(row, label);
      const double v = column[static_cast<std::size_t>(i)].first;
      const double v_next = column[static_cast<std::size_t>(i + 1)].first;
      if (v == v_next) continue;  // not a boundary between distinct values
      const int n_left = i + 1, n_right = n - n_left;
      if (n_left < config.tree_min_leaf || n_right < config.tree_min_leaf) continue;

      double right_imp = 0.0, left_imp = 0.0;
      for (int label = 0; label < k; ++label) {
        const double pl = static_cast<double>(left_ones[static_cast<std::size_t>(label)]) / n_left;
        const double pr = static_cast<double>(ones[static_cast<std::size_t>(label)] - left_ones[static_cast<std::size_t>(label)]) / n_right;
        left_imp += 2.0 * pl * (1.0 - pl);
        right_imp += 2.0 * pr * (1.0 - pr);
      }
      left_imp /= k;
      right_imp /= k;
      const double score = (n_left * left_imp + n_right * right_imp) / n;
      if (score < best.score) {
        double thr = 0.5 * (v + v_next);
        if (!(thr < v_next)) thr = v;  // adjacent floats: fall back to the left value
        best = {true, feature, thr, score};
      }
    }
  }

  if (!best.found || best.score >= impurity - 1e-12) return make_leaf();

  std::vector<int> left_idx, right_idx;
  left_idx.reserve(static_cast<std::size_t>(n));
  right_idx.reserve(static_cast<std::size_t>(n));
  for (int i : idx) (x(i, best.feature) <= best.threshold ? left_idx : right_idx).push_back(i);

  const int self = static_cast<int>(nodes.size());
  nodes.emplace_back();
  nodes[static_cast<std::size_t>(self)].feature = best.feature;
  nodes[static_cast<std::size_t>(self)].threshold = best.threshold;
  nodes[static_cast<std::size_t>(self)].support = n;
  const int left_child = build_modt_node(x, y, left_idx, depth + 1, config, nodes);
  const int right_child = build_modt_node(x, y, right_idx, depth + 1, config, nodes);
  nodes[static_cast<std::size_t>(self)].left = left_child;
  nodes[static_cast<std::size_t>(self)].right = right_child;
  return self;
}

}  // namespace

ModtTree train_modt(const Eigen::MatrixXd& features, const Eigen::MatrixXi& labels, const LearnerConfig& config,
                    std::uint64_t /*seed*/) {
  check_training_inputs(features, labels, 1);
  ModtTree tree;
  std::vector<int> idx = identity_indices(static_cast<int>(features.rows()));
  build_modt_node(features, labels, idx, 0, config, tree.nodes);
  return tree;
}

EnsembleModel train_emodt(const Eigen::MatrixXd& features, const Eigen::MatrixXi& labels, int ensemble_size,
                          const LearnerConfig& config, std::uint64_t seed) {
  check_training_inputs(features, labels, ensemble_size);
  const int n = static_cast<int>(features.rows());

  EnsembleModel model;
  model.kind = LearnerKind::EMODT;
  model.num_labels = static_cast<int>(labels.cols());
  model.num_features = static_cast<int>(features.cols());
  model.seed = seed;
  model.config = config;
  model.tree_members.resize(static_cast<std::size_t>(ensemble_size));

  for (int j = 0; j < ensemble_size; ++j) {
    std::vector<int> idx = identity_indices(n);
    if (config.bootstrap) {
      Rng g(derive_seed(seed, "emodt", j, "boot"));
      idx = bootstrap_indices(g, n);
    }
    model.tree_members[static_cast<std::size_t>(j)] =
        train_modt(take_rows(features, idx), take_rows(labels, idx), config, derive_seed(seed, "emodt", j));
  }
  return model;
}

EnsembleModel train_ensemble(LearnerKind kind, const Eigen::MatrixXd& features, const Eigen::MatrixXi& labels,
                             int ensemble_size, const LearnerConfig& config, std::uint64_t seed) {
  switch (kind) {
    case LearnerKind::EBR: return train_ebr(features, labels, ensemble_size, config, seed);
    case LearnerKind::ECC: return train_ecc(features, labels, ensemble_size, config, seed);
    case LearnerKind::EMODT: return train_emodt(features, labels, ensemble_size, config, seed);
  }
  throw std::logic_error("train_ensemble: unknown learner kind");
}

MarginalVector predict_tree(const ModtTree& tree, const Eigen::Ref<const Eigen::VectorXd>& x) {
  int node = 0;
  while (tree.nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const auto& n = tree.nodes[static_cast<std::size_t>(node)];
    node = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return tree.nodes[static_cast<std::size_t>(node)].leaf_probs;
}

std::vector<MarginalVector> member_relevance(const EnsembleModel& ensemble,
                                             const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != ensemble.num_features) throw std::invalid_argument("member_relevance: dimension mismatch");
  std::vector<MarginalVector> out;
  out.reserve(static_cast<std::size_t>(ensemble.size()));
  switch (ensemble.kind) {
    case LearnerKind::EBR:
      for (const auto& member : ensemble.br_members) {
        MarginalVector p(ensemble.num_labels);
        for (int k = 0; k < ensemble.num_labels; ++k)
          p[k] = predict_proba(member.per_label[static_cast<std::size_t>(k)], x);
        out.push_back(std::move(p));
      }
      break;
    case LearnerKind::ECC:
      for (const auto& member : ensemble.chain_members) out.push_back(predict_chain(member, x, ensemble.num_features));
      break;
    case LearnerKind::EMODT:
      for (const auto& member : ensemble.tree_members) out.push_back(predict_tree(member, x));
      break;
  }
  return out;
}

namespace {

json linear_to_json(const LinearModel& m) {
  json j;
  j["w"] = std::vector<double>(m.weights.data(), m.weights.data() + m.weights.size());
  j["b"] = m.bias;
  return j;
}

LinearModel linear_from_json(const json& j) {
  LinearModel m;
  const auto w = j.at("w").get<std::vector<double>>();
  m.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  m.bias = j.at("b").get<double>();
  return m;
}

}  // namespace

std::string model_to_json(const EnsembleModel& ensemble) {
  json j;
  j["format"] = "mlens-model";
  j["version"] = 1;
  j["kind"] = learner_name(ensemble.kind);
  j["num_labels"] = ensemble.num_labels;
  j["num_features"] = ensemble.num_features;
  j["seed"] = ensemble.seed;
  j["config"] = {{"l2_lambda", ensemble.config.l2_lambda},
                 {"max_iters", ensemble.config.max_iters},
                 {"grad_tolerance", ensemble.config.grad_tolerance},
                 {"tree_min_leaf", ensemble.config.tree_min_leaf},
                 {"tree_max_depth", ensemble.config.tree_max_depth},
                 {"bootstrap", ensemble.config.bootstrap},
                 {"leaf_smoothing", ensemble.config.leaf_smoothing}};
  json members = json::array();
  switch (ensemble.kind) {
    case LearnerKind::EBR:
      for (const auto& m : ensemble.br_members) {
        json labels = json::array();
        for (const auto& lin : m.per_label) labels.push_back(linear_to_json(lin));
        members.push_back({{"labels", std::move(labels)}});
      }
      break;
    case LearnerKind::ECC:
      for (const auto& m : ensemble.chain_members) {
        json models = json::array();
        for (const auto& lin : m.models) models.push_back(linear_to_json(lin));
        members.push_back({{"order", m.order}, {"models", std::move(models)}});
      }
      break;
    case LearnerKind::EMODT:
      for (const auto& m : ensemble.tree_members) {
        json nodes = json::array();
        for (const auto& n : m.nodes) {
          if (n.feature >= 0) {
            nodes.push_back({{"f", n.feature}, {"thr", n.threshold}, {"l", n.left}, {"r", n.right}, {"n", n.support}});
          } else {
            nodes.push_back({{"leaf", std::vector<double>(n.leaf_probs.data(), n.leaf_probs.data() + n.leaf_probs.size())},
                             {"n", n.support}});
          }
        }
        members.push_back({{"nodes", std::move(nodes)}});
      }
      break;
  }
  j["members"] = std::move(members);
  return j.dump();
}

EnsembleModel model_from_json(const std::string& text) {
  json j = json::parse(text);
  if (j.value("format", "") != std::string("mlens-model")) throw std::runtime_error("not a model file");
  if (j.value("version", 0) != 1) throw std::runtime_error("unsupported model version");

  EnsembleModel ensemble;
  ensemble.kind = learner_from_name(j.at("kind").get<std::string>());
  ensemble.num_labels = j.at("num_labels").get<int>();
  ensemble.num_features = j.at("num_features").get<int>();
  ensemble.seed = j.at("seed").get<std::uint64_t>();
  const json& c = j.at("config");
  ensemble.config.l2_lambda = c.at("l2_lambda").get<double>();
  ensemble.config.max_iters = c.at("max_iters").get<int>();
  ensemble.config.grad_tolerance = c.at("grad_tolerance").get<double>();
  ensemble.config.tree_min_leaf = c.at("tree_min_leaf").get<int>();
  ensemble.config.tree_max_depth = c.at("tree_max_depth").get<int>();
  ensemble.config.bootstrap = c.at("bootstrap").get<bool>();
  ensemble.config.leaf_smoothing = c.at("leaf_smoothing").get<bool>();

  for (const json& member : j.at("members")) {
    switch (ensemble.kind) {
      case LearnerKind::EBR: {
        BrMember m;
        for (const json& lin : member.at("labels")) m.per_label.push_back(linear_from_json(lin));
        ensemble.br_members.push_back(std::move(m));
        break;
      }
      case LearnerKind::ECC: {
        ChainMember m;
        m.order = member.at("order").get<std::vector<int>>();
        for (const json& lin : member.at("models")) m.models.push_back(linear_from_json(lin));
        ensemble.chain_members.push_back(std::move(m));
        break;
      }
      case LearnerKind::EMODT: {
        ModtTree m;
        for (const json& nj : member.at("nodes")) {
          TreeNode n;
          n.support = nj.at("n").get<int>();
          if (nj.contains("f")) {
            n.feature = nj.at("f").get<int>();
            n.threshold = nj.at("thr").get<double>();
            n.left = nj.at("l").get<int>();
            n.right = nj.at("r").get<int>();
          } else {
            const auto probs = nj.at("leaf").get<std::vector<double>>();
            n.leaf_probs = Eigen::Map<const Eigen::ArrayXd>(probs.data(), static_cast<Eigen::Index>(probs.size()));
          }
          m.nodes.push_back(std::move(n));
        }
        ensemble.tree_members.push_back(std::move(m));
        break;
      }
    }
  }
  return ensemble;
}

void save_model(const EnsembleModel& ensemble, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << model_to_json(ensemble) << '\n';
}

EnsembleModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read model file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return model_from_json(text);
}

}  // namespace mlens
