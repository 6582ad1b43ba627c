#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "mlens/learners.hpp"

using namespace mlens;

namespace {

// Independent copy of the training objective for optimality probes.
double objective(const Eigen::MatrixXd& x, const Eigen::VectorXi& t, const Eigen::VectorXd& w, double b,
                 double lambda) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = t[i] == 1 ? 1.0 : -1.0;
    const double u = -m * (x.row(i).dot(w) + b);
    loss += u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
  }
  return loss / static_cast<double>(x.rows()) + lambda * w.squaredNorm();
}

Eigen::MatrixXd random_features(Rng& rng, int n, int d) {
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = 2.0 * rng_double(rng) - 1.0;
  return x;
}

Eigen::MatrixXi random_labels(Rng& rng, int n, int k) {
  Eigen::MatrixXi y(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) y(i, j) = rng_below(rng, 2) ? 1 : 0;
  return y;
}

// Leaf index an instance routes to (structure walk independent of
// predict_tree's probability lookup).
int route_to_leaf(const ModtTree& tree, const Eigen::VectorXd& x) {
  int node = 0;
  while (tree.nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const TreeNode& n = tree.nodes[static_cast<std::size_t>(node)];
    node = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return node;
}

}  // namespace

TEST_CASE("train_logistic: degenerate all-same targets give a constant smoothed model") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 2, 3, 4, 5, 6, 7, 8;
  LearnerConfig cfg;

  Eigen::VectorXi zeros = Eigen::VectorXi::Zero(4);
  const LinearModel m0 = train_logistic(x, zeros, cfg);
  CHECK(m0.weights.isZero(0.0));
  // p = 1/(N+2) = 1/6
  CHECK(m0.bias == doctest::Approx(std::log((1.0 / 6.0) / (5.0 / 6.0))).epsilon(1e-12));
  CHECK(predict_proba(m0, Eigen::Vector2d(100.0, -3.0)) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));

  Eigen::VectorXi ones = Eigen::VectorXi::Ones(4);
  const LinearModel m1 = train_logistic(x, ones, cfg);
  CHECK(predict_proba(m1, Eigen::Vector2d(0.0, 0.0)) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("train_logistic: symmetric separable pair") {
  Eigen::MatrixXd x(2, 1);
  x << -1.0, 1.0;
  Eigen::VectorXi t(2);
  t << 0, 1;
  LearnerConfig cfg;
  cfg.max_iters = 2000;
  const LinearModel m = train_logistic(x, t, cfg);
  // Symmetric data keeps the bias at exactly zero along the whole descent
  // path, so the midpoint probability is exactly 1/2.
  CHECK(m.bias == 0.0);
  CHECK(predict_proba(m, Eigen::VectorXd::Zero(1)) == 0.5);
  CHECK(predict_proba(m, Eigen::VectorXd::Ones(1)) > 0.9);
  CHECK(predict_proba(m, -Eigen::VectorXd::Ones(1)) < 0.1);
}

TEST_CASE("train_logistic reaches the convex optimum (perturbation probe)") {
  Rng rng(derive_seed(31, "opt"));
  const int n = 40, d = 3;
  const Eigen::MatrixXd x = random_features(rng, n, d);
  Eigen::VectorXi t(n);
  for (int i = 0; i < n; ++i) t[i] = x(i, 0) + 0.5 * x(i, 1) - 0.2 + 0.3 * (rng_double(rng) - 0.5) > 0.0 ? 1 : 0;
  if (t.sum() == 0) t[0] = 1;
  if (t.sum() == n) t[0] = 0;

  LearnerConfig cfg;
  cfg.l2_lambda = 1e-2;
  cfg.max_iters = 5000;
  cfg.grad_tolerance = 1e-8;
  const LinearModel m = train_logistic(x, t, cfg);
  const double f_star = objective(x, t, m.weights, m.bias, cfg.l2_lambda);

  // The objective is convex, so any perturbation must not go below the
  // trained value beyond the residual-gradient allowance.
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd dw(d);
    for (int j = 0; j < d; ++j) dw[j] = 2.0 * rng_double(rng) - 1.0;
    const double db = 2.0 * rng_double(rng) - 1.0;
    for (double eps : {1e-3, 1e-2, 1e-1}) {
      CHECK(objective(x, t, m.weights + eps * dw, m.bias + eps * db, cfg.l2_lambda) >= f_star - 1e-8);
    }
  }
}

TEST_CASE("predict_proba clamps extreme scores") {
  LinearModel m;
  m.weights = Eigen::VectorXd::Constant(1, 1000.0);
  m.bias = 0.0;
  CHECK(predict_proba(m, Eigen::VectorXd::Ones(1)) == 1.0 - 1e-12);
  CHECK(predict_proba(m, -Eigen::VectorXd::Ones(1)) == 1e-12);
  CHECK_THROWS_AS(predict_proba(m, Eigen::VectorXd::Ones(2)), std::invalid_argument);
}

TEST_CASE("EBR without bootstrap, M=1, equals per-label direct training") {
  Rng rng(derive_seed(32, "ebr"));
  const Eigen::MatrixXd x = random_features(rng, 30, 4);
  const Eigen::MatrixXi y = random_labels(rng, 30, 3);
  LearnerConfig cfg;
  cfg.bootstrap = false;

  const EnsembleModel model = train_ebr(x, y, 1, cfg, 77);
  REQUIRE(model.size() == 1);
  for (int k = 0; k < 3; ++k) {
    const LinearModel direct = train_logistic(x, y.col(k), cfg);
    const LinearModel& member = model.br_members[0].per_label[static_cast<std::size_t>(k)];
    CHECK(member.bias == direct.bias);
    CHECK((member.weights.array() == direct.weights.array()).all());
  }
}

TEST_CASE("ensembles are deterministic in the seed and prefix-stable in M") {
  Rng rng(derive_seed(33, "prefix"));
  const Eigen::MatrixXd x = random_features(rng, 40, 3);
  const Eigen::MatrixXi y = random_labels(rng, 40, 3);
  LearnerConfig cfg;
  cfg.max_iters = 60;  // keep the test quick; convergence is irrelevant here
  cfg.tree_min_leaf = 3;

  for (LearnerKind kind : {LearnerKind::EBR, LearnerKind::ECC, LearnerKind::EMODT}) {
    CAPTURE(learner_name(kind));
    const EnsembleModel a = train_ensemble(kind, x, y, 3, cfg, 123);
    const EnsembleModel b = train_ensemble(kind, x, y, 3, cfg, 123);
    CHECK(model_to_json(a) == model_to_json(b));
    const EnsembleModel c = train_ensemble(kind, x, y, 2, cfg, 123);
    CHECK(model_to_json(train_ensemble(kind, x, y, 3, cfg, 321)) != model_to_json(a));

    // First members of the larger ensemble coincide bitwise with the smaller.
    Eigen::VectorXd probe(3);
    probe << 0.1, -0.4, 0.7;
    const auto rel_a = member_relevance(a, probe);
    const auto rel_c = member_relevance(c, probe);
    REQUIRE(rel_a.size() == 3);
    REQUIRE(rel_c.size() == 2);
    for (int j = 0; j < 2; ++j) CHECK((rel_a[static_cast<std::size_t>(j)] == rel_c[static_cast<std::size_t>(j)]).all());
  }
}

TEST_CASE("ECC with a single label reduces to plain logistic regression") {
  Rng rng(derive_seed(34, "ecc1"));
  const Eigen::MatrixXd x = random_features(rng, 25, 3);
  const Eigen::MatrixXi y = random_labels(rng, 25, 1);
  LearnerConfig cfg;
  cfg.bootstrap = false;

  const EnsembleModel model = train_ecc(x, y, 1, cfg, 5);
  const LinearModel direct = train_logistic(x, y.col(0), cfg);
  const MarginalVector p = predict_chain(model.chain_members[0], x.row(3).transpose(), 3);
  CHECK(p[0] == predict_proba(direct, x.row(3).transpose()));
}

TEST_CASE("ECC chain structure: position i takes d + i features, orders are seeded") {
  Rng rng(derive_seed(35, "ecc"));
  const Eigen::MatrixXd x = random_features(rng, 30, 4);
  const Eigen::MatrixXi y = random_labels(rng, 30, 3);
  LearnerConfig cfg;
  cfg.max_iters = 40;

  const EnsembleModel model = train_ecc(x, y, 4, cfg, 99);
  for (const ChainMember& member : model.chain_members) {
    REQUIRE(member.order.size() == 3);
    std::vector<int> sorted = member.order;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>({0, 1, 2}));
    for (int pos = 0; pos < 3; ++pos)
      CHECK(member.models[static_cast<std::size_t>(pos)].weights.size() == 4 + pos);
  }
  const EnsembleModel again = train_ecc(x, y, 4, cfg, 99);
  for (std::size_t j = 0; j < 4; ++j) CHECK(model.chain_members[j].order == again.chain_members[j].order);
}

TEST_CASE("predict_chain feeds hard 0/1 decisions forward (frozen sigmoid values)") {
  ChainMember member;
  member.order = {1, 0};
  LinearModel first;  // predicts label 1 from the single raw feature
  first.weights = Eigen::VectorXd::Zero(1);
  first.bias = 1.0;
  LinearModel second;  // predicts label 0 from [x, hard(label 1)]
  second.weights = Eigen::VectorXd(2);
  second.weights << 0.0, -2.0;
  second.bias = 1.0;
  member.models = {first, second};

  Eigen::VectorXd x(1);
  x << 0.0;
  const MarginalVector p = predict_chain(member, x, 1);
  // sigma(1) = 0.731... > 1/2, so the second model sees 1 and scores 1 - 2 = -1.
  CHECK(p[1] == doctest::Approx(0.7310585786300049).epsilon(1e-12));
  CHECK(p[0] == doctest::Approx(0.2689414213699951).epsilon(1e-12));

  // Flip the first bias: now sigma(-1) < 1/2 feeds 0, second scores +1.
  member.models[0].bias = -1.0;
  const MarginalVector q = predict_chain(member, x, 1);
  CHECK(q[1] == doctest::Approx(0.2689414213699951).epsilon(1e-12));
  CHECK(q[0] == doctest::Approx(0.7310585786300049).epsilon(1e-12));
}

TEST_CASE("MODT: single instance and pure-label data give a single leaf") {
  LearnerConfig cfg;
  cfg.tree_min_leaf = 1;
  Eigen::MatrixXd x(1, 2);
  x << 3.0, 4.0;
  Eigen::MatrixXi y(1, 2);
  y << 1, 0;
  const ModtTree tree = train_modt(x, y, cfg, 0);
  REQUIRE(tree.nodes.size() == 1);
  CHECK(tree.nodes[0].feature == -1);
  CHECK(tree.nodes[0].support == 1);
  CHECK(tree.nodes[0].leaf_probs[0] == 1.0);
  CHECK(tree.nodes[0].leaf_probs[1] == 0.0);

  // Identical label rows: impurity 0 at the root, no split even though the
  // features vary.
  Eigen::MatrixXd x2(5, 1);
  x2 << 1, 2, 3, 4, 5;
  Eigen::MatrixXi y2(5, 2);
  for (int i = 0; i < 5; ++i) {
    y2(i, 0) = 1;
    y2(i, 1) = 0;
  }
  const ModtTree pure = train_modt(x2, y2, cfg, 0);
  REQUIRE(pure.nodes.size() == 1);
  CHECK(pure.nodes[0].leaf_probs[0] == 1.0);
}

TEST_CASE("MODT: two separable instances split at the midpoint") {
  LearnerConfig cfg;
  cfg.tree_min_leaf = 1;
  Eigen::MatrixXd x(2, 1);
  x << 0.0, 1.0;
  Eigen::MatrixXi y(2, 1);
  y << 0, 1;
  const ModtTree tree = train_modt(x, y, cfg, 0);
  REQUIRE(tree.nodes.size() == 3);
  CHECK(tree.nodes[0].feature == 0);
  CHECK(tree.nodes[0].threshold == 0.5);
  Eigen::VectorXd lo(1), hi(1);
  lo << 0.25;
  hi << 0.75;
  CHECK(predict_tree(tree, lo)[0] == 0.0);
  CHECK(predict_tree(tree, hi)[0] == 1.0);
}

TEST_CASE("MODT respects depth and leaf-size limits") {
  Rng rng(derive_seed(36, "modt"));
  const Eigen::MatrixXd x = random_features(rng, 50, 2);
  const Eigen::MatrixXi y = random_labels(rng, 50, 2);
  LearnerConfig cfg;
  cfg.tree_max_depth = 0;
  const ModtTree stump = train_modt(x, y, cfg, 0);
  CHECK(stump.nodes.size() == 1);

  cfg.tree_max_depth = 1;
  const ModtTree depth1 = train_modt(x, y, cfg, 0);
  CHECK(depth1.nodes.size() <= 3);
}

TEST_CASE("MODT leaves store exact per-leaf label frequencies over a partition") {
  Rng rng(derive_seed(37, "part"));
  const int n = 60, k = 3;
  const Eigen::MatrixXd x = random_features(rng, n, 4);
  const Eigen::MatrixXi y = random_labels(rng, n, k);
  LearnerConfig cfg;
  cfg.tree_min_leaf = 5;
  const ModtTree tree = train_modt(x, y, cfg, 0);

  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < n; ++i) groups[route_to_leaf(tree, x.row(i).transpose())].push_back(i);

  int covered = 0;
  for (const auto& [leaf, rows] : groups) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(leaf)];
    CHECK(node.support == static_cast<int>(rows.size()));
    CHECK(static_cast<int>(rows.size()) >= cfg.tree_min_leaf);
    for (int label = 0; label < k; ++label) {
      int ones = 0;
      for (int i : rows) ones += y(i, label);
      CHECK(node.leaf_probs[label] == static_cast<double>(ones) / static_cast<double>(rows.size()));
    }
    covered += static_cast<int>(rows.size());
  }
  CHECK(covered == n);

  // Every stored leaf is reachable (the builder only emits nodes it links).
  int leaf_count = 0;
  for (const auto& node : tree.nodes) leaf_count += node.feature < 0 ? 1 : 0;
  CHECK(static_cast<int>(groups.size()) == leaf_count);
}

TEST_CASE("MODT leaf smoothing applies the +1 rule") {
  LearnerConfig cfg;
  cfg.tree_min_leaf = 1;
  cfg.leaf_smoothing = true;
  Eigen::MatrixXd x(3, 1);
  x << 1.0, 1.0, 1.0;  // constant feature: no split possible
  Eigen::MatrixXi y(3, 1);
  y << 1, 1, 0;
  const ModtTree tree = train_modt(x, y, cfg, 0);
  REQUIRE(tree.nodes.size() == 1);
  CHECK(tree.nodes[0].leaf_probs[0] == doctest::Approx(3.0 / 5.0).epsilon(1e-15));
}

TEST_CASE("ECC predictions are invariant to feature representation only up to fp noise") {
  // Reordering training columns and probe entries consistently moves sums
  // into a different association order; predictions agree to ~1e-6.
  Rng rng(derive_seed(38, "inv"));
  const int n = 40, d = 4;
  const Eigen::MatrixXd x = random_features(rng, n, d);
  const Eigen::MatrixXi y = random_labels(rng, n, 2);
  LearnerConfig cfg;
  cfg.max_iters = 3000;
  cfg.grad_tolerance = 1e-10;
  cfg.bootstrap = false;

  Eigen::MatrixXd x_rev(n, d);
  for (int j = 0; j < d; ++j) x_rev.col(j) = x.col(d - 1 - j);

  const EnsembleModel a = train_ecc(x, y, 1, cfg, 4);
  const EnsembleModel b = train_ecc(x_rev, y, 1, cfg, 4);
  Eigen::VectorXd probe(d), probe_rev(d);
  for (int j = 0; j < d; ++j) probe[j] = 0.3 * j - 0.5;
  for (int j = 0; j < d; ++j) probe_rev[j] = probe[d - 1 - j];
  const MarginalVector pa = member_relevance(a, probe)[0];
  const MarginalVector pb = member_relevance(b, probe_rev)[0];
  for (int label = 0; label < 2; ++label) CHECK(pa[label] == doctest::Approx(pb[label]).epsilon(1e-5));
}

TEST_CASE("model serialization round-trips losslessly for all three kinds") {
  Rng rng(derive_seed(39, "json"));
  const Eigen::MatrixXd x = random_features(rng, 30, 3);
  const Eigen::MatrixXi y = random_labels(rng, 30, 2);
  LearnerConfig cfg;
  cfg.max_iters = 50;
  cfg.tree_min_leaf = 4;

  for (LearnerKind kind : {LearnerKind::EBR, LearnerKind::ECC, LearnerKind::EMODT}) {
    CAPTURE(learner_name(kind));
    const EnsembleModel model = train_ensemble(kind, x, y, 2, cfg, 17);
    const std::string text = model_to_json(model);
    const EnsembleModel back = model_from_json(text);
    CHECK(model_to_json(back) == text);

    Eigen::VectorXd probe(3);
    probe << 0.2, -0.1, 0.9;
    const auto rel_a = member_relevance(model, probe);
    const auto rel_b = member_relevance(back, probe);
    REQUIRE(rel_a.size() == rel_b.size());
    for (std::size_t j = 0; j < rel_a.size(); ++j) CHECK((rel_a[j] == rel_b[j]).all());

    const std::string path = std::string("/tmp/mlens_model_") + learner_name(kind) + ".json";
    save_model(model, path);
    CHECK(model_to_json(load_model(path)) == text);
    std::remove(path.c_str());
  }
  CHECK_THROWS(model_from_json("{}"));
  CHECK_THROWS_AS(learner_from_name("nope"), std::invalid_argument);
}

TEST_CASE("training input validation") {
  LearnerConfig cfg;
  Eigen::MatrixXd x(2, 1);
  x << 0.0, 1.0;
  Eigen::MatrixXi bad(2, 1);
  bad << 0, 2;
  CHECK_THROWS_AS(train_ebr(x, bad, 1, cfg, 0), std::invalid_argument);
  Eigen::MatrixXi y(2, 1);
  y << 0, 1;
  CHECK_THROWS_AS(train_ebr(x, y, 0, cfg, 0), std::invalid_argument);
  CHECK_THROWS_AS(train_ebr(Eigen::MatrixXd(0, 0), Eigen::MatrixXi(0, 0), 1, cfg, 0), std::invalid_argument);
  CHECK_THROWS_AS(train_ecc(x, Eigen::MatrixXi(3, 1), 1, cfg, 0), std::invalid_argument);
}
