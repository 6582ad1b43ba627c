#include "mlens/experiments.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mlens {

using nlohmann::json;

double metric_percent(LossKind loss, const LabelVector& y, const LabelVector& yhat) {
  switch (loss) {
    case LossKind::Hamming: return 100.0 * hamming_loss(y, yhat);
    case LossKind::SubsetZeroOne: return 100.0 * subset_loss(y, yhat);
    case LossKind::FMeasure: return 100.0 * f_measure(y, yhat);
  }
  throw std::logic_error("metric_percent: unknown loss");
}

bool higher_is_better(LossKind loss) { return loss == LossKind::FMeasure; }

StrategyKind strategy_from_name(const std::string& name) {
  if (name == "gmv") return StrategyKind::GMV;
  if (name == "bmv") return StrategyKind::BMV;
  if (name == "ctp") return StrategyKind::CTP;
  if (name == "ptc-lw" || name == "ptc_lw") return StrategyKind::PTC_LW;
  if (name == "ptc-mode" || name == "ptc_mode") return StrategyKind::PTC_MODE;
  throw std::invalid_argument("unknown strategy '" + name + "' (gmv, bmv, ctp, ptc-lw, ptc-mode)");
}

LossKind loss_from_name(const std::string& name) {
  if (name == "hamming") return LossKind::Hamming;
  if (name == "subset") return LossKind::SubsetZeroOne;
  if (name == "f1") return LossKind::FMeasure;
  throw std::invalid_argument("unknown loss '" + name + "' (hamming, subset, f1)");
}

const ResultCell* ResultTable::find(const std::string& dataset, LearnerKind learner, StrategyKind strategy,
                                    LossKind loss) const {
  for (const auto& cell : cells)
    if (cell.dataset == dataset && cell.learner == learner && cell.strategy == strategy && cell.loss == loss)
      return &cell;
  return nullptr;
}

namespace {

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& x, const std::vector<int>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
  return out;
}

Eigen::MatrixXi rows_of(const Eigen::MatrixXi& x, const std::vector<int>& idx) {
  Eigen::MatrixXi out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
  return out;
}

// Fold scores for every (strategy, loss, size) of one dataset/learner pair.
// sizes must be ascending; the largest is trained once per fold and smaller
// sizes evaluate prefixes of its members.
struct CellKey {
  StrategyKind strategy;
  LossKind loss;
  int size;
  bool operator<(const CellKey& o) const {
    return std::tie(strategy, loss, size) < std::tie(o.strategy, o.loss, o.size);
  }
};

std::map<CellKey, std::vector<double>> evaluate_learner(const ExperimentSpec& spec, const Dataset& ds,
                                                        LearnerKind learner, const std::vector<int>& sizes) {
  const int max_size = sizes.back();
  std::map<CellKey, std::vector<double>> fold_scores;

  const std::vector<FoldPlan> plans = split_folds(ds.rows(), spec.folds, derive_seed(spec.seed, ds.name), spec.repeats);
  for (const FoldPlan& plan : plans) {
    for (int fold = 0; fold < plan.k; ++fold) {
      const std::vector<int> train_idx = plan.train_indices(fold);
      const std::vector<int> test_idx = plan.test_indices(fold);

      const Standardizer standardizer = fit_standardizer(ds, train_idx);
      const Eigen::MatrixXd x_train = standardizer.apply(rows_of(ds.features, train_idx));
      const Eigen::MatrixXd x_test = standardizer.apply(rows_of(ds.features, test_idx));
      const Eigen::MatrixXi y_train = rows_of(ds.labels, train_idx);
      const Eigen::MatrixXi y_test = rows_of(ds.labels, test_idx);

      const EnsembleModel model =
          train_ensemble(learner, x_train, y_train, max_size, spec.learner_config,
                         derive_seed(spec.seed, ds.name, learner_name(learner), plan.repeat_index, fold));

      std::map<CellKey, double> sums;
      for (Eigen::Index i = 0; i < x_test.rows(); ++i) {
        const std::vector<MarginalVector> relevance = member_relevance(model, x_test.row(i).transpose());
        const LabelVector truth = y_test.row(i).transpose().array();

        for (int size : sizes) {
          const std::vector<MarginalVector> members(relevance.begin(), relevance.begin() + size);

          // Shared work across the strategy grid: loss-oblivious votes once,
          // the averaged marginals once, per-loss member predictions once.
          LabelVector gmv_pred, bmv_pred;
          MarginalVector mean;
          bool need_gmv = false, need_bmv = false, need_mean = false;
          for (StrategyKind s : spec.strategies) {
            need_gmv |= s == StrategyKind::GMV;
            need_bmv |= s == StrategyKind::BMV;
            need_mean |= s == StrategyKind::CTP;
          }
          if (need_gmv) gmv_pred = gmv(members);
          if (need_bmv) {
            std::vector<LabelVector> votes;
            votes.reserve(members.size());
            for (const auto& p : members) votes.push_back(predict_hamming(p));
            bmv_pred = bmv(votes);
          }
          if (need_mean) mean = ctp_mean_marginals(members);

          for (LossKind loss : spec.losses) {
            std::vector<LabelVector> member_preds;
            const bool need_ptc =
                std::find(spec.strategies.begin(), spec.strategies.end(), StrategyKind::PTC_LW) != spec.strategies.end() ||
                std::find(spec.strategies.begin(), spec.strategies.end(), StrategyKind::PTC_MODE) != spec.strategies.end();
            if (need_ptc) {
              member_preds.reserve(members.size());
              for (const auto& p : members) member_preds.push_back(predict_for_loss_marginals(loss, p));
            }
            for (StrategyKind s : spec.strategies) {
              LabelVector pred;
              switch (s) {
                case StrategyKind::GMV: pred = gmv_pred; break;
                case StrategyKind::BMV: pred = bmv_pred; break;
                case StrategyKind::CTP: pred = predict_for_loss_marginals(loss, mean); break;
                case StrategyKind::PTC_LW: pred = ptc_label_wise(member_preds); break;
                case StrategyKind::PTC_MODE: pred = ptc_mode(member_preds); break;
              }
              sums[{s, loss, size}] += metric_percent(loss, truth, pred);
            }
          }
        }
      }
      for (auto& [key, total] : sums)
        fold_scores[key].push_back(total / static_cast<double>(x_test.rows()));
    }
  }
  return fold_scores;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

ResultTable run_grid(const ExperimentSpec& spec, const std::map<std::string, Dataset>& datasets) {
  if (spec.datasets.empty() || spec.learners.empty() || spec.strategies.empty() || spec.losses.empty())
    throw std::invalid_argument("run_grid: empty grid dimension");
  if (spec.ensemble_size < 1) throw std::invalid_argument("run_grid: ensemble size must be >= 1");

  ResultTable table;
  table.spec = spec;
  for (const std::string& name : spec.datasets) {
    const auto it = datasets.find(name);
    if (it == datasets.end()) throw std::invalid_argument("run_grid: dataset '" + name + "' not loaded");
    const Dataset& ds = it->second;
    for (LearnerKind learner : spec.learners) {
      std::map<CellKey, std::vector<double>> scores;
      std::string error;
      try {
        scores = evaluate_learner(spec, ds, learner, {spec.ensemble_size});
      } catch (const std::exception& e) {
        error = e.what();
      }
      for (StrategyKind s : spec.strategies) {
        for (LossKind loss : spec.losses) {
          ResultCell cell;
          cell.dataset = name;
          cell.learner = learner;
          cell.strategy = s;
          cell.loss = loss;
          const auto hit = scores.find({s, loss, spec.ensemble_size});
          if (hit == scores.end()) {
            cell.missing = true;
            cell.error = error.empty() ? "not evaluated" : error;
          } else {
            cell.fold_scores = hit->second;
            cell.mean_percent = mean_of(cell.fold_scores);
          }
          table.cells.push_back(std::move(cell));
        }
      }
    }
  }
  return table;
}

std::vector<SweepPoint> size_sweep(const ExperimentSpec& spec, const std::vector<int>& sizes,
                                   const std::map<std::string, Dataset>& datasets) {
  if (sizes.empty()) throw std::invalid_argument("size_sweep: no sizes");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 1) throw std::invalid_argument("size_sweep: sizes must be >= 1");
    if (i > 0 && sizes[i] <= sizes[i - 1]) throw std::invalid_argument("size_sweep: sizes must be ascending");
  }

  std::vector<SweepPoint> points;
  for (const std::string& name : spec.datasets) {
    const auto it = datasets.find(name);
    if (it == datasets.end()) throw std::invalid_argument("size_sweep: dataset '" + name + "' not loaded");
    for (LearnerKind learner : spec.learners) {
      const auto scores = evaluate_learner(spec, it->second, learner, sizes);
      for (StrategyKind s : spec.strategies)
        for (LossKind loss : spec.losses)
          for (int size : sizes) {
            const auto hit = scores.find({s, loss, size});
            if (hit == scores.end()) continue;
            points.push_back({name, learner, s, loss, size, mean_of(hit->second)});
          }
    }
  }
  return points;
}

std::vector<double> compute_ranks(const std::vector<double>& scores, bool higher_better) {
  const std::size_t m = scores.size();
  if (m < 2) throw std::invalid_argument("compute_ranks: need at least two methods");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return higher_better ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  std::vector<double> ranks(m, 0.0);
  std::size_t i = 0;
  while (i < m) {
    std::size_t j = i;
    while (j + 1 < m && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = shared;
    i = j + 1;
  }
  return ranks;
}

namespace {

// Upper critical values of the chi-square distribution, df = 1..9.
constexpr double chi2_crit_05[9] = {3.841, 5.991, 7.815, 9.488, 11.070, 12.592, 14.067, 15.507, 16.919};
constexpr double chi2_crit_10[9] = {2.706, 4.605, 6.251, 7.779, 9.236, 10.645, 12.017, 13.362, 14.684};

// Nemenyi q_alpha = q/sqrt(2) of the studentized range, k = 2..10.
constexpr double nemenyi_q_05[9] = {1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164};
constexpr double nemenyi_q_10[9] = {1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920};

int alpha_slot(double alpha) {
  if (std::abs(alpha - 0.05) < 1e-9) return 0;
  if (std::abs(alpha - 0.10) < 1e-9) return 1;
  throw std::invalid_argument("alpha must be 0.05 or 0.10");
}

}  // namespace

FriedmanResult friedman_test(const std::vector<std::vector<double>>& rank_matrix, double alpha) {
  const std::size_t n = rank_matrix.size();
  if (n < 2) throw std::invalid_argument("friedman_test: need at least two datasets");
  const std::size_t m = rank_matrix.front().size();
  if (m < 2) throw std::invalid_argument("friedman_test: need at least two methods");
  for (const auto& row : rank_matrix)
    if (row.size() != m) throw std::invalid_argument("friedman_test: ragged rank matrix");
  if (m - 1 > 9) throw std::invalid_argument("friedman_test: m - 1 > 9 not in the embedded table");

  const int slot = alpha_slot(alpha);
  double sum_sq = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double mean_rank = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_rank += rank_matrix[i][j];
    mean_rank /= static_cast<double>(n);
    sum_sq += mean_rank * mean_rank;
  }
  const double md = static_cast<double>(m);
  const double statistic =
      12.0 * static_cast<double>(n) / (md * (md + 1.0)) * (sum_sq - md * (md + 1.0) * (md + 1.0) / 4.0);

  FriedmanResult result;
  result.statistic = statistic;
  result.degrees_of_freedom = static_cast<int>(m) - 1;
  result.critical_value = (slot == 0 ? chi2_crit_05 : chi2_crit_10)[m - 2];
  result.reject = statistic > result.critical_value;
  return result;
}

double nemenyi_cd(int methods, int datasets, double alpha) {
  if (methods < 2 || methods > 10) throw std::invalid_argument("nemenyi_cd: methods must be in [2, 10]");
  if (datasets < 1) throw std::invalid_argument("nemenyi_cd: need at least one dataset");
  const int slot = alpha_slot(alpha);
  const double q = (slot == 0 ? nemenyi_q_05 : nemenyi_q_10)[methods - 2];
  const double md = static_cast<double>(methods);
  return q * std::sqrt(md * (md + 1.0) / (6.0 * static_cast<double>(datasets)));
}

JointDistribution toy_distribution() {
  Eigen::ArrayXd p = Eigen::ArrayXd::Zero(8);
  p[0b000] = 4.0 / 16.0;  // (0,0,0)
  p[0b111] = 3.0 / 16.0;  // (1,1,1)
  p[0b110] = 3.0 / 16.0;  // (0,1,1): labels 1,2 set
  p[0b101] = 3.0 / 16.0;  // (1,0,1): labels 0,2 set
  p[0b011] = 3.0 / 16.0;  // (1,1,0): labels 0,1 set
  return JointDistribution(3, std::move(p));
}

ToyResult simulate_toy(int ensemble_size, std::uint64_t seed) {
  if (ensemble_size < 1) throw std::invalid_argument("simulate_toy: ensemble size must be >= 1");
  const JointDistribution dist = toy_distribution();

  Rng g(derive_seed(seed, "toy"));
  std::vector<LabelVector> members;
  members.reserve(static_cast<std::size_t>(ensemble_size));
  for (int j = 0; j < ensemble_size; ++j) {
    const double r = rng_double(g);
    double acc = 0.0;
    std::uint64_t code = static_cast<std::uint64_t>(dist.size()) - 1;
    for (Eigen::Index c = 0; c < dist.size(); ++c) {
      acc += dist.table()[c];
      if (r < acc) {
        code = static_cast<std::uint64_t>(c);
        break;
      }
    }
    members.push_back(decode_labels(code, dist.num_labels()));
  }

  ToyResult result;
  result.label_wise = ptc_label_wise(members);
  result.mode = ptc_mode(members);
  result.label_wise_subset = expected_loss(dist, result.label_wise, LossKind::SubsetZeroOne);
  result.label_wise_hamming = expected_loss(dist, result.label_wise, LossKind::Hamming);
  result.mode_subset = expected_loss(dist, result.mode, LossKind::SubsetZeroOne);
  result.mode_hamming = expected_loss(dist, result.mode, LossKind::Hamming);
  return result;
}

namespace {

std::string trim_copy(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream stream(s);
  std::string item;
  while (std::getline(stream, item, ',')) {
    item = trim_copy(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int parse_int_value(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': '" + value + "' is not an integer");
  }
}

double parse_double_value(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': '" + value + "' is not a number");
  }
}

bool parse_bool_value(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "off" || value == "no") return false;
  throw std::invalid_argument("config key '" + key + "': '" + value + "' is not a boolean");
}

}  // namespace

ExperimentSpec spec_from_keys(const std::vector<std::pair<std::string, std::string>>& keys) {
  ExperimentSpec spec;
  bool strategies_set = false, losses_set = false, learners_set = false;
  for (const auto& [key, value] : keys) {
    if (key == "seed") {
      try {
        std::size_t used = 0;
        spec.seed = static_cast<std::uint64_t>(std::stoull(value, &used));
        if (used != value.size()) throw std::invalid_argument(value);
      } catch (...) {
        throw std::invalid_argument("config key 'seed': '" + value + "' is not an unsigned integer");
      }
    } else if (key == "m" || key == "ensemble_size") {
      spec.ensemble_size = parse_int_value(key, value);
    } else if (key == "folds") {
      spec.folds = parse_int_value(key, value);
    } else if (key == "repeats") {
      spec.repeats = parse_int_value(key, value);
    } else if (key == "datasets") {
      spec.datasets = split_list(value);
    } else if (key == "ensembles" || key == "learners") {
      spec.learners.clear();
      for (const auto& name : split_list(value)) spec.learners.push_back(learner_from_name(name));
      learners_set = true;
    } else if (key == "strategies") {
      spec.strategies.clear();
      for (const auto& name : split_list(value)) spec.strategies.push_back(strategy_from_name(name));
      strategies_set = true;
    } else if (key == "losses") {
      spec.losses.clear();
      for (const auto& name : split_list(value)) spec.losses.push_back(loss_from_name(name));
      losses_set = true;
    } else if (key == "learner.l2_lambda") {
      spec.learner_config.l2_lambda = parse_double_value(key, value);
    } else if (key == "learner.max_iters") {
      spec.learner_config.max_iters = parse_int_value(key, value);
    } else if (key == "learner.grad_tolerance") {
      spec.learner_config.grad_tolerance = parse_double_value(key, value);
    } else if (key == "learner.tree_min_leaf") {
      spec.learner_config.tree_min_leaf = parse_int_value(key, value);
    } else if (key == "learner.tree_max_depth") {
      spec.learner_config.tree_max_depth = parse_int_value(key, value);
    } else if (key == "learner.bootstrap") {
      spec.learner_config.bootstrap = parse_bool_value(key, value);
    } else if (key == "learner.leaf_smoothing") {
      spec.learner_config.leaf_smoothing = parse_bool_value(key, value);
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }
  if (spec.ensemble_size < 1) throw std::invalid_argument("ensemble size must be >= 1");
  if (spec.folds < 2) throw std::invalid_argument("folds must be >= 2");
  if (spec.repeats < 1) throw std::invalid_argument("repeats must be >= 1");
  if ((strategies_set && spec.strategies.empty()) || (losses_set && spec.losses.empty()) ||
      (learners_set && spec.learners.empty()))
    throw std::invalid_argument("empty strategy/loss/ensemble list");
  return spec;
}

ExperimentSpec parse_spec_config(const std::string& path,
                                 const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::vector<std::pair<std::string, std::string>> keys;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim_copy(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": expected key = value");
    keys.emplace_back(trim_copy(line.substr(0, eq)), trim_copy(line.substr(eq + 1)));
  }
  keys.insert(keys.end(), overrides.begin(), overrides.end());
  return spec_from_keys(keys);
}

std::string dataset_entry_name(const std::string& entry) {
  const std::size_t eq = entry.find('=');
  if (eq != std::string::npos) return entry.substr(0, eq);
  if (entry.size() > 5 && (entry.ends_with(".arff") || entry.ends_with(".csv")))
    return std::filesystem::path(entry).stem().string();
  return entry;
}

std::map<std::string, Dataset> load_datasets(const std::vector<std::string>& entries, const std::string& data_dir,
                                             int label_count, LabelLayout layout) {
  namespace fs = std::filesystem;
  std::map<std::string, Dataset> out;
  for (const std::string& entry : entries) {
    const std::string name = dataset_entry_name(entry);
    std::string path, xml;
    const std::size_t eq = entry.find('=');
    if (eq != std::string::npos) {
      path = entry.substr(eq + 1);
      const std::size_t colon = path.find(':');
      if (colon != std::string::npos) {
        xml = path.substr(colon + 1);
        path = path.substr(0, colon);
      }
    } else if (entry.size() > 5 && (entry.ends_with(".arff") || entry.ends_with(".csv"))) {
      path = entry;
    } else {
      const fs::path arff = fs::path(data_dir) / (entry + ".arff");
      const fs::path csv = fs::path(data_dir) / (entry + ".csv");
      if (fs::exists(arff)) {
        path = arff.string();
        const fs::path header = fs::path(data_dir) / (entry + ".xml");
        if (fs::exists(header)) xml = header.string();
      } else if (fs::exists(csv)) {
        path = csv.string();
      } else {
        throw ArffError(arff.string(), 0,
                        "dataset '" + entry + "' not found (tried " + arff.string() + " and " + csv.string() + ")");
      }
    }

    if (!fs::exists(path)) throw ArffError(path, 0, "dataset file does not exist");
    Dataset ds;
    if (path.ends_with(".csv")) {
      ds = read_dataset_csv(path, name);
    } else if (!xml.empty()) {
      ds = parse_arff(path, xml);
    } else if (label_count > 0) {
      ds = parse_arff_counted(path, label_count, layout);
    } else {
      throw ArffError(path, 0,
                      "dataset '" + name + "' has no XML label header; pass --labels K (and --layout) instead");
    }
    ds.name = name;
    if (!out.emplace(name, std::move(ds)).second)
      throw std::invalid_argument("two dataset entries share the name '" + name + "'");
  }
  return out;
}

namespace {

std::string format_score(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_results_csv(const ResultTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "dataset,ensemble,strategy,loss,fold,score\n";
  for (const auto& cell : table.cells) {
    if (cell.missing) continue;
    for (std::size_t fold = 0; fold < cell.fold_scores.size(); ++fold)
      out << cell.dataset << ',' << learner_name(cell.learner) << ',' << strategy_name(cell.strategy) << ','
          << loss_name(cell.loss) << ',' << fold << ',' << format_g17(cell.fold_scores[fold]) << '\n';
  }
}

namespace {

// Mean rank per strategy over the datasets where every strategy has a score;
// empty when no dataset is complete or there is nothing to rank against.
struct GroupRanks {
  std::vector<std::string> datasets_used;
  std::vector<double> mean_ranks;                  // per spec.strategies order
  std::vector<std::vector<double>> rank_rows;      // per used dataset
};

GroupRanks group_ranks(const ResultTable& table, LearnerKind learner, LossKind loss) {
  GroupRanks g;
  if (table.spec.strategies.size() < 2) return g;
  for (const auto& dataset : table.spec.datasets) {
    std::vector<double> scores;
    bool complete = true;
    for (StrategyKind s : table.spec.strategies) {
      const ResultCell* cell = table.find(dataset, learner, s, loss);
      if (cell == nullptr || cell->missing) {
        complete = false;
        break;
      }
      scores.push_back(cell->mean_percent);
    }
    if (!complete) continue;
    g.datasets_used.push_back(dataset);
    g.rank_rows.push_back(compute_ranks(scores, higher_is_better(loss)));
  }
  if (!g.rank_rows.empty()) {
    g.mean_ranks.assign(table.spec.strategies.size(), 0.0);
    for (const auto& row : g.rank_rows)
      for (std::size_t j = 0; j < row.size(); ++j) g.mean_ranks[j] += row[j];
    for (auto& r : g.mean_ranks) r /= static_cast<double>(g.rank_rows.size());
  }
  return g;
}

}  // namespace

void write_summary_json(const ResultTable& table, const std::string& path, double alpha) {
  json j;
  j["spec"] = {{"datasets", table.spec.datasets},
               {"m", table.spec.ensemble_size},
               {"folds", table.spec.folds},
               {"repeats", table.spec.repeats},
               {"seed", table.spec.seed}};
  {
    std::vector<std::string> names;
    for (LearnerKind k : table.spec.learners) names.emplace_back(learner_name(k));
    j["spec"]["ensembles"] = names;
    names.clear();
    for (StrategyKind s : table.spec.strategies) names.emplace_back(strategy_name(s));
    j["spec"]["strategies"] = names;
    names.clear();
    for (LossKind l : table.spec.losses) names.emplace_back(loss_name(l));
    j["spec"]["losses"] = names;
  }

  json cells = json::array();
  for (const auto& cell : table.cells) {
    json c = {{"dataset", cell.dataset},
              {"ensemble", learner_name(cell.learner)},
              {"strategy", strategy_name(cell.strategy)},
              {"loss", loss_name(cell.loss)}};
    if (cell.missing) {
      c["missing"] = true;
      c["error"] = cell.error;
    } else {
      c["mean_percent"] = cell.mean_percent;
      c["fold_scores"] = cell.fold_scores;
    }
    cells.push_back(std::move(c));
  }
  j["cells"] = std::move(cells);

  json groups = json::array();
  for (LearnerKind learner : table.spec.learners) {
    for (LossKind loss : table.spec.losses) {
      const GroupRanks g = group_ranks(table, learner, loss);
      if (g.rank_rows.empty()) continue;
      json group = {{"ensemble", learner_name(learner)},
                    {"loss", loss_name(loss)},
                    {"datasets", g.datasets_used},
                    {"n", g.rank_rows.size()}};
      json ranks = json::object();
      for (std::size_t s = 0; s < table.spec.strategies.size(); ++s)
        ranks[strategy_name(table.spec.strategies[s])] = g.mean_ranks[s];
      group["mean_ranks"] = std::move(ranks);
      if (g.rank_rows.size() >= 2 && table.spec.strategies.size() >= 2 &&
          table.spec.strategies.size() - 1 <= 9) {
        const FriedmanResult f = friedman_test(g.rank_rows, alpha);
        group["friedman"] = {{"statistic", f.statistic},
                             {"critical_value", f.critical_value},
                             {"df", f.degrees_of_freedom},
                             {"reject", f.reject},
                             {"alpha", alpha}};
      }
      const int m = static_cast<int>(table.spec.strategies.size());
      if (m >= 2 && m <= 10)
        group["nemenyi_cd"] = nemenyi_cd(m, static_cast<int>(g.rank_rows.size()), alpha);
      groups.push_back(std::move(group));
    }
  }
  j["groups"] = std::move(groups);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

void write_table_markdown(const ResultTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (LearnerKind learner : table.spec.learners) {
    for (LossKind loss : table.spec.losses) {
      out << "## " << learner_name(learner) << " / " << loss_name(loss)
          << (higher_is_better(loss) ? " (higher is better)" : " (lower is better)") << "\n\n";
      out << "| strategy |";
      for (const auto& dataset : table.spec.datasets) out << ' ' << dataset << " |";
      out << "\n|---|";
      for (std::size_t i = 0; i < table.spec.datasets.size(); ++i) out << "---|";
      out << '\n';

      // Per-dataset ranks over the strategies with scores.
      std::map<std::string, std::vector<double>> ranks;
      for (const auto& dataset : table.spec.datasets) {
        std::vector<double> scores;
        bool complete = true;
        for (StrategyKind s : table.spec.strategies) {
          const ResultCell* cell = table.find(dataset, learner, s, loss);
          if (cell == nullptr || cell->missing) {
            complete = false;
            break;
          }
          scores.push_back(cell->mean_percent);
        }
        if (complete && scores.size() >= 2)
          ranks[dataset] = compute_ranks(scores, higher_is_better(loss));
      }

      for (std::size_t si = 0; si < table.spec.strategies.size(); ++si) {
        const StrategyKind s = table.spec.strategies[si];
        out << "| " << strategy_name(s) << " |";
        for (const auto& dataset : table.spec.datasets) {
          const ResultCell* cell = table.find(dataset, learner, s, loss);
          if (cell == nullptr || cell->missing) {
            out << " — |";
          } else {
            out << ' ' << format_score(cell->mean_percent, 2);
            const auto r = ranks.find(dataset);
            if (r != ranks.end()) out << " (" << format_score(r->second[si], 1) << ")";
            out << " |";
          }
        }
        out << '\n';
      }
      out << '\n';
    }
  }
}

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "dataset,ensemble,strategy,loss,size,score\n";
  for (const auto& p : points)
    out << p.dataset << ',' << learner_name(p.learner) << ',' << strategy_name(p.strategy) << ','
        << loss_name(p.loss) << ',' << p.size << ',' << format_g17(p.mean_percent) << '\n';
}

}  // namespace mlens
