#pragma once

// Experiment harness: cross-validated (learner x strategy x loss) grids with
// percent scores, fractional ranks, Friedman/Nemenyi statistics, ensemble
// size sweeps, and the three-label toy simulation contrasting label-wise
// voting with mode voting.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mlens/dataio.hpp"
#include "mlens/learners.hpp"

namespace mlens {

struct ExperimentSpec {
  std::vector<std::string> datasets;  // keys into the dataset map handed to run_grid
  std::vector<LearnerKind> learners{LearnerKind::EMODT};
  int ensemble_size = 50;
  std::vector<StrategyKind> strategies{StrategyKind::GMV, StrategyKind::BMV, StrategyKind::CTP,
                                       StrategyKind::PTC_LW, StrategyKind::PTC_MODE};
  std::vector<LossKind> losses{LossKind::Hamming, LossKind::SubsetZeroOne, LossKind::FMeasure};
  int folds = 10;
  int repeats = 1;
  std::uint64_t seed = 1;
  LearnerConfig learner_config;
};

struct ResultCell {
  std::string dataset;
  LearnerKind learner;
  StrategyKind strategy;
  LossKind loss;
  bool missing = false;
  std::string error;                // set when missing
  double mean_percent = 0.0;        // loss in percent (F-measure: score in percent)
  std::vector<double> fold_scores;  // percent, per (repeat, fold)
};

struct ResultTable {
  ExperimentSpec spec;
  std::vector<ResultCell> cells;

  const ResultCell* find(const std::string& dataset, LearnerKind learner, StrategyKind strategy,
                         LossKind loss) const;
};

// Percent metric for one (truth, prediction) pair under the given loss:
// Hamming/subset report the loss, FMeasure reports the score.
double metric_percent(LossKind loss, const LabelVector& y, const LabelVector& yhat);
// Whether larger metric_percent values are better for this loss.
bool higher_is_better(LossKind loss);

// Cross-validated grid: per fold, fit the preprocessing on the training
// split, train one ensemble per learner, and score every strategy under
// every loss on the held-out split; scores are averaged over instances then
// folds (and repeats). A failing cell is recorded as missing, not fatal.
ResultTable run_grid(const ExperimentSpec& spec, const std::map<std::string, Dataset>& datasets);

// Fractional ranks, rank 1 = best; ties share the mean of their positions.
std::vector<double> compute_ranks(const std::vector<double>& scores, bool higher_better);

struct FriedmanResult {
  double statistic = 0.0;
  double critical_value = 0.0;
  int degrees_of_freedom = 0;
  bool reject = false;
};

// Classical chi-square Friedman test on an N-dataset x m-method rank matrix;
// alpha in {0.05, 0.10}, m - 1 <= 9 (embedded critical values).
FriedmanResult friedman_test(const std::vector<std::vector<double>>& rank_matrix, double alpha);

// Nemenyi critical distance q_alpha(m) * sqrt(m (m+1) / (6 N)).
double nemenyi_cd(int methods, int datasets, double alpha);

struct SweepPoint {
  std::string dataset;
  LearnerKind learner;
  StrategyKind strategy;
  LossKind loss;
  int size = 0;
  double mean_percent = 0.0;
};

// Ensemble-size curves via nested prefixes: the largest ensemble is trained
// once per fold and each size evaluates its first members, so the final
// point coincides with a run_grid at that size and seed.
std::vector<SweepPoint> size_sweep(const ExperimentSpec& spec, const std::vector<int>& sizes,
                                   const std::map<std::string, Dataset>& datasets);

// The worked three-label example: a 5-point ground-truth distribution whose
// joint mode (0,0,0) disagrees with its marginal thresholding (1,1,1).
JointDistribution toy_distribution();

struct ToyResult {
  LabelVector label_wise;  // ptc_label_wise of the sampled members
  LabelVector mode;        // ptc_mode of the sampled members
  double label_wise_subset = 0.0, label_wise_hamming = 0.0;  // expected losses under the truth
  double mode_subset = 0.0, mode_hamming = 0.0;
};

// Draws M member predictions i.i.d. from toy_distribution() and aggregates
// them both ways, reporting each output's expected losses under the truth.
ToyResult simulate_toy(int ensemble_size, std::uint64_t seed);

// Flat key=value config file (# comments, dotted keys); overrides merge on
// top. Unknown keys are an error naming the key.
ExperimentSpec parse_spec_config(const std::string& path,
                                 const std::vector<std::pair<std::string, std::string>>& overrides = {});
ExperimentSpec spec_from_keys(const std::vector<std::pair<std::string, std::string>>& keys);

// Dataset source resolution for the CLI: each entry of spec.datasets is
// looked up in data_dir as <name>.arff [+ <name>.xml] or taken verbatim when
// it is a path; .csv files load through the interchange reader. An entry
// "name=path[:xml]" binds an explicit file. label_count/layout apply to
// ARFF files without an XML header.
std::map<std::string, Dataset> load_datasets(const std::vector<std::string>& entries, const std::string& data_dir,
                                             int label_count, LabelLayout layout);
// Name under which load_datasets files an entry ("name=..." binding, path
// stem, or the entry itself); grid specs must refer to datasets by this name.
std::string dataset_entry_name(const std::string& entry);

// Output writers.
void write_results_csv(const ResultTable& table, const std::string& path);
void write_summary_json(const ResultTable& table, const std::string& path, double alpha);
void write_table_markdown(const ResultTable& table, const std::string& path);
void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path);

StrategyKind strategy_from_name(const std::string& name);
LossKind loss_from_name(const std::string& name);

}  // namespace mlens
