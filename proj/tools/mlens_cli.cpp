// mlens command-line interface: cross-validated strategy grids, ensemble
// size sweeps, rank/test summaries, the three-label toy simulation, dataset
// conversion, and standalone aggregation of external probability matrices.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration/usage error,
// 3 data error.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "mlens/experiments.hpp"

namespace fs = std::filesystem;
using namespace mlens;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_runtime = 1;
constexpr int exit_usage = 2;
constexpr int exit_data = 3;

int guarded(const std::function<void()>& body) {
  try {
    body();
    return exit_ok;
  } catch (const ArffError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return exit_data;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_runtime;
  }
}

std::string format2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream stream(s);
  std::string item;
  while (std::getline(stream, item, ',')) {
    const std::size_t a = item.find_first_not_of(" \t");
    if (a == std::string::npos) continue;
    const std::size_t b = item.find_last_not_of(" \t");
    out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

// Common experiment flags shared by `run` and `sweep`.
struct SpecFlags {
  std::string config;
  std::vector<std::string> datasets;
  std::string data_dir = "data";
  int labels = 0;
  std::string layout = "trailing";
  std::vector<std::string> ensembles;
  int m = -1;
  int folds = -1;
  int repeats = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string strategies, losses;
  std::vector<std::string> sets;
  int threads = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "key=value experiment config file");
    cmd->add_option("--dataset", datasets,
                    "dataset name in --data-dir, a .arff/.csv path, or name=path[:xml] (repeatable)");
    cmd->add_option("--data-dir", data_dir, "directory with <name>.arff/<name>.xml/<name>.csv files")
        ->capture_default_str();
    cmd->add_option("--labels", labels, "label count for ARFF files without an XML header");
    cmd->add_option("--layout", layout, "label position for --labels: trailing or leading")
        ->check(CLI::IsMember({"trailing", "leading"}))
        ->capture_default_str();
    cmd->add_option("--ensemble", ensembles, "ensemble kind: ebr, ecc or emodt (repeatable)");
    cmd->add_option("--m", m, "ensemble size");
    cmd->add_option("--folds", folds, "cross-validation folds");
    cmd->add_option("--repeats", repeats, "cross-validation repeats");
    cmd->add_option("--seed", seed, "base seed")->each([this](const std::string&) { seed_set = true; });
    cmd->add_option("--strategies", strategies, "comma list: gmv,bmv,ctp,ptc-lw,ptc-mode");
    cmd->add_option("--losses", losses, "comma list: hamming,subset,f1");
    cmd->add_option("--set", sets, "extra config override key=value (repeatable)");
    cmd->add_option("--threads", threads, "maximum worker threads (evaluation currently runs serially)");
  }

  ExperimentSpec build() const {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const std::string& kv : sets) {
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
      overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!datasets.empty()) {
      std::string joined;
      for (const auto& d : datasets) joined += (joined.empty() ? "" : ",") + d;
      overrides.emplace_back("datasets", joined);
    }
    if (!ensembles.empty()) {
      std::string joined;
      for (const auto& e : ensembles) joined += (joined.empty() ? "" : ",") + e;
      overrides.emplace_back("ensembles", joined);
    }
    if (m >= 0) overrides.emplace_back("m", std::to_string(m));
    if (folds >= 0) overrides.emplace_back("folds", std::to_string(folds));
    if (repeats >= 0) overrides.emplace_back("repeats", std::to_string(repeats));
    if (seed_set) overrides.emplace_back("seed", std::to_string(seed));
    if (!strategies.empty()) overrides.emplace_back("strategies", strategies);
    if (!losses.empty()) overrides.emplace_back("losses", losses);

    ExperimentSpec spec =
        config.empty() ? spec_from_keys(overrides) : parse_spec_config(config, overrides);
    if (spec.datasets.empty()) throw std::invalid_argument("no datasets given (use --dataset or the config file)");
    if (threads < 0) throw std::invalid_argument("--threads must be >= 0");
    return spec;
  }

  LabelLayout label_layout() const {
    return layout == "leading" ? LabelLayout::Leading : LabelLayout::Trailing;
  }
};

void print_table(const ResultTable& table) {
  for (LearnerKind learner : table.spec.learners) {
    for (const auto& dataset : table.spec.datasets) {
      std::cout << dataset << " / " << learner_name(learner) << " (M=" << table.spec.ensemble_size << ", "
                << table.spec.folds << "-fold";
      if (table.spec.repeats > 1) std::cout << " x" << table.spec.repeats;
      std::cout << ", seed " << table.spec.seed << ")\n";
      std::cout << "  strategy   |";
      for (LossKind loss : table.spec.losses) std::cout << ' ' << loss_name(loss) << " % |";
      std::cout << '\n';
      for (StrategyKind s : table.spec.strategies) {
        std::printf("  %-10s |", strategy_name(s));
        for (LossKind loss : table.spec.losses) {
          const ResultCell* cell = table.find(dataset, learner, s, loss);
          if (cell == nullptr || cell->missing) {
            std::cout << "     — |";
          } else {
            std::printf(" %9s |", format2(cell->mean_percent).c_str());
          }
        }
        std::cout << '\n';
      }
      std::cout << '\n';
    }
  }
}

int cmd_run(const SpecFlags& flags, const std::string& out_dir, double alpha) {
  return guarded([&] {
    ExperimentSpec spec = flags.build();
    const auto datasets = load_datasets(spec.datasets, flags.data_dir, flags.labels, flags.label_layout());
    for (auto& entry : spec.datasets) entry = dataset_entry_name(entry);
    const ResultTable table = run_grid(spec, datasets);
    fs::create_directories(out_dir);
    write_results_csv(table, (fs::path(out_dir) / "results.csv").string());
    write_summary_json(table, (fs::path(out_dir) / "summary.json").string(), alpha);
    write_table_markdown(table, (fs::path(out_dir) / "table.md").string());
    print_table(table);
    bool any_missing = false;
    for (const auto& cell : table.cells) any_missing |= cell.missing;
    if (any_missing) throw std::runtime_error("some grid cells failed; see summary.json");
    std::cout << "wrote " << out_dir << "/results.csv, summary.json, table.md\n";
  });
}

int cmd_sweep(const SpecFlags& flags, const std::string& sizes_text, const std::string& out_dir) {
  return guarded([&] {
    std::vector<int> sizes;
    for (const std::string& s : split_commas(sizes_text)) {
      try {
        sizes.push_back(std::stoi(s));
      } catch (...) {
        throw std::invalid_argument("--sizes expects integers, got '" + s + "'");
      }
    }
    if (sizes.empty()) throw std::invalid_argument("--sizes is empty");
    ExperimentSpec spec = flags.build();
    const auto datasets = load_datasets(spec.datasets, flags.data_dir, flags.labels, flags.label_layout());
    for (auto& entry : spec.datasets) entry = dataset_entry_name(entry);
    const auto points = size_sweep(spec, sizes, datasets);
    fs::create_directories(out_dir);
    write_sweep_csv(points, (fs::path(out_dir) / "sweep.csv").string());
    for (const auto& p : points)
      std::cout << p.dataset << ' ' << learner_name(p.learner) << ' ' << strategy_name(p.strategy) << ' '
                << loss_name(p.loss) << " M=" << p.size << ' ' << format2(p.mean_percent) << '\n';
    std::cout << "wrote " << out_dir << "/sweep.csv\n";
  });
}

int cmd_ranks(const std::vector<std::string>& results_files, double alpha, const std::string& out_file) {
  return guarded([&] {
    // Rebuild mean scores per (dataset, ensemble, strategy, loss) from the
    // long-format CSVs, then rank strategies per dataset within each
    // (ensemble, loss) group.
    struct Acc {
      double sum = 0.0;
      int n = 0;
    };
    std::map<std::string, std::map<std::string, std::map<std::string, std::map<std::string, Acc>>>> acc;
    std::vector<std::string> dataset_order, strategy_order, learner_order, loss_order;
    auto remember = [](std::vector<std::string>& order, const std::string& v) {
      if (std::find(order.begin(), order.end(), v) == order.end()) order.push_back(v);
    };

    for (const std::string& file : results_files) {
      std::ifstream in(file);
      if (!in) throw ArffError(file, 0, "cannot open results file");
      std::string line;
      int line_no = 0;
      if (!std::getline(in, line)) throw ArffError(file, 1, "empty results file");
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line != "dataset,ensemble,strategy,loss,fold,score")
        throw ArffError(file, 1, "unexpected header '" + line + "'");
      while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells = split_commas(line);
        if (cells.size() != 6) throw ArffError(file, line_no, "expected 6 columns");
        try {
          const double score = std::stod(cells[5]);
          auto& a = acc[cells[1]][cells[3]][cells[0]][cells[2]];
          a.sum += score;
          a.n += 1;
        } catch (const ArffError&) {
          throw;
        } catch (...) {
          throw ArffError(file, line_no, "bad score '" + cells[5] + "'");
        }
        remember(dataset_order, cells[0]);
        remember(learner_order, cells[1]);
        remember(strategy_order, cells[2]);
        remember(loss_order, cells[3]);
      }
    }
    if (acc.empty()) throw ArffError(results_files.front(), 0, "no result rows");

    nlohmann::json out = nlohmann::json::array();
    for (const std::string& learner : learner_order) {
      for (const std::string& loss : loss_order) {
        if (acc[learner].find(loss) == acc[learner].end()) continue;
        auto& per_dataset = acc[learner][loss];
        std::vector<std::vector<double>> rank_rows;
        std::vector<std::string> used;
        for (const std::string& dataset : dataset_order) {
          const auto it = per_dataset.find(dataset);
          if (it == per_dataset.end()) continue;
          std::vector<double> scores;
          bool complete = true;
          for (const std::string& strategy : strategy_order) {
            const auto hit = it->second.find(strategy);
            if (hit == it->second.end() || hit->second.n == 0) {
              complete = false;
              break;
            }
            scores.push_back(hit->second.sum / hit->second.n);
          }
          if (!complete) continue;
          used.push_back(dataset);
          rank_rows.push_back(compute_ranks(scores, loss_from_name(loss) == LossKind::FMeasure));
        }
        if (rank_rows.empty()) continue;
        std::vector<double> mean_ranks(strategy_order.size(), 0.0);
        for (const auto& row : rank_rows)
          for (std::size_t j = 0; j < row.size(); ++j) mean_ranks[j] += row[j];
        for (auto& r : mean_ranks) r /= static_cast<double>(rank_rows.size());

        nlohmann::json group = {{"ensemble", learner}, {"loss", loss}, {"datasets", used}, {"n", rank_rows.size()}};
        nlohmann::json ranks = nlohmann::json::object();
        for (std::size_t j = 0; j < strategy_order.size(); ++j) ranks[strategy_order[j]] = mean_ranks[j];
        group["mean_ranks"] = std::move(ranks);
        const int m = static_cast<int>(strategy_order.size());
        if (rank_rows.size() >= 2 && m >= 2 && m - 1 <= 9) {
          const FriedmanResult f = friedman_test(rank_rows, alpha);
          group["friedman"] = {{"statistic", f.statistic},
                               {"critical_value", f.critical_value},
                               {"df", f.degrees_of_freedom},
                               {"reject", f.reject},
                               {"alpha", alpha}};
        }
        if (m >= 2 && m <= 10) group["nemenyi_cd"] = nemenyi_cd(m, static_cast<int>(rank_rows.size()), alpha);
        out.push_back(std::move(group));
      }
    }
    const std::string text = out.dump(2) + "\n";
    std::cout << text;
    if (!out_file.empty()) {
      std::ofstream f(out_file);
      if (!f) throw std::runtime_error("cannot write " + out_file);
      f << text;
    }
  });
}

int cmd_toy(int m, std::uint64_t seed, int trials) {
  return guarded([&] {
    const JointDistribution truth = toy_distribution();
    const LabelVector all_ones = LabelVector::Constant(3, 1);
    const LabelVector all_zeros = LabelVector::Zero(3);

    int label_wise_ones = 0, mode_zeros = 0;
    ToyResult last;
    for (int t = 0; t < trials; ++t) {
      last = simulate_toy(m, derive_seed(seed, "trial", t));
      if ((last.label_wise == all_ones).all()) ++label_wise_ones;
      if ((last.mode == all_zeros).all()) ++mode_zeros;
    }

    auto show = [](const LabelVector& y) {
      std::string s = "(";
      for (Eigen::Index i = 0; i < y.size(); ++i) s += (i ? "," : "") + std::to_string(y[i]);
      return s + ")";
    };
    if (trials == 1) {
      std::cout << "label-wise vote: " << show(last.label_wise) << "  expected subset loss "
                << format2(last.label_wise_subset) << ", expected hamming loss " << format2(last.label_wise_hamming)
                << '\n';
      std::cout << "mode vote:       " << show(last.mode) << "  expected subset loss " << format2(last.mode_subset)
                << ", expected hamming loss " << format2(last.mode_hamming) << '\n';
    } else {
      std::cout << "trials: " << trials << "  M: " << m << '\n';
      std::cout << "label-wise vote = (1,1,1): " << label_wise_ones << "/" << trials << '\n';
      std::cout << "mode vote       = (0,0,0): " << mode_zeros << "/" << trials << '\n';
    }
    std::cout << "truth: subset loss of (0,0,0) = "
              << format2(expected_loss(truth, all_zeros, LossKind::SubsetZeroOne)) << ", of (1,1,1) = "
              << format2(expected_loss(truth, all_ones, LossKind::SubsetZeroOne)) << '\n';
    std::cout << "truth: hamming loss of (1,1,1) = "
              << format2(expected_loss(truth, all_ones, LossKind::Hamming)) << ", of (0,0,0) = "
              << format2(expected_loss(truth, all_zeros, LossKind::Hamming)) << '\n';
  });
}

int cmd_convert(const std::string& in_path, const std::string& xml, int labels, const std::string& layout,
                const std::string& out_path) {
  return guarded([&] {
    Dataset ds;
    if (in_path.ends_with(".csv")) {
      ds = read_dataset_csv(in_path, fs::path(in_path).stem().string());
    } else if (!xml.empty()) {
      ds = parse_arff(in_path, xml);
    } else if (labels > 0) {
      ds = parse_arff_counted(in_path, labels, layout == "leading" ? LabelLayout::Leading : LabelLayout::Trailing);
    } else {
      throw std::invalid_argument("convert needs --xml or --labels for ARFF input");
    }
    write_dataset_csv(ds, out_path);
    std::cout << "wrote " << out_path << " (" << ds.rows() << " rows, " << ds.features.cols() << " features, "
              << ds.num_labels() << " labels)\n";
  });
}

int cmd_aggregate_file(const std::vector<std::string>& files, const std::string& strategy_name_text,
                       const std::string& loss_name_text, const std::string& out_path) {
  return guarded([&] {
    const Strategy strategy{strategy_from_name(strategy_name_text), loss_from_name(loss_name_text)};
    std::vector<Eigen::MatrixXd> matrices;
    for (const std::string& file : files) {
      Eigen::MatrixXd m = read_matrix(file);
      if (!matrices.empty() && (m.rows() != matrices.front().rows() || m.cols() != matrices.front().cols()))
        throw ArffError(file, 0,
                        "shape " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                            " does not match first member file (" + std::to_string(matrices.front().rows()) + "x" +
                            std::to_string(matrices.front().cols()) + ")");
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
          if (!(m(r, c) >= 0.0 && m(r, c) <= 1.0))
            throw ArffError(file, 0,
                            "probability " + std::to_string(m(r, c)) + " at row " + std::to_string(r + 1) +
                                ", column " + std::to_string(c + 1) + " is outside [0,1]");
      matrices.push_back(std::move(m));
    }

    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    for (Eigen::Index r = 0; r < matrices.front().rows(); ++r) {
      std::vector<MarginalVector> members;
      members.reserve(matrices.size());
      for (const auto& m : matrices) members.push_back(m.row(r).transpose().array());
      const LabelVector pred = aggregate_members(strategy, members);
      for (Eigen::Index c = 0; c < pred.size(); ++c) out << (c ? "," : "") << pred[c];
      out << '\n';
    }
    std::cout << "wrote " << out_path << " (" << matrices.front().rows() << " rows)\n";
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multilabel ensemble aggregation toolkit"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "cross-validated strategy/loss grid on datasets");
  SpecFlags run_flags;
  run_flags.attach(run);
  std::string run_out = "out";
  double run_alpha = 0.05;
  run->add_option("--out", run_out, "output directory")->capture_default_str();
  run->add_option("--alpha", run_alpha, "significance level for the summary (0.05 or 0.10)")->capture_default_str();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "ensemble-size curves (nested member prefixes)");
  SpecFlags sweep_flags;
  sweep_flags.attach(sweep);
  std::string sweep_sizes, sweep_out = "out";
  sweep->add_option("--sizes", sweep_sizes, "ascending comma list of ensemble sizes, e.g. 1,5,10,20,50")->required();
  sweep->add_option("--out", sweep_out, "output directory")->capture_default_str();

  // ranks
  auto* ranks = app.add_subcommand("ranks", "mean ranks + Friedman/Nemenyi from results.csv files");
  std::vector<std::string> ranks_files;
  std::string ranks_out;
  double ranks_alpha = 0.05;
  ranks->add_option("results", ranks_files, "results.csv files (long format)")->required();
  ranks->add_option("--alpha", ranks_alpha, "significance level (0.05 or 0.10)")->capture_default_str();
  ranks->add_option("--out", ranks_out, "also write the JSON summary here");

  // toy
  auto* toy = app.add_subcommand("toy", "three-label toy simulation: label-wise vote vs mode vote");
  int toy_m = 10000, toy_trials = 1;
  std::uint64_t toy_seed = 1;
  toy->add_option("--m", toy_m, "members per trial")->check(CLI::PositiveNumber)->capture_default_str();
  toy->add_option("--seed", toy_seed, "base seed")->capture_default_str();
  toy->add_option("--trials", toy_trials, "number of independent trials")->check(CLI::PositiveNumber)->capture_default_str();

  // convert
  auto* convert = app.add_subcommand("convert", "convert ARFF (+ optional XML header) or CSV to interchange CSV");
  std::string convert_in, convert_xml, convert_layout = "trailing", convert_out;
  int convert_labels = 0;
  convert->add_option("--in", convert_in, "input .arff or .csv file")->required();
  convert->add_option("--xml", convert_xml, "XML label header for ARFF input");
  convert->add_option("--labels", convert_labels, "label count for ARFF input without a header");
  convert->add_option("--layout", convert_layout, "trailing or leading (with --labels)")
      ->check(CLI::IsMember({"trailing", "leading"}))
      ->capture_default_str();
  convert->add_option("--out", convert_out, "output CSV path")->required();

  // aggregate-file
  auto* agg = app.add_subcommand("aggregate-file", "aggregate externally produced per-member probability matrices");
  std::vector<std::string> agg_files;
  std::string agg_strategy, agg_loss = "hamming", agg_out;
  agg->add_option("members", agg_files, "one matrix file per member (rows x K probabilities)")->required();
  agg->add_option("--strategy", agg_strategy, "gmv, bmv, ctp, ptc-lw or ptc-mode")->required();
  agg->add_option("--loss", agg_loss, "target loss: hamming, subset or f1")->capture_default_str();
  agg->add_option("--out", agg_out, "output predictions CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }

  if (run->parsed()) return cmd_run(run_flags, run_out, run_alpha);
  if (sweep->parsed()) return cmd_sweep(sweep_flags, sweep_sizes, sweep_out);
  if (ranks->parsed()) return cmd_ranks(ranks_files, ranks_alpha, ranks_out);
  if (toy->parsed()) return cmd_toy(toy_m, toy_seed, toy_trials);
  if (convert->parsed()) return cmd_convert(convert_in, convert_xml, convert_labels, convert_layout, convert_out);
  if (agg->parsed()) return cmd_aggregate_file(agg_files, agg_strategy, agg_loss, agg_out);
  return exit_usage;
}
