#pragma once

// Dataset ingestion: ARFF matrices (dense and sparse rows, numeric and
// nominal attributes) with the label set designated either by a MULAN-style
// XML header or by a leading/trailing-K convention, plus a CSV interchange
// format, preprocessing (z-scoring fitted on training folds) and fold
// splitting.

#include <cstdint>
#include <string>
#include <vector>

#include "mlens/types.hpp"

namespace mlens {

// Parse failure with location; what() reads "file:line: message".
class ArffError : public std::runtime_error {
 public:
  ArffError(std::string file, int line, const std::string& message)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + message),
        file_(std::move(file)),
        line_(line),
        message_(message) {}
  const std::string& file() const { return file_; }
  int line() const { return line_; }
  const std::string& message() const { return message_; }

 private:
  std::string file_;
  int line_;
  std::string message_;
};

struct Dataset {
  std::string name;
  Eigen::MatrixXd features;  // encoded; NaN marks a missing numeric value
  Eigen::MatrixXi labels;    // strictly 0/1
  std::vector<std::string> feature_names;     // post-encoding column names
  std::vector<bool> feature_numeric_origin;   // true: came from a numeric attribute (z-scored)
  std::vector<std::string> label_names;
  int raw_numeric_attributes = 0;  // feature attributes in the source file
  int raw_nominal_attributes = 0;
  std::string provenance;

  Eigen::Index rows() const { return features.rows(); }
  int num_labels() const { return static_cast<int>(labels.cols()); }
};

enum class LabelLayout { Trailing, Leading };

// ARFF + MULAN XML label header.
Dataset parse_arff(const std::string& arff_path, const std::string& xml_path);
// ARFF with the first/last label_count attributes as labels.
Dataset parse_arff_counted(const std::string& arff_path, int label_count, LabelLayout layout);

// Label names listed in a MULAN XML header, in file order.
std::vector<std::string> parse_label_header(const std::string& xml_path);

// CSV interchange: header row of column names, label columns prefixed
// "label:", one-hot feature columns prefixed "onehot:"; feature cells
// printed with %.17g so matrices round-trip exactly.
void write_dataset_csv(const Dataset& dataset, const std::string& path);
Dataset read_dataset_csv(const std::string& path, const std::string& name);

// Headerless numeric matrix (comma or whitespace separated), for externally
// produced per-member probability files.
Eigen::MatrixXd read_matrix(const std::string& path);

// Fitted on a training fold; applies the identical transform to held-out
// rows: numeric-origin columns are mean-imputed and z-scored with training
// statistics (constant columns collapse to 0), other columns pass through.
struct Standardizer {
  Eigen::ArrayXd mean;   // per column; 0 for pass-through columns
  Eigen::ArrayXd scale;  // per column; 1 for pass-through columns
  std::vector<bool> transformed;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

Standardizer fit_standardizer(const Dataset& dataset, const std::vector<int>& train_indices);

struct FoldPlan {
  int k = 0;
  std::vector<int> assignments;  // per instance, in [0, k)
  std::uint64_t seed = 0;
  int repeat_index = 0;

  std::vector<int> train_indices(int fold) const;
  std::vector<int> test_indices(int fold) const;
};

// `repeats` independent shuffled k-fold partitions; fold sizes differ by at
// most one.
std::vector<FoldPlan> split_folds(Eigen::Index n, int k, std::uint64_t seed, int repeats);

}  // namespace mlens
