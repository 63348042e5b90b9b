#pragma once

// Gradient-boosted regression trees for acceleration models.
//
// Squared-error objective: for prediction p and target y the gradient is
// g = p − y and the hessian h = 1. Each round grows one tree by exact greedy
// search over all midpoints between consecutive distinct feature values,
// maximising
//
//     gain = ½ [ G_L²/(H_L+λ) + G_R²/(H_R+λ) − (G_L+G_R)²/(H_L+H_R+λ) ]
//
// subject to H_L, H_R >= min_child_weight. Leaves carry −G/(H+λ); a model
// predicts base_score + η·Σ leaf weights. Ties in gain go to the lower feature
// index, then the lower threshold. Rows with x < threshold go left.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace carfollow::gbt {

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<double> features;  // row-major, rows() × cols()
  std::vector<double> target;

  std::size_t rows() const { return target.size(); }
  std::size_t cols() const { return feature_names.size(); }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * cols(), cols()}; }
  double at(std::size_t r, std::size_t c) const { return features[r * cols() + c]; }

  void add_row(std::span<const double> x, double y);
};

// Throws DataError: non-finite entries, fewer than two rows, duplicate or
// malformed feature names, ragged storage.
void validate(const Dataset& ds);

struct SplitSpec {
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kMinSplitRows = 10;

// Seeded Fisher–Yates shuffle; floor(train_fraction·n) rows go to train, the
// rest to test, each in shuffled order. Throws DataError for n < 10.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, const SplitSpec& spec);

struct TrainParams {
  int rounds = 100;
  double learning_rate = 0.1;
  int max_depth = 6;
  double min_child_weight = 1.0;
  double reg_lambda = 1.0;
  double base_score = 0.5;
};

void validate(const TrainParams& params);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;
  int left = -1;
  int right = -1;
  double leaf_weight = 0;
  double gain = 0;  // split gain; 0 for leaves

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double leaf_value(std::span<const double> row) const;
  bool operator==(const Tree&) const = default;
};

struct BoostedModel {
  std::vector<std::string> feature_names;
  double base_score = 0.5;
  double learning_rate = 0.1;
  int max_depth = 6;
  double min_child_weight = 1.0;
  double reg_lambda = 1.0;
  std::vector<Tree> trees;
  std::vector<double> importance;  // total gain per feature index

  bool operator==(const BoostedModel&) const = default;
};

BoostedModel train(const Dataset& ds, const TrainParams& params = {});

// Throws SchemaError when the row width does not match the model.
double predict(const BoostedModel& model, std::span<const double> row);
std::vector<double> predict(const BoostedModel& model, const Dataset& ds);

// RMSE of predictions on ds. Throws DataError for an empty set and
// SchemaError when feature names differ.
double evaluate(const BoostedModel& model, const Dataset& ds);

// Descending gain; equal gains ordered by feature name.
std::vector<std::pair<std::string, double>> feature_importance(const BoostedModel& model);

// Relative floor below which a split's gain is treated as rounding noise:
// a split is accepted only when gain > kMinRelativeGain · Σ g² over the node.
inline constexpr double kMinRelativeGain = 1e-12;

// Text persistence; parse(format(m)) == m bit for bit.
std::string format_model(const BoostedModel& model);
BoostedModel parse_model(std::string_view text);
void write_model(const std::filesystem::path& path, const BoostedModel& model);
BoostedModel read_model(const std::filesystem::path& path);

}  // namespace carfollow::gbt
