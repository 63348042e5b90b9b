#include "carfollow/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "carfollow/errors.hpp"
#include "carfollow/text.hpp"

namespace carfollow::gbt {

namespace {

// Unbiased draw in [0, bound) by rejection; keeps shuffles identical across
// standard libraries, unlike std::uniform_int_distribution.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  while (true) {
    const std::uint64_t x = rng();
    if (x < limit) return x % bound;
  }
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> rows) {
  Dataset out;
  out.feature_names = ds.feature_names;
  out.features.reserve(rows.size() * ds.cols());
  out.target.reserve(rows.size());
  for (auto r : rows) out.add_row(ds.row(r), ds.target[r]);
  return out;
}

struct SplitCandidate {
  int feature = -1;
  double threshold = 0;
  double gain = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& ds, const TrainParams& params, std::span<const double> grad,
              const std::vector<std::vector<std::size_t>>& sorted_all)
      : ds_(ds), params_(params), grad_(grad), sorted_all_(sorted_all), leaf_of_(ds.rows(), 0) {}

  Tree build() {
    std::vector<std::size_t> rows(ds_.rows());
    std::iota(rows.begin(), rows.end(), 0);
    grow(rows, sorted_all_, 0);
    return tree_;
  }

  // Leaf weight reached by each training row.
  double leaf_weight_of(std::size_t row) const { return tree_.nodes[leaf_of_[row]].leaf_weight; }

 private:
  int grow(const std::vector<std::size_t>& rows, const std::vector<std::vector<std::size_t>>& sorted, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    double g_total = 0, g_sq = 0;
    for (auto r : rows) {
      g_total += grad_[r];
      g_sq += grad_[r] * grad_[r];
    }
    const double h_total = static_cast<double>(rows.size());

    SplitCandidate best;
    if (depth < params_.max_depth) best = find_split(sorted, g_total, h_total);
    if (best.feature < 0 || !(best.gain > kMinRelativeGain * g_sq)) {
      auto& node = tree_.nodes[id];
      node.leaf_weight = -g_total / (h_total + params_.reg_lambda);
      for (auto r : rows) leaf_of_[r] = static_cast<std::size_t>(id);
      return id;
    }

    const auto f = static_cast<std::size_t>(best.feature);
    std::vector<char> goes_left(ds_.rows(), 0);
    std::vector<std::size_t> left_rows, right_rows;
    for (auto r : rows) {
      if (ds_.at(r, f) < best.threshold) {
        goes_left[r] = 1;
        left_rows.push_back(r);
      } else {
        right_rows.push_back(r);
      }
    }
    std::vector<std::vector<std::size_t>> left_sorted(sorted.size()), right_sorted(sorted.size());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      left_sorted[k].reserve(left_rows.size());
      right_sorted[k].reserve(right_rows.size());
      for (auto r : sorted[k]) (goes_left[r] ? left_sorted[k] : right_sorted[k]).push_back(r);
    }

    tree_.nodes[id].feature = best.feature;
    tree_.nodes[id].threshold = best.threshold;
    tree_.nodes[id].gain = best.gain;
    const int left = grow(left_rows, left_sorted, depth + 1);
    const int right = grow(right_rows, right_sorted, depth + 1);
    tree_.nodes[id].left = left;
    tree_.nodes[id].right = right;
    return id;
  }

  SplitCandidate find_split(const std::vector<std::vector<std::size_t>>& sorted, double g_total,
                            double h_total) const {
    const double lambda = params_.reg_lambda;
    const double parent = g_total * g_total / (h_total + lambda);
    SplitCandidate best;
    for (std::size_t f = 0; f < sorted.size(); ++f) {
      const auto& order = sorted[f];
      double gl = 0, hl = 0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        gl += grad_[order[i]];
        hl += 1.0;
        const double x_here = ds_.at(order[i], f);
        const double x_next = ds_.at(order[i + 1], f);
        if (!(x_here < x_next)) continue;
        const double hr = h_total - hl;
        if (hl < params_.min_child_weight || hr < params_.min_child_weight) continue;
        const double gr = g_total - gl;
        const double gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent);
        if (best.feature < 0 || gain > best.gain) {
          double threshold = x_here + (x_next - x_here) / 2;
          if (!(threshold > x_here)) threshold = x_next;
          best = {static_cast<int>(f), threshold, gain};
        }
      }
    }
    return best;
  }

  const Dataset& ds_;
  const TrainParams& params_;
  std::span<const double> grad_;
  const std::vector<std::vector<std::size_t>>& sorted_all_;
  std::vector<std::size_t> leaf_of_;
  Tree tree_;
};

bool valid_feature_name(const std::string& name) {
  return !name.empty() && name.find_first_of(",=\n\r \t") == std::string::npos;
}

}  // namespace

void Dataset::add_row(std::span<const double> x, double y) {
  if (x.size() != cols()) throw SchemaError("row width does not match the dataset schema");
  features.insert(features.end(), x.begin(), x.end());
  target.push_back(y);
}

void validate(const Dataset& ds) {
  if (ds.cols() == 0) throw DataError("dataset has no features");
  std::set<std::string> seen;
  for (const auto& name : ds.feature_names) {
    if (!valid_feature_name(name)) throw DataError("invalid feature name '" + name + "'");
    if (!seen.insert(name).second) throw DataError("duplicate feature name '" + name + "'");
  }
  if (ds.features.size() != ds.rows() * ds.cols()) throw DataError("ragged feature matrix");
  if (ds.rows() < 2) throw DataError("dataset needs at least two rows");
  for (double v : ds.features) {
    if (!std::isfinite(v)) throw DataError("non-finite feature value");
  }
  for (double v : ds.target) {
    if (!std::isfinite(v)) throw DataError("non-finite target value");
  }
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0 && spec.train_fraction < 1)) throw ConfigError("train_fraction must lie in (0,1)");
  if (ds.rows() < kMinSplitRows) throw DataError("need at least 10 rows to split");
  std::vector<std::size_t> order(ds.rows());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(spec.seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[bounded(rng, i + 1)]);
  }
  const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(ds.rows())));
  const std::span<const std::size_t> all(order);
  return {subset(ds, all.first(n_train)), subset(ds, all.subspan(n_train))};
}

void validate(const TrainParams& p) {
  if (p.rounds < 1) throw ConfigError("rounds must be at least 1");
  if (!(p.learning_rate > 0 && p.learning_rate <= 1)) throw ConfigError("learning_rate must lie in (0,1]");
  if (p.max_depth < 1) throw ConfigError("max_depth must be positive");
  if (!(p.min_child_weight >= 0) || !std::isfinite(p.min_child_weight)) {
    throw ConfigError("min_child_weight must be non-negative");
  }
  if (!(p.reg_lambda >= 0) || !std::isfinite(p.reg_lambda)) throw ConfigError("reg_lambda must be non-negative");
  if (!std::isfinite(p.base_score)) throw ConfigError("base_score must be finite");
}

double Tree::leaf_value(std::span<const double> row) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right);
  }
  return nodes[i].leaf_weight;
}

BoostedModel train(const Dataset& ds, const TrainParams& params) {
  validate(params);
  validate(ds);
  BoostedModel model;
  model.feature_names = ds.feature_names;
  model.base_score = params.base_score;
  model.learning_rate = params.learning_rate;
  model.max_depth = params.max_depth;
  model.min_child_weight = params.min_child_weight;
  model.reg_lambda = params.reg_lambda;
  model.importance.assign(ds.cols(), 0.0);

  std::vector<std::vector<std::size_t>> sorted(ds.cols());
  for (std::size_t f = 0; f < ds.cols(); ++f) {
    auto& order = sorted[f];
    order.resize(ds.rows());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ds.at(a, f) < ds.at(b, f); });
  }

  std::vector<double> pred(ds.rows(), params.base_score);
  std::vector<double> grad(ds.rows());
  for (int round = 0; round < params.rounds; ++round) {
    for (std::size_t i = 0; i < ds.rows(); ++i) grad[i] = pred[i] - ds.target[i];
    TreeBuilder builder(ds, params, grad, sorted);
    Tree tree = builder.build();
    for (std::size_t i = 0; i < ds.rows(); ++i) pred[i] += params.learning_rate * builder.leaf_weight_of(i);
    for (const auto& node : tree.nodes) {
      if (!node.is_leaf()) model.importance[static_cast<std::size_t>(node.feature)] += node.gain;
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

double predict(const BoostedModel& model, std::span<const double> row) {
  if (row.size() != model.feature_names.size()) throw SchemaError("row width does not match the model schema");
  double sum = 0;
  for (const auto& tree : model.trees) sum += tree.leaf_value(row);
  return model.base_score + model.learning_rate * sum;
}

std::vector<double> predict(const BoostedModel& model, const Dataset& ds) {
  if (ds.feature_names != model.feature_names) throw SchemaError("dataset features differ from the model's");
  std::vector<double> out(ds.rows());
  for (std::size_t i = 0; i < ds.rows(); ++i) out[i] = predict(model, ds.row(i));
  return out;
}

double evaluate(const BoostedModel& model, const Dataset& ds) {
  if (ds.rows() == 0) throw DataError("cannot evaluate on an empty test set");
  const auto pred = predict(model, ds);
  double ss = 0;
  for (std::size_t i = 0; i < ds.rows(); ++i) ss += (pred[i] - ds.target[i]) * (pred[i] - ds.target[i]);
  return std::sqrt(ss / static_cast<double>(ds.rows()));
}

std::vector<std::pair<std::string, double>> feature_importance(const BoostedModel& model) {
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t f = 0; f < model.feature_names.size(); ++f) {
    out.emplace_back(model.feature_names[f], f < model.importance.size() ? model.importance[f] : 0.0);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

std::string format_model(const BoostedModel& m) {
  std::string out = "format=carfollow-gbt-1\n";
  out += "features=";
  for (std::size_t i = 0; i < m.feature_names.size(); ++i) {
    if (i) out += ',';
    out += m.feature_names[i];
  }
  out += '\n';
  out += "base_score=" + text::format_double(m.base_score) + "\n";
  out += "learning_rate=" + text::format_double(m.learning_rate) + "\n";
  out += "max_depth=" + std::to_string(m.max_depth) + "\n";
  out += "min_child_weight=" + text::format_double(m.min_child_weight) + "\n";
  out += "reg_lambda=" + text::format_double(m.reg_lambda) + "\n";
  out += "trees=" + std::to_string(m.trees.size()) + "\n";
  for (std::size_t t = 0; t < m.trees.size(); ++t) {
    const auto& nodes = m.trees[t].nodes;
    out += "tree=" + std::to_string(t) + ",nodes=" + std::to_string(nodes.size()) + "\n";
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      out += std::to_string(i) + ',' + std::to_string(n.feature) + ',';
      if (!n.is_leaf()) out += text::format_double(n.threshold);
      out += ',' + std::to_string(n.left) + ',' + std::to_string(n.right) + ',';
      if (n.is_leaf()) out += text::format_double(n.leaf_weight);
      out += ',' + text::format_double(n.gain) + '\n';
    }
  }
  return out;
}

BoostedModel parse_model(std::string_view contents) {
  std::vector<std::string_view> lines;
  for (auto line : text::split(contents, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!text::trim(line).empty()) lines.push_back(line);
  }
  std::size_t pos = 0;
  auto expect = [&](std::string_view key) -> std::string_view {
    if (pos >= lines.size()) throw FormatError("model truncated before '" + std::string(key) + "'");
    const auto line = lines[pos++];
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || line.substr(0, eq) != key) {
      throw FormatError("model expected '" + std::string(key) + "='");
    }
    return line.substr(eq + 1);
  };

  if (expect("format") != "carfollow-gbt-1") throw FormatError("unsupported model format");
  BoostedModel m;
  for (auto name : text::split(expect("features"), ',')) m.feature_names.emplace_back(name);
  for (const auto& name : m.feature_names) {
    if (!valid_feature_name(name)) throw FormatError("invalid feature name in model");
  }
  m.base_score = text::parse_double(expect("base_score"), "base_score");
  m.learning_rate = text::parse_double(expect("learning_rate"), "learning_rate");
  m.max_depth = static_cast<int>(text::parse_int(expect("max_depth"), "max_depth"));
  m.min_child_weight = text::parse_double(expect("min_child_weight"), "min_child_weight");
  m.reg_lambda = text::parse_double(expect("reg_lambda"), "reg_lambda");
  const auto n_trees = text::parse_int(expect("trees"), "trees");
  if (n_trees < 0) throw FormatError("negative tree count");
  m.importance.assign(m.feature_names.size(), 0.0);

  const auto n_features = static_cast<int>(m.feature_names.size());
  for (std::int64_t t = 0; t < n_trees; ++t) {
    const auto header = text::split(expect("tree"), ',');
    if (header.size() != 2 || text::parse_int(header[0], "tree") != t || header[1].substr(0, 6) != "nodes=") {
      throw FormatError("malformed tree header");
    }
    const auto n_nodes = text::parse_int(header[1].substr(6), "nodes");
    if (n_nodes < 1) throw FormatError("tree without nodes");
    Tree tree;
    for (std::int64_t i = 0; i < n_nodes; ++i) {
      if (pos >= lines.size()) throw FormatError("model truncated inside a tree");
      const auto f = text::split(lines[pos++], ',');
      if (f.size() != 7 || text::parse_int(f[0], "node_id") != i) throw FormatError("malformed tree node");
      TreeNode n;
      n.feature = static_cast<int>(text::parse_int(f[1], "feature"));
      n.left = static_cast<int>(text::parse_int(f[3], "left"));
      n.right = static_cast<int>(text::parse_int(f[4], "right"));
      n.gain = text::parse_double(f[6], "gain");
      if (n.is_leaf()) {
        if (n.feature != -1 || !f[2].empty() || n.left != -1 || n.right != -1) throw FormatError("malformed leaf");
        n.leaf_weight = text::parse_double(f[5], "leaf_weight");
      } else {
        if (n.feature >= n_features || !f[5].empty()) throw FormatError("split on unknown feature");
        if (n.left <= i || n.right <= i || n.left >= n_nodes || n.right >= n_nodes) {
          throw FormatError("split children out of range");
        }
        n.threshold = text::parse_double(f[2], "threshold");
        m.importance[static_cast<std::size_t>(n.feature)] += n.gain;
      }
      tree.nodes.push_back(n);
    }
    m.trees.push_back(std::move(tree));
  }
  if (pos != lines.size()) throw FormatError("trailing content after the last tree");
  return m;
}

void write_model(const std::filesystem::path& path, const BoostedModel& model) {
  text::write_file_atomic(path, format_model(model));
}

BoostedModel read_model(const std::filesystem::path& path) { return parse_model(text::read_file(path)); }

}  // namespace carfollow::gbt
