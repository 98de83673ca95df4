#include "gapscore/iforest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gapscore/errors.hpp"

namespace gapscore {
namespace {

constexpr double kEulerGamma = 0.5772156649;

class TreeBuilder {
 public:
  TreeBuilder(const MaskedMatrix& data, IsolationTree& tree, SeededRng& rng)
      : data_(data), tree_(tree), rng_(rng) {}

  std::int32_t grow(std::vector<std::size_t>& rows, std::uint32_t depth) {
    const auto idx = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.nodes[idx].size = static_cast<std::uint32_t>(rows.size());
    tree_.nodes[idx].depth = depth;
    if (rows.size() <= 1) return idx;

    candidates_.clear();
    for (std::size_t j : tree_.features) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::size_t r : rows) {
        double v = data_.value(r, j);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (lo < hi) candidates_.push_back({j, lo, hi});
    }
    if (candidates_.empty()) return idx;

    const Candidate c = candidates_[rng_.index(candidates_.size())];
    const double theta = rng_.uniform_open(c.lo, c.hi);

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t r : rows)
      (data_.value(r, c.feature) >= theta ? left : right).push_back(r);

    TreeNode& node = tree_.nodes[idx];
    node.feature = static_cast<int>(c.feature);
    node.threshold = theta;
    node.lo = c.lo;
    node.hi = c.hi;
    node.p_left =
        static_cast<double>(left.size()) / static_cast<double>(rows.size());
    rows.clear();
    rows.shrink_to_fit();

    const std::int32_t l = grow(left, depth + 1);
    const std::int32_t r = grow(right, depth + 1);
    tree_.nodes[idx].left = l;
    tree_.nodes[idx].right = r;
    return idx;
  }

 private:
  struct Candidate {
    std::size_t feature;
    double lo;
    double hi;
  };

  const MaskedMatrix& data_;
  IsolationTree& tree_;
  SeededRng& rng_;
  std::vector<Candidate> candidates_;
};

// Depth still to be accumulated below node `idx`.
double remaining_depth(const IsolationTree& tree, std::int32_t idx,
                       const RowView& x, TreeStrategy strategy) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(idx)];
  if (node.is_leaf()) return expected_depth(node.size);

  const auto j = static_cast<std::size_t>(node.feature);
  if (x.is_observed(j)) {
    const double v = x.values[j];
    if (v < node.lo || v > node.hi) return 0.0;
    return 1.0 + remaining_depth(tree, v >= node.threshold ? node.left : node.right,
                                 x, strategy);
  }
  if (strategy != TreeStrategy::kProportional) {
    throw ContractViolation("isolation tree tests feature " +
                            std::to_string(j) +
                            ", which is missing; impute before baseline "
                            "scoring");
  }
  return 1.0 + node.p_left * remaining_depth(tree, node.left, x, strategy) +
         (1.0 - node.p_left) * remaining_depth(tree, node.right, x, strategy);
}

}  // namespace

double expected_depth(std::size_t n) {
  if (n == 0) throw DomainError("expected_depth is undefined for n = 0");
  if (n == 1) return 0.0;
  const double m = static_cast<double>(n - 1);
  const double harmonic = std::log(m) + kEulerGamma;
  return 2.0 * harmonic - 2.0 * m / static_cast<double>(n);
}

std::size_t ceil_sqrt(std::size_t d) {
  std::size_t k = static_cast<std::size_t>(std::sqrt(static_cast<double>(d)));
  while (k * k < d) ++k;
  while (k > 0 && (k - 1) * (k - 1) >= d) --k;
  return k;
}

IsolationForest fit_iforest(const MaskedMatrix& data,
                            const IsolationForestParams& params,
                            const SeededRng& rng) {
  require_complete(data, "isolation forest training data");
  if (params.subsample < 2) throw ConfigError("subsample must be at least 2");
  if (params.n_trees == 0) throw ConfigError("n_trees must be at least 1");
  if (data.rows() < 2)
    throw ConfigError("isolation forest needs at least 2 training rows");

  const std::size_t d = data.cols();
  IsolationForest forest;
  forest.n_features = d;
  forest.subsample_size = std::min(params.subsample, data.rows());
  forest.normalizer = expected_depth(forest.subsample_size);
  forest.reduced = params.reduced;
  forest.trees.resize(params.n_trees);

  for (std::size_t t = 0; t < params.n_trees; ++t) {
    SeededRng tree_rng = rng.fork({t});
    IsolationTree& tree = forest.trees[t];
    if (params.reduced) {
      tree.features = tree_rng.sample_without_replacement(d, ceil_sqrt(d));
      std::sort(tree.features.begin(), tree.features.end());
    } else {
      tree.features.resize(d);
      for (std::size_t j = 0; j < d; ++j) tree.features[j] = j;
    }
    auto rows =
        tree_rng.sample_without_replacement(data.rows(), forest.subsample_size);
    TreeBuilder builder(data, tree, tree_rng);
    builder.grow(rows, 0);
  }
  return forest;
}

double isolation_depth(const IsolationTree& tree, const RowView& x,
                       TreeStrategy strategy) {
  return remaining_depth(tree, 0, x, strategy);
}

bool tree_applicable(const IsolationTree& tree, const RowView& x) {
  return std::all_of(tree.features.begin(), tree.features.end(),
                     [&x](std::size_t j) { return x.is_observed(j); });
}

ScoreResult score_iforest(const IsolationForest& forest, const RowView& x,
                          TreeStrategy strategy) {
  if (x.size() != forest.n_features)
    throw ConfigError("query has " + std::to_string(x.size()) +
                      " features, forest expects " +
                      std::to_string(forest.n_features));
  const double z = forest.normalizer;
  if (strategy == TreeStrategy::kReduced) {
    double total = 0.0;
    std::size_t used = 0;
    for (const auto& tree : forest.trees) {
      if (!tree_applicable(tree, x)) continue;
      total += std::exp(-isolation_depth(tree, x, TreeStrategy::kBaseline) / z);
      ++used;
    }
    if (used == 0) return {kIforestNeutralScore, true};
    return {total / static_cast<double>(used), false};
  }
  double depth_sum = 0.0;
  for (const auto& tree : forest.trees)
    depth_sum += isolation_depth(tree, x, strategy);
  const double mean_depth = depth_sum / static_cast<double>(forest.trees.size());
  return {std::exp(-mean_depth / z), false};
}

}  // namespace gapscore
