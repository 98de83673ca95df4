#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gapscore/masked_matrix.hpp"
#include "gapscore/rng.hpp"
#include "gapscore/score.hpp"

namespace gapscore {

// Node of an isolation tree stored in a flat array. A node is a leaf when
// `feature < 0`. Internal nodes send rows with x[feature] >= threshold to
// `left`, the rest to `right`.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  double lo = 0.0;      // min of x[feature] over rows reaching the node
  double hi = 0.0;      // max of x[feature] over rows reaching the node
  double p_left = 0.0;  // fraction of those rows with x[feature] >= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::uint32_t size = 0;   // training rows reaching the node
  std::uint32_t depth = 0;  // root is 0

  bool is_leaf() const { return feature < 0; }
};

struct IsolationTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  // Columns this tree may split on, ascending.
  std::vector<std::size_t> features;
};

struct IsolationForestParams {
  std::size_t n_trees = 100;
  std::size_t subsample = 256;
  // Feature bagging: every tree draws ceil(sqrt(d)) columns up front.
  bool reduced = false;
};

struct IsolationForest {
  std::vector<IsolationTree> trees;
  std::size_t n_features = 0;
  std::size_t subsample_size = 0;  // rows actually drawn per tree
  double normalizer = 0.0;         // expected_depth(subsample_size)
  bool reduced = false;
};

// Average path length of an unsuccessful BST search over n points:
// c(n) = 2 H(n-1) - 2 (n-1) / n with H(i) = ln(i) + 0.5772156649, c(1) = 0.
double expected_depth(std::size_t n);

// Smallest k with k * k >= d.
std::size_t ceil_sqrt(std::size_t d);

IsolationForest fit_iforest(const MaskedMatrix& data,
                            const IsolationForestParams& params,
                            const SeededRng& rng);

// Depth at which `x` is isolated by `tree`. Leaves holding s > 1 training
// rows add expected_depth(s). With kProportional, a missing tested feature
// sends the query down both children and mixes the two depths by the
// training split fractions. kBaseline throws ContractViolation on a
// missing tested feature.
double isolation_depth(const IsolationTree& tree, const RowView& x,
                       TreeStrategy strategy);

// kBaseline / kProportional: exp(-mean depth / normalizer) over all trees.
// kReduced: mean of per-tree scores over trees whose feature set is
// observed in x; neutral fallback when no tree qualifies.
ScoreResult score_iforest(const IsolationForest& forest, const RowView& x,
                          TreeStrategy strategy);

// A tree can score x under the reduced strategy iff every column in its
// feature set is observed.
bool tree_applicable(const IsolationTree& tree, const RowView& x);

}  // namespace gapscore
