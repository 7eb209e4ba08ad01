#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "tsfx/design.hpp"
#include "tsfx/errors.hpp"

namespace tsfx::baselines {

struct BoostParams {
  std::size_t trees = 200;
  std::size_t depth = 3;
  double learning_rate = 0.05;
  std::size_t min_samples_leaf = 20;
  std::size_t max_bins = 255;  // histogram resolution for split search
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // goes left when value <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;  // node 0 is the root

  double predict(const double* row) const {
    std::int32_t idx = 0;
    while (nodes[idx].feature >= 0)
      idx = row[nodes[idx].feature] <= nodes[idx].threshold ? nodes[idx].left : nodes[idx].right;
    return nodes[idx].value;
  }

  double predict_at(const DesignMatrix& dm, std::size_t r) const {
    std::int32_t idx = 0;
    while (nodes[idx].feature >= 0)
      idx = dm.at(r, static_cast<std::size_t>(nodes[idx].feature)) <= nodes[idx].threshold
                ? nodes[idx].left
                : nodes[idx].right;
    return nodes[idx].value;
  }
};

struct BoostModel {
  BoostParams params;
  double base_score = 0.0;
  std::vector<Tree> trees;
  std::vector<double> staged_train_mse;  // after each tree

  double predict(const double* row) const {
    double s = base_score;
    for (const Tree& t : trees) s += params.learning_rate * t.predict(row);
    return s;
  }

  double predict_at(const DesignMatrix& dm, std::size_t r) const {
    double s = base_score;
    for (const Tree& t : trees) s += params.learning_rate * t.predict_at(dm, r);
    return s;
  }
};

namespace detail {

struct SplitChoice {
  double gain = 0.0;
  std::int32_t feature = -1;
  std::int32_t bin = -1;
  double threshold = 0.0;
};

}  // namespace detail

// Least-squares gradient boosting with depth-bounded regression trees.
// Split search runs over per-column quantile histograms (edges drawn from
// a value subsample), which keeps the cost linear in rows x columns per
// level; thresholds are stored as real feature values so trained trees
// evaluate on any design.
inline BoostModel fit_boosting(const DesignMatrix& dm, const std::vector<double>& y,
                               const BoostParams& params = {}) {
  if (y.size() != dm.row_count()) throw ShapeError("fit_boosting: target length mismatch");
  std::size_t m = dm.row_count();
  std::size_t cols = dm.cols;

  // Quantile bin edges per column.
  std::vector<std::vector<double>> edges(cols);
  {
    std::size_t sample = std::min<std::size_t>(m, 4096);
    std::vector<double> vals(sample);
    for (std::size_t j = 0; j < cols; ++j) {
      for (std::size_t i = 0; i < sample; ++i) {
        std::size_t r = i * m / sample;
        vals[i] = dm.at(r, j);
      }
      std::sort(vals.begin(), vals.end());
      std::vector<double>& e = edges[j];
      for (std::size_t k = 1; k <= params.max_bins; ++k) {
        double v = vals[std::min(sample - 1, k * sample / (params.max_bins + 1))];
        if (e.empty() || v > e.back()) e.push_back(v);
      }
      if (!e.empty() && e.back() >= vals.back()) e.pop_back();  // keep the top bin non-empty
    }
  }

  // Binned matrix, column-major: bin(v) = index of first edge >= v, so
  // value <= edges[b] exactly when bin <= b.
  std::vector<std::uint8_t> bins(cols * m);
  for (std::size_t j = 0; j < cols; ++j) {
    const std::vector<double>& e = edges[j];
    std::uint8_t* out = bins.data() + j * m;
    for (std::size_t r = 0; r < m; ++r) {
      double v = dm.at(r, j);
      out[r] = static_cast<std::uint8_t>(std::lower_bound(e.begin(), e.end(), v) - e.begin());
    }
  }

  BoostModel model;
  model.params = params;
  model.base_score = 0.0;
  for (double v : y) model.base_score += v;
  model.base_score /= static_cast<double>(m);

  std::vector<double> res(m);
  for (std::size_t r = 0; r < m; ++r) res[r] = y[r] - model.base_score;

  std::size_t nbins = params.max_bins + 1;
  std::vector<std::int32_t> node_of(m);
  for (std::size_t titer = 0; titer < params.trees; ++titer) {
    Tree tree;
    tree.nodes.push_back(TreeNode{});
    std::fill(node_of.begin(), node_of.end(), 0);
    std::vector<std::int32_t> frontier{0};

    for (std::size_t level = 0; level < params.depth && !frontier.empty(); ++level) {
      std::size_t max_node = tree.nodes.size();
      std::vector<double> node_sum(max_node, 0.0);
      std::vector<std::uint64_t> node_cnt(max_node, 0);
      for (std::size_t r = 0; r < m; ++r) {
        node_sum[node_of[r]] += res[r];
        ++node_cnt[node_of[r]];
      }
      std::vector<char> in_frontier(max_node, 0);
      for (std::int32_t nid : frontier) in_frontier[nid] = 1;

      std::vector<detail::SplitChoice> best(max_node);
      std::vector<double> hist_sum(max_node * nbins);
      std::vector<std::uint32_t> hist_cnt(max_node * nbins);

      for (std::size_t j = 0; j < cols; ++j) {
        if (edges[j].empty()) continue;
        std::fill(hist_sum.begin(), hist_sum.end(), 0.0);
        std::fill(hist_cnt.begin(), hist_cnt.end(), 0u);
        const std::uint8_t* bj = bins.data() + j * m;
        for (std::size_t r = 0; r < m; ++r) {
          std::int32_t nd = node_of[r];
          if (!in_frontier[nd]) continue;
          hist_sum[nd * nbins + bj[r]] += res[r];
          ++hist_cnt[nd * nbins + bj[r]];
        }
        for (std::int32_t nd : frontier) {
          double run_sum = 0.0;
          std::uint64_t run_cnt = 0;
          const double* hs = hist_sum.data() + nd * nbins;
          const std::uint32_t* hc = hist_cnt.data() + nd * nbins;
          for (std::size_t b = 0; b < edges[j].size(); ++b) {
            run_sum += hs[b];
            run_cnt += hc[b];
            std::uint64_t cl = run_cnt, cr = node_cnt[nd] - run_cnt;
            if (cl < params.min_samples_leaf || cr < params.min_samples_leaf) continue;
            double sl = run_sum, sr = node_sum[nd] - run_sum;
            double gain =
                sl * sl / cl + sr * sr / cr - node_sum[nd] * node_sum[nd] / node_cnt[nd];
            if (gain > best[nd].gain + 1e-12) {
              best[nd].gain = gain;
              best[nd].feature = static_cast<std::int32_t>(j);
              best[nd].bin = static_cast<std::int32_t>(b);
              best[nd].threshold = edges[j][b];
            }
          }
        }
      }

      std::vector<std::int32_t> next_frontier;
      std::vector<std::int32_t> split_bin(max_node, -1);
      for (std::int32_t nid : frontier) {
        if (best[nid].feature < 0) continue;  // stays a leaf
        TreeNode& node = tree.nodes[nid];
        node.feature = best[nid].feature;
        node.threshold = best[nid].threshold;
        node.left = static_cast<std::int32_t>(tree.nodes.size());
        node.right = node.left + 1;
        split_bin[nid] = best[nid].bin;
        tree.nodes.push_back(TreeNode{});
        tree.nodes.push_back(TreeNode{});
        next_frontier.push_back(node.left);
        next_frontier.push_back(node.right);
      }
      if (next_frontier.empty()) break;
      for (std::size_t r = 0; r < m; ++r) {
        std::int32_t nd = node_of[r];
        const TreeNode& node = tree.nodes[nd];
        if (node.feature >= 0)
          node_of[r] = bins[static_cast<std::size_t>(node.feature) * m + r] <= split_bin[nd]
                           ? node.left
                           : node.right;
      }
      frontier = std::move(next_frontier);
    }

    // Leaf values are mean residuals.
    std::vector<double> leaf_sum(tree.nodes.size(), 0.0);
    std::vector<std::uint64_t> leaf_cnt(tree.nodes.size(), 0);
    for (std::size_t r = 0; r < m; ++r) {
      leaf_sum[node_of[r]] += res[r];
      ++leaf_cnt[node_of[r]];
    }
    for (std::size_t nid = 0; nid < tree.nodes.size(); ++nid)
      if (tree.nodes[nid].feature < 0 && leaf_cnt[nid] > 0)
        tree.nodes[nid].value = leaf_sum[nid] / static_cast<double>(leaf_cnt[nid]);

    double sse = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      res[r] -= params.learning_rate * tree.nodes[node_of[r]].value;
      sse += res[r] * res[r];
    }
    model.staged_train_mse.push_back(sse / static_cast<double>(m));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

inline std::vector<double> boost_predict(const DesignMatrix& dm, const BoostModel& m) {
  std::vector<double> out(dm.row_count());
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = m.predict_at(dm, r);
  return out;
}

}  // namespace tsfx::baselines
