#pragma once

#include <string>

#include <json.hpp>

#include "tsfx/boosting.hpp"
#include "tsfx/design.hpp"
#include "tsfx/lasso.hpp"
#include "tsfx/ols.hpp"

namespace tsfx::baselines {

// Columns serialize under their (lag,series,feature) coordinates so a
// coefficient keeps its meaning without the design matrix at hand.
inline std::string column_key(const DesignMatrix& dm, std::size_t col) {
  std::size_t j = col % dm.F;
  std::size_t ln = col / dm.F;
  return "(" + std::to_string(ln / dm.N) + "," + std::to_string(ln % dm.N) + "," +
         std::to_string(j) + ")";
}

inline nlohmann::json lasso_to_json(const LassoModel& m, const DesignMatrix& dm) {
  nlohmann::json betas = nlohmann::json::object();
  for (std::size_t c = 0; c < m.betas.size(); ++c)
    if (m.betas[c] != 0.0) betas[column_key(dm, c)] = m.betas[c];
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& [lam, mse] : m.cv_curve) curve.push_back({{"lambda", lam}, {"mse", mse}});
  return {{"model", "lasso"},        {"betas", betas},
          {"intercept", m.intercept}, {"lambda", m.lambda},
          {"converged", m.converged}, {"cv_curve", curve}};
}

inline nlohmann::json ols_to_json(const OlsModel& m, const DesignMatrix& dm) {
  nlohmann::json betas = nlohmann::json::object();
  for (std::size_t c = 0; c < m.beta.size(); ++c)
    if (m.beta[c] != 0.0) betas[column_key(dm, c)] = m.beta[c];
  return {{"model", "ols"}, {"betas", betas}, {"rank_deficient", m.rank_deficient}};
}

namespace detail {
inline nlohmann::json tree_node_json(const Tree& t, std::int32_t idx) {
  const TreeNode& n = t.nodes[idx];
  if (n.feature < 0) return {{"value", n.value}};
  return {{"feature", n.feature},
          {"threshold", n.threshold},
          {"left", tree_node_json(t, n.left)},
          {"right", tree_node_json(t, n.right)}};
}
}  // namespace detail

inline nlohmann::json boost_to_json(const BoostModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const Tree& t : m.trees) trees.push_back(detail::tree_node_json(t, 0));
  return {{"model", "boosting"},
          {"base_score", m.base_score},
          {"learning_rate", m.params.learning_rate},
          {"trees", trees}};
}

}  // namespace tsfx::baselines
