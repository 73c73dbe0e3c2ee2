#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "nortasp/errors.hpp"

namespace nortasp {

// K scenarios of integer flood heights over n labelled coordinates (one per
// flooded substation), with scenario probabilities.
struct ScenarioSet {
  std::vector<std::string> labels;
  std::vector<std::vector<int>> heights;  // heights[k][i]
  std::vector<double> probs;

  std::size_t dim() const { return labels.size(); }
  std::size_t count() const { return heights.size(); }

  std::vector<double> column(std::size_t i) const {
    std::vector<double> out;
    out.reserve(heights.size());
    for (const auto& row : heights) out.push_back(static_cast<double>(row[i]));
    return out;
  }

  static std::vector<double> uniform_probs(std::size_t k) {
    return std::vector<double>(k, k == 0 ? 0.0 : 1.0 / static_cast<double>(k));
  }

  // Throws InputError describing the first violated invariant.
  void validate() const {
    if (probs.size() != heights.size()) {
      throw InputError("scenario set: " + std::to_string(probs.size()) + " probabilities for " +
                       std::to_string(heights.size()) + " scenarios");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < heights.size(); ++k) {
      if (heights[k].size() != labels.size()) {
        throw InputError("scenario set: row " + std::to_string(k) + " has " +
                         std::to_string(heights[k].size()) + " values, expected " +
                         std::to_string(labels.size()));
      }
      for (int h : heights[k]) {
        if (h < 0) {
          throw InputError("scenario set: negative height in scenario " + std::to_string(k));
        }
      }
      if (!(probs[k] >= 0.0) || !std::isfinite(probs[k])) {
        throw InputError("scenario set: invalid probability in scenario " + std::to_string(k));
      }
      total += probs[k];
    }
    if (!heights.empty() && std::abs(total - 1.0) > 1e-12) {
      throw InputError("scenario set: probabilities sum to " + std::to_string(total));
    }
  }
};

}  // namespace nortasp
