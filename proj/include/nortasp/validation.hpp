#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "nortasp/errors.hpp"
#include "nortasp/scenario.hpp"
#include "nortasp/stats.hpp"

namespace nortasp {

struct PairCorrelationError {
  std::size_t i = 0;
  std::size_t j = 0;
  double original = 0.0;
  double synthetic = 0.0;
  double abs_error = 0.0;
};

// Distributional agreement between an original and a synthetic scenario set:
// per-dimension EMD between empirical marginals and per-pair absolute
// Pearson-correlation error (constant columns count as correlation 0).
struct ValidationReport {
  std::vector<std::string> labels;
  std::vector<double> emd;
  std::vector<PairCorrelationError> pairs;  // i < j, row-major
  SummaryStats emd_summary;
  std::optional<SummaryStats> corr_summary;  // absent with a single dimension
};

inline ValidationReport validate_synthetic(const ScenarioSet& original, const ScenarioSet& synthetic) {
  if (original.dim() != synthetic.dim()) {
    throw InputError("validate: original has " + std::to_string(original.dim()) + " columns, synthetic has " +
                     std::to_string(synthetic.dim()));
  }
  if (original.labels != synthetic.labels) throw InputError("validate: column labels differ");
  if (original.dim() == 0) throw InputError("validate: no columns");
  if (original.count() == 0 || synthetic.count() == 0) throw InputError("validate: empty scenario set");

  const std::size_t n = original.dim();
  std::vector<std::vector<double>> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = original.column(i);
    b[i] = synthetic.column(i);
  }

  ValidationReport r;
  r.labels = original.labels;
  for (std::size_t i = 0; i < n; ++i) r.emd.push_back(emd(EmpiricalMarginal(a[i]), EmpiricalMarginal(b[i])));
  r.emd_summary = summarize(r.emd);

  // Pearson needs two rows; a single-row set has no correlation to compare.
  const bool have_corr = original.count() >= 2 && synthetic.count() >= 2;
  std::vector<double> errors;
  for (std::size_t i = 0; have_corr && i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      PairCorrelationError e;
      e.i = i;
      e.j = j;
      e.original = pearson_corr_or_zero(a[i], a[j]);
      e.synthetic = pearson_corr_or_zero(b[i], b[j]);
      e.abs_error = std::abs(e.original - e.synthetic);
      errors.push_back(e.abs_error);
      r.pairs.push_back(e);
    }
  }
  if (!errors.empty()) r.corr_summary = summarize(errors);
  return r;
}

}  // namespace nortasp
