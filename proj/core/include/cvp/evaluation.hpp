#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cvp/selection.hpp"
#include "cvp/types.hpp"
#include "cvp/voting.hpp"

namespace cvp {

// ---------------------------------------------------------------------------
// Predictive next-action evaluation: learn on events up to index t, score the
// action at t+1, items aligned at their first events.

struct EvalCell {
  double nll_sum = 0.0;
  std::int64_t count = 0;
};

struct EvalSeries {
  std::string name;
  std::vector<EvalCell> by_step;  // indexed by predicted event index (2..horizon)
  double total_nll = 0.0;
  std::int64_t total_count = 0;

  double avg() const { return total_count > 0 ? total_nll / static_cast<double>(total_count) : 0.0; }
};

struct EvalReport {
  int horizon = 0;
  std::vector<EvalSeries> selection;  // "cvp" and (optionally) "crp"
  std::vector<EvalSeries> voting;     // one per feature-mask variant

  const EvalSeries* find_selection(const std::string& name) const;
  const EvalSeries* find_voting(const std::string& name) const;
};

struct EvalOptions {
  int horizon = 50;
  double alpha = 0.5;
  RankBase rank_base = RankBase::Zero;
  double crp_pseudo = 1.0;  // 0 gives the literal counts-only baseline
  bool include_crp = true;
  double sigma2 = 1.0;
  FitOptions fit;
  // Score these instead of refitting at each step (baseline/oracle checks).
  std::optional<VotingParams> fixed_voting;
  std::optional<double> fixed_tau;
};

EvalReport predictive_nll(const Dataset& ds, const UrnConfig& urn,
                          const std::vector<FeatureMask>& voting_variants,
                          const EvalOptions& opts = {});

// All 2^k feature subsets (k = 3 with mu grouped under lambda, else 4) plus
// the CRP selection baseline.
EvalReport ablation_grid(const Dataset& ds, const UrnConfig& urn, const EvalOptions& opts = {},
                         bool group_mu_with_lambda = true);

std::string eval_selection_csv(const EvalReport& report);
std::string eval_voting_csv(const EvalReport& report);

// ---------------------------------------------------------------------------
// Final-snapshot quality analysis.

// (v - mean) / population sd. Throws ZeroVariance on constant or undersized
// input.
std::vector<double> rank_zscore(const std::vector<double>& values);

struct CurvePoint {
  double x_mean = 0.0;
  double y_mean = 0.0;
  std::int64_t count = 0;
};

// Contiguous bins over rows already sorted by x; the last bin may be short.
std::vector<CurvePoint> bin_average(const std::vector<std::pair<double, double>>& sorted_rows,
                                    int bin_size);

struct OlsFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // mean squared deviation (mean absolute behind the flag)
};

// Ordinary least squares through (x, y) points. Throws DegenerateX.
OlsFit regression_residual(const std::vector<std::pair<double, double>>& points,
                           bool absolute_residual = false);

// Mean |slope change| between consecutive segments; points must be sorted by
// strictly increasing x. Throws DuplicateX.
double bumpiness(const std::vector<std::pair<double, double>>& points);

struct QualityRow {
  std::string item_id;
  int response = 0;
  int display_rank = 0;
  double display_rank_z = 0.0;  // z-scored within the item; best rank -> lowest z
  double quality = 0.0;
  double quality_z = 0.0;  // z-scored across the community
  std::int64_t comment_count = 0;
  std::optional<double> avg_sentiment;
  std::string group_tag;
};

struct RankingSummary {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
  double bumpiness = 0.0;
  std::int64_t points = 0;
};

struct QualityReport {
  std::vector<QualityRow> rows;
  std::vector<CurvePoint> display_curve;
  std::vector<CurvePoint> quality_curve;
  RankingSummary display_summary;
  RankingSummary quality_summary;
  int bin_size_used = 0;
};

struct QualityOptions {
  int bin_size = 1000;  // auto-shrunk so curves keep at least 3 points
  bool absolute_residual = false;
};

// Compares the final display ranking against the fitted-quality ranking on
// comment sentiment. Requires the metadata sidecar. Throws MissingMetadata.
QualityReport quality_analysis(const Dataset& ds, const VotingParams& fitted,
                               const QualityOptions& opts = {});

std::string quality_rows_csv(const QualityReport& report);
std::string quality_curves_csv(const QualityReport& report);
std::string quality_summary_csv(const QualityReport& report);

}  // namespace cvp
