#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cvp/selection.hpp"
#include "cvp/types.hpp"
#include "cvp/voting.hpp"

namespace cvp {

struct ConformityOptions {
  FeatureMask mask = FeatureMask::all();
  double sigma2 = 1.0;
  int refit_stride = 25;       // refit the theta chain every this many votes
  int full_refit_every = 500;  // cold restart cadence (0 = never)
  bool include_first_vote = true;  // score the community's first vote with the prior-only model
  bool invert_majority = false;    // test hook: flips the majority sign h
  std::optional<VotingParams> fixed_params;  // evaluate a fixed model, no fitting
  FitOptions fit;
};

struct ConformityResult {
  double kappa = 1.0;
  double log_kappa = 0.0;
  std::int64_t n_votes = 0;
};

// Geometric mean of majority-oriented odds ratios: each vote contributes the
// model log-odds of the cast polarity with sign +1 when the response's votes
// so far lean positive (ties count positive), -1 otherwise. The model is
// refit on everything strictly before the vote, warm-started along the chain.
ConformityResult conformity(const Dataset& ds, const UrnConfig& urn, const ConformityOptions& opts);

// Community trendiness = maximum-likelihood tau over the full dataset.
TauFit trendiness(const Dataset& ds, double alpha, RankBase base = RankBase::Zero);

struct CoeffRow {
  std::string community_id;
  std::string group_tag;  // empty for the whole-community row
  double trendiness = 0.0;
  double conformity = 1.0;
  std::int64_t n_votes = 0;
};

struct CoeffReport {
  std::vector<CoeffRow> rows;  // whole community first, then groups by tag
  int refit_stride = 0;
};

// Whole-community coefficients plus one row per group_tag present in the
// metadata (groups whose tau is unidentifiable are skipped).
CoeffReport coefficient_report(const Dataset& ds, const UrnConfig& urn, double alpha,
                               const ConformityOptions& opts, RankBase base = RankBase::Zero);

std::string coeff_csv(const CoeffReport& report);

}  // namespace cvp
