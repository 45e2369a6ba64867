#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cvp/replay.hpp"
#include "cvp/types.hpp"

namespace cvp {

// How the printed display rank enters the decay. Zero (default) gives the
// top response weight exactly 1 for any tau; One shifts every rank by one,
// which only rescales each item-step by a common factor.
enum class RankBase { Zero, One };

struct SelectionParams {
  double tau = 0.0;
  double alpha = 0.5;
  RankBase rank_base = RankBase::Zero;
};

// Popularity weight (1 / (1 + rank))^tau of a 1-based display rank.
double popularity(int display_rank, double tau, RankBase base = RankBase::Zero);

// Distribution over J+1 actions: entries 0..J-1 select the responses (by
// response index), entry J writes a new response. Sums to 1.
std::vector<double> selection_distribution(const ItemState& state, const SelectionParams& params);

// Baseline: selects responses proportional to pseudo_count + votes received;
// pseudo_count = 0 is the literal counts-only variant (zero-vote responses
// then get zero mass).
std::vector<double> crp_selection_distribution(const ItemState& state, double alpha,
                                               double pseudo_count = 1.0);

// Selection-phase log-likelihood over the observed display orders. The first
// event of each item is a forced write and contributes nothing. Throws
// MissingDisplayOrder for any later event without one.
double selection_loglik(const Dataset& ds, const SelectionParams& params);

// Analytic d/dtau of selection_loglik; finite everywhere including tau = 0.
double selection_grad_tau(const Dataset& ds, const SelectionParams& params);

struct TauFit {
  double tau = 0.0;
  double loglik = 0.0;
  double grad = 0.0;
  int iterations = 0;
  bool saturated_low = false;   // maximizer at the lower search bound
  bool saturated_high = false;  // maximizer at the upper search bound
  std::int64_t informative_events = 0;
};

// 1-D maximizer of the selection log-likelihood over tau in [-10, 10],
// safeguarded Newton on the gradient, |step| tolerance 1e-8. Throws
// Unidentifiable when no event has two or more responses on display.
TauFit fit_tau(const Dataset& ds, double alpha, RankBase base = RankBase::Zero);

// ---------------------------------------------------------------------------
// Flattened event view reused across repeated evaluations (grid scans,
// truncated fits). logranks holds log(1 + rank) per displayed response.

struct SelectionDesign {
  struct Event {
    bool is_write = false;
    double chosen_logrank = 0.0;  // valid when !is_write
    int t = 0;
    std::int64_t seq = 0;
    int item = 0;
    std::int32_t offset = 0;  // into logranks
    std::int32_t count = 0;
  };

  std::vector<Event> events;
  std::vector<double> logranks;

  static SelectionDesign build(const Dataset& ds, RankBase base);
};

struct SelectionBounds {
  int t_max = std::numeric_limits<int>::max();
  std::int64_t seq_before = std::numeric_limits<std::int64_t>::max();
};

double selection_loglik(const SelectionDesign& d, double tau, double alpha,
                        SelectionBounds bounds = {});
double selection_grad_tau(const SelectionDesign& d, double tau, double alpha,
                          SelectionBounds bounds = {});
TauFit fit_tau(const SelectionDesign& d, double alpha, SelectionBounds bounds = {});

}  // namespace cvp
