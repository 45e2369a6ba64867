#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "cvp/replay.hpp"
#include "cvp/rng.hpp"
#include "cvp/selection.hpp"
#include "cvp/types.hpp"
#include "cvp/voting.hpp"

namespace cvp {

// Display ordering applied by the simulated platform before every event.
enum class RankMechanism {
  ByScore,             // positive minus negative votes, descending
  ByPositiveFraction,  // positive fraction, then total votes, descending
  ByArrival,           // write order
};
enum class TieBreak { ByArrival, ByLastVote };

// New-response lengths, log-normal in characters.
struct LengthModel {
  double log_median = std::log(300.0);
  double log_sd = 0.7;
};

// Per-item length-bias values are drawn from N(mean, sd^2).
struct NuSpec {
  double mean = 0.0;
  double sd = 0.0;
};

struct SimConfig {
  std::string community_id = "sim";
  SelectionParams selection;  // tau, alpha, rank base
  double lambda = 0.0;
  double mu = 0.0;
  double sigma2 = 1.0;
  NuSpec nu;
  UrnConfig urn;
  RankMechanism rank_mechanism = RankMechanism::ByScore;
  TieBreak tie_break = TieBreak::ByArrival;
  LengthModel length_model;
  int events_per_item = 1;  // T of every item
  int items = 1;
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

// Display order (response indices, best first) for the current state.
std::vector<int> rank_responses(const ItemState& state, RankMechanism mechanism, TieBreak tie_break);

struct ItemGroundTruth {
  double nu = 0.0;
  std::vector<double> quality;  // per response, write order
};

struct SimulatedItem {
  ItemTrajectory trajectory;
  ItemGroundTruth truth;
};

// One item from the generative story: forced first write, then selection over
// {existing responses, write-new} followed by a polarity draw for votes.
// Deterministic given (cfg, item_id, nu_value, rng state).
SimulatedItem simulate_item(const SimConfig& cfg, const std::string& item_id, double nu_value,
                            Rng& rng);

struct SimResult {
  Dataset dataset;
  ParamsFile ground_truth;  // tau/alpha + generating lambda, mu, sigma2, nu, q
};

// m independent items on per-item substreams of cfg.seed; event seq numbers
// are assigned item-major, matching the order serialize_event_log emits.
SimResult simulate_community(const SimConfig& cfg);

}  // namespace cvp
