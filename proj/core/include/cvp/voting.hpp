#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cvp/optim.hpp"
#include "cvp/replay.hpp"
#include "cvp/types.hpp"

namespace cvp {

// Which parameter groups take part in a fit; anything switched off is pinned
// to zero (the partial models of the ablation study).
struct FeatureMask {
  bool quality = true;
  bool lambda = true;
  bool mu = true;
  bool nu = true;

  static FeatureMask all() { return {}; }
  static FeatureMask none() { return {false, false, false, false}; }
  // Comma-separated groups to knock out: subsets of "q,lambda,mu,nu".
  static FeatureMask from_knockout(const std::string& csv);
  std::string name() const;  // "full", "none", or "q+lambda+..." of active groups
};

struct VotingParams {
  double lambda = 0.0;
  double mu = 0.0;
  double sigma2 = 1.0;
  std::map<std::string, double> nu;                       // per item
  std::map<std::pair<std::string, int>, double> quality;  // per (item, response)

  double quality_or(const std::string& item_id, int response, double fallback = 0.0) const;
};

struct FitOptions {
  double ridge = 0.5;              // weight on lambda^2 + mu^2 + sum nu^2
  bool exclude_first_vote = false; // drop each response's first vote from the objective
  int min_votes_for_nu = 3;        // items with fewer votes keep nu pinned at 0
  int threads = 1;
  LbfgsOptions optim;
};

struct FitResult {
  VotingParams params;
  double final_loglik = 0.0;    // voting log-likelihood incl. quality prior terms
  double vote_loglik = 0.0;     // Bernoulli vote terms only
  double final_objective = 0.0; // maximized training objective (ridge included)
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// lambda * r_j + mu * s_j + nu_i * u_j for response j of the given state.
// Throws UnknownItem when params.nu has no entry for item_id.
double polarity_score(const ItemState& state, int j, const VotingParams& params,
                      const std::string& item_id);

// logit^{-1}(q + g), stable over the full double range.
double vote_probability(double q, double g);
// log p(v | q, g) for polarity v in {0, 1}.
double log_vote_probability(int polarity, double q, double g);

// Voting-phase log-likelihood: vote terms log p(v | q, g) on the state before
// each vote, plus (unless disabled) log N(q; 0, sigma2) per write.
double voting_loglik(const Dataset& ds, const VotingParams& params, const UrnConfig& urn,
                     bool include_quality_prior = true, bool exclude_first_vote = false);

// ---------------------------------------------------------------------------
// Fitting machinery. The design matrix is replayed once; fits over truncated
// histories (predictive evaluation, conformity) reuse it via row bounds.

struct VotingDesign {
  struct VoteRow {
    int item = 0;   // index into item_ids
    int q_idx = 0;  // index into q_keys
    double r = 0, s = 0, u = 0;
    int polarity = 0;
    int npos = 0, nneg = 0;  // counts on the response at the pre-vote state
    int t = 0;               // within-item event index
    std::int64_t seq = 0;    // community-global order
  };
  struct WriteRow {
    int item = 0;
    int q_idx = 0;
    int t = 0;
    std::int64_t seq = 0;
  };

  std::vector<VoteRow> votes;
  std::vector<WriteRow> writes;
  std::vector<std::string> item_ids;
  std::vector<std::pair<int, int>> q_keys;  // (item index, response)
  std::vector<std::int64_t> votes_per_item;

  static VotingDesign build(const Dataset& ds, const UrnConfig& urn,
                            bool exclude_first_vote = false);
  int q_index(int item, int response) const;  // -1 if absent
};

// Row filter: include rows with t <= t_max and seq < seq_before.
struct RowBounds {
  int t_max = std::numeric_limits<int>::max();
  std::int64_t seq_before = std::numeric_limits<std::int64_t>::max();
};

// Penalized training objective over the active parameter vector.
class VotingObjective {
 public:
  VotingObjective(const VotingDesign& design, FeatureMask mask, double sigma2,
                  const FitOptions& opts, RowBounds bounds = {});

  std::size_t dim() const { return dim_; }
  double eval(const std::vector<double>& x, std::vector<double>& grad) const;
  // Unpenalized voting log-likelihood split, evaluated at x.
  void loglik_parts(const std::vector<double>& x, double& full, double& votes_only) const;

  std::vector<double> pack(const VotingParams& p) const;
  VotingParams unpack(const std::vector<double>& x) const;

  bool include_penalty = true;

 private:
  const VotingDesign& design_;
  FeatureMask mask_;
  double sigma2_;
  FitOptions opts_;
  RowBounds bounds_;
  std::size_t dim_ = 0;
  int lambda_idx_ = -1, mu_idx_ = -1;
  std::vector<int> nu_idx_;       // per item, -1 when pinned or masked
  std::vector<char> q_has_rows_;  // q params with any in-bounds row
  std::int64_t writes_in_bounds_ = 0;
};

// Maximizes the voting objective. `init` supplies sigma2 and starting values;
// masked groups are pinned to zero. Deterministic for fixed inputs.
FitResult fit_voting(const Dataset& ds, const UrnConfig& urn, const VotingParams& init,
                     const FeatureMask& mask = FeatureMask::all(), const FitOptions& opts = {});
FitResult fit_voting_design(const VotingDesign& design, double sigma2, const VotingParams& init,
                            const FeatureMask& mask, const FitOptions& opts, RowBounds bounds = {});

// Single-response toy fit: maximizes the vote likelihood from the second vote
// on (the first is arbitrary under a uniform prior), with ridge penalty on
// (q, lambda, mu). Throws TooShort for fewer than two votes.
struct ToyFit {
  double q = 0.0, lambda = 0.0, mu = 0.0;
  double objective = 0.0;
  bool converged = false;
};
ToyFit fit_toy_response(const std::vector<int>& votes, const UrnConfig& urn, double ridge = 0.5);

// ---------------------------------------------------------------------------
// Parameter file: community scalars, then per-item nu rows, then per-response
// q rows. Tab-separated, ids JSON-quoted, doubles in round-trip form.

struct ParamsFile {
  std::string community_id;
  std::optional<double> tau;
  std::optional<double> alpha;
  VotingParams voting;
};

std::string serialize_params(const ParamsFile& p);
ParamsFile parse_params(const std::string& text);

}  // namespace cvp
