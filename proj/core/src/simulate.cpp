#include "cvp/simulate.hpp"

#include <algorithm>
#include <numeric>

namespace cvp {

void SimConfig::validate() const {
  urn.validate();
  if (events_per_item < 1) throw std::invalid_argument("events_per_item must be >= 1");
  if (items < 1) throw std::invalid_argument("items must be >= 1");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  if (!(selection.alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (!(length_model.log_sd >= 0.0)) throw std::invalid_argument("length log_sd must be >= 0");
  if (nu.sd < 0.0) throw std::invalid_argument("nu sd must be >= 0");
}

std::vector<int> rank_responses(const ItemState& state, RankMechanism mechanism, TieBreak tie_break) {
  const int J = state.J;
  std::vector<int> order(static_cast<size_t>(J));
  std::iota(order.begin(), order.end(), 0);

  auto score = [&](int j) -> double {
    const auto idx = static_cast<size_t>(j);
    switch (mechanism) {
      case RankMechanism::ByScore:
        return static_cast<double>(state.pos_votes[idx] - state.neg_votes[idx]);
      case RankMechanism::ByPositiveFraction: {
        const int total = state.pos_votes[idx] + state.neg_votes[idx];
        return total == 0 ? 0.5 : static_cast<double>(state.pos_votes[idx]) / total;
      }
      case RankMechanism::ByArrival:
        return -static_cast<double>(j);
    }
    return 0.0;
  };
  auto tie_key = [&](int j) -> double {
    if (tie_break == TieBreak::ByLastVote)
      return static_cast<double>(state.last_vote_t[static_cast<size_t>(j)]);  // recent first
    return -static_cast<double>(j);  // earliest written first
  };

  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double sa = score(a), sb = score(b);
    if (sa != sb) return sa > sb;
    if (mechanism == RankMechanism::ByPositiveFraction) {
      const int ta = state.pos_votes[static_cast<size_t>(a)] + state.neg_votes[static_cast<size_t>(a)];
      const int tb = state.pos_votes[static_cast<size_t>(b)] + state.neg_votes[static_cast<size_t>(b)];
      if (ta != tb) return ta > tb;
    }
    const double ka = tie_key(a), kb = tie_key(b);
    if (ka != kb) return ka > kb;
    return a < b;
  });
  return order;
}

SimulatedItem simulate_item(const SimConfig& cfg, const std::string& item_id, double nu_value,
                            Rng& rng) {
  SimulatedItem out;
  out.trajectory.item_id = item_id;
  out.truth.nu = nu_value;

  const double sigma = std::sqrt(cfg.sigma2);
  StateBuilder builder(cfg.urn);

  auto sample_length = [&]() {
    const double len = rng.lognormal(cfg.length_model.log_median, cfg.length_model.log_sd);
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(len)));
  };
  auto new_response = [&](int t, std::optional<std::vector<int>> order) {
    ActionRecord rec;
    rec.item_id = item_id;
    rec.t = t;
    rec.action = WriteAction{sample_length()};
    rec.display_order = std::move(order);
    out.truth.quality.push_back(rng.normal(0.0, sigma));
    builder.apply_write(rec.write().length);
    out.trajectory.events.push_back(std::move(rec));
  };

  new_response(1, std::nullopt);

  std::vector<double> weights;
  for (int t = 2; t <= cfg.events_per_item; ++t) {
    const ItemState& state = builder.state();
    const int J = state.J;
    std::vector<int> order = rank_responses(state, cfg.rank_mechanism, cfg.tie_break);

    weights.assign(static_cast<size_t>(J) + 1, 0.0);
    for (int pos = 0; pos < J; ++pos) {
      const int resp = order[static_cast<size_t>(pos)];
      weights[static_cast<size_t>(resp)] =
          popularity(pos + 1, cfg.selection.tau, cfg.selection.rank_base);
    }
    weights[static_cast<size_t>(J)] = cfg.selection.alpha;

    const int choice = rng.categorical(weights);
    if (choice == J) {
      new_response(t, order);
    } else {
      const auto idx = static_cast<size_t>(choice);
      const double g = cfg.lambda * state.ratio_pos[idx] + cfg.mu * state.ratio_neg[idx] +
                       nu_value * state.rel_length[idx];
      const double p = vote_probability(out.truth.quality[idx], g);
      const int polarity = rng.bernoulli(p) ? 1 : 0;
      ActionRecord rec;
      rec.item_id = item_id;
      rec.t = t;
      rec.action = VoteAction{choice, polarity};
      rec.display_order = std::move(order);
      builder.apply_vote(choice, polarity, t);
      out.trajectory.events.push_back(std::move(rec));
    }
  }
  return out;
}

SimResult simulate_community(const SimConfig& cfg) {
  cfg.validate();

  SimResult out;
  out.dataset.community_id = cfg.community_id;
  out.ground_truth.community_id = cfg.community_id;
  out.ground_truth.tau = cfg.selection.tau;
  out.ground_truth.alpha = cfg.selection.alpha;
  out.ground_truth.voting.lambda = cfg.lambda;
  out.ground_truth.voting.mu = cfg.mu;
  out.ground_truth.voting.sigma2 = cfg.sigma2;

  int width = 1;
  for (int v = cfg.items - 1; v >= 10; v /= 10) ++width;

  std::int64_t seq = 0;
  for (int k = 0; k < cfg.items; ++k) {
    std::string id = std::to_string(k);
    id = "item" + std::string(static_cast<size_t>(std::max(0, width - static_cast<int>(id.size()))), '0') + id;

    Rng rng(substream_seed(cfg.seed, static_cast<std::uint64_t>(k)));
    const double nu_value = cfg.nu.sd > 0.0 ? rng.normal(cfg.nu.mean, cfg.nu.sd) : cfg.nu.mean;
    SimulatedItem item = simulate_item(cfg, id, nu_value, rng);

    for (auto& e : item.trajectory.events) e.seq = seq++;
    out.ground_truth.voting.nu[id] = item.truth.nu;
    for (size_t j = 0; j < item.truth.quality.size(); ++j)
      out.ground_truth.voting.quality[{id, static_cast<int>(j)}] = item.truth.quality[j];
    out.dataset.items.push_back(std::move(item.trajectory));
  }
  return out;
}

}  // namespace cvp
