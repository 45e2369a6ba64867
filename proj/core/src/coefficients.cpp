#include "cvp/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "cvp/errors.hpp"
#include "cvp/io_util.hpp"

namespace cvp {

ConformityResult conformity(const Dataset& ds, const UrnConfig& urn, const ConformityOptions& opts) {
  const VotingDesign design = VotingDesign::build(ds, urn, false);

  // community-global vote timeline
  std::vector<size_t> order(design.votes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return design.votes[a].seq < design.votes[b].seq;
  });

  VotingParams theta;
  theta.sigma2 = opts.sigma2;
  if (opts.fixed_params) theta = *opts.fixed_params;

  double log_sum = 0.0;
  std::int64_t n = 0;
  for (size_t k = 0; k < order.size(); ++k) {
    const auto& row = design.votes[order[k]];

    if (!opts.fixed_params && opts.refit_stride > 0 &&
        k % static_cast<size_t>(opts.refit_stride) == 0) {
      const bool cold = opts.full_refit_every > 0 &&
                        k % static_cast<size_t>(opts.full_refit_every) == 0;
      VotingParams init = theta;
      if (cold) {
        init = VotingParams{};
        init.sigma2 = opts.sigma2;
      }
      RowBounds bounds;
      bounds.seq_before = row.seq;  // strictly before this vote
      theta = fit_voting_design(design, opts.sigma2, init, opts.mask, opts.fit, bounds).params;
    }

    if (k == 0 && !opts.include_first_vote) continue;

    const std::string& item_id = design.item_ids[static_cast<size_t>(row.item)];
    const auto& q_key = design.q_keys[static_cast<size_t>(row.q_idx)];
    const double q = theta.quality_or(item_id, q_key.second);
    auto nu_it = theta.nu.find(item_id);
    const double nu = nu_it == theta.nu.end() ? 0.0 : nu_it->second;
    // log-odds of a positive vote; exactly log p(v=1) - log p(v=0)
    const double log_odds = q + theta.lambda * row.r + theta.mu * row.s + nu * row.u;

    int h = row.npos >= row.nneg ? 1 : -1;
    if (opts.invert_majority) h = -h;
    log_sum += h * log_odds;
    ++n;
  }

  ConformityResult res;
  res.n_votes = n;
  res.log_kappa = n > 0 ? log_sum / static_cast<double>(n) : 0.0;
  res.kappa = std::exp(res.log_kappa);
  return res;
}

TauFit trendiness(const Dataset& ds, double alpha, RankBase base) {
  return fit_tau(ds, alpha, base);
}

namespace {

// item id -> first non-empty group tag among its metadata rows
std::map<std::string, std::string> item_groups(const Dataset& ds) {
  std::map<std::string, std::string> tags;
  for (const auto& row : ds.metadata) {
    if (row.group_tag.empty()) continue;
    tags.emplace(row.item_id, row.group_tag);
  }
  return tags;
}

Dataset subset_by_group(const Dataset& ds, const std::map<std::string, std::string>& tags,
                        const std::string& tag) {
  Dataset sub;
  sub.community_id = ds.community_id;
  for (const auto& item : ds.items) {
    auto it = tags.find(item.item_id);
    if (it != tags.end() && it->second == tag) sub.items.push_back(item);
  }
  for (const auto& row : ds.metadata)
    if (sub.find_item(row.item_id)) sub.metadata.push_back(row);
  return sub;
}

}  // namespace

CoeffReport coefficient_report(const Dataset& ds, const UrnConfig& urn, double alpha,
                               const ConformityOptions& opts, RankBase base) {
  CoeffReport report;
  report.refit_stride = opts.refit_stride;

  const TauFit tau = trendiness(ds, alpha, base);
  const ConformityResult kappa = conformity(ds, urn, opts);
  report.rows.push_back(CoeffRow{ds.community_id, "", tau.tau, kappa.kappa, kappa.n_votes});

  const auto tags = item_groups(ds);
  std::vector<std::string> distinct;
  for (const auto& [item, tag] : tags)
    if (std::find(distinct.begin(), distinct.end(), tag) == distinct.end()) distinct.push_back(tag);
  std::sort(distinct.begin(), distinct.end());

  for (const auto& tag : distinct) {
    const Dataset sub = subset_by_group(ds, tags, tag);
    try {
      const TauFit t = trendiness(sub, alpha, base);
      const ConformityResult c = conformity(sub, urn, opts);
      report.rows.push_back(CoeffRow{ds.community_id, tag, t.tau, c.kappa, c.n_votes});
    } catch (const Unidentifiable&) {
      // group too small to place in the embedding
    }
  }
  return report;
}

std::string coeff_csv(const CoeffReport& report) {
  std::string out = "community_id,group_tag,trendiness,conformity,n\n";
  for (const auto& r : report.rows) {
    out += r.community_id + "," + r.group_tag + "," + format_double(r.trendiness) + "," +
           format_double(r.conformity) + "," + format_int(r.n_votes) + "\n";
  }
  return out;
}

}  // namespace cvp
