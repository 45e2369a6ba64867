#include "cvp/selection.hpp"

#include <cmath>

#include "cvp/errors.hpp"

namespace cvp {

namespace {

inline double logrank(int display_rank, RankBase base) {
  // internal rank: 0-based for Zero, 1-based for One
  const int r = base == RankBase::Zero ? display_rank - 1 : display_rank;
  return std::log1p(static_cast<double>(r));
}

constexpr double kTauLo = -10.0;
constexpr double kTauHi = 10.0;

}  // namespace

double popularity(int display_rank, double tau, RankBase base) {
  return std::exp(-tau * logrank(display_rank, base));
}

std::vector<double> selection_distribution(const ItemState& state, const SelectionParams& params) {
  const int J = state.J;
  std::vector<double> p(static_cast<size_t>(J) + 1, 0.0);
  double total = params.alpha;
  for (int j = 0; j < J; ++j) {
    const double f = popularity(state.display_rank[static_cast<size_t>(j)], params.tau, params.rank_base);
    p[static_cast<size_t>(j)] = f;
    total += f;
  }
  p[static_cast<size_t>(J)] = params.alpha;
  for (auto& v : p) v /= total;
  return p;
}

std::vector<double> crp_selection_distribution(const ItemState& state, double alpha,
                                               double pseudo_count) {
  const int J = state.J;
  std::vector<double> p(static_cast<size_t>(J) + 1, 0.0);
  double total = alpha;
  for (int j = 0; j < J; ++j) {
    const auto idx = static_cast<size_t>(j);
    const double wgt = pseudo_count + state.pos_votes[idx] + state.neg_votes[idx];
    p[idx] = wgt;
    total += wgt;
  }
  p[static_cast<size_t>(J)] = alpha;
  for (auto& v : p) v /= total;
  return p;
}

SelectionDesign SelectionDesign::build(const Dataset& ds, RankBase base) {
  SelectionDesign d;
  for (int i = 0; i < ds.m(); ++i) {
    const auto& item = ds.items[static_cast<size_t>(i)];
    for (int k = 1; k < item.T(); ++k) {  // the forced first write carries no choice
      const ActionRecord& e = item.events[static_cast<size_t>(k)];
      if (e.is_gap())
        throw MalformedRecord("cannot score an unstitched gap record: " +
                              record_context(e.item_id, e.t));
      if (!e.display_order)
        throw MissingDisplayOrder("event has no display order: " + record_context(e.item_id, e.t));
      const auto& order = *e.display_order;
      Event ev;
      ev.is_write = e.is_write();
      ev.t = e.t;
      ev.seq = e.seq;
      ev.item = i;
      ev.offset = static_cast<std::int32_t>(d.logranks.size());
      ev.count = static_cast<std::int32_t>(order.size());
      for (size_t pos = 0; pos < order.size(); ++pos) {
        const double lr = logrank(static_cast<int>(pos) + 1, base);
        d.logranks.push_back(lr);
        if (e.is_vote() && order[pos] == e.vote().response) ev.chosen_logrank = lr;
      }
      d.events.push_back(ev);
    }
  }
  return d;
}

namespace {

// Per-event selection terms. With f_j = exp(-tau * L_j), D = alpha + sum f:
//   loglik: write -> log(alpha) - log(D),  vote -> -tau * L_z - log(D)
//   d/dtau:  sum_j L_j f_j / D - [vote] L_z
//   d2/dtau2: -sum_j L_j^2 f_j / D + (sum_j L_j f_j / D)^2   (always <= 0)
// These forms are exact for every tau, including 0.
struct EventTerms {
  double loglik = 0.0;
  double grad = 0.0;
  double curv = 0.0;
};

EventTerms event_terms(const SelectionDesign& d, const SelectionDesign::Event& ev, double tau,
                       double alpha) {
  double sum_f = 0.0, sum_lf = 0.0, sum_llf = 0.0;
  for (std::int32_t k = 0; k < ev.count; ++k) {
    const double L = d.logranks[static_cast<size_t>(ev.offset + k)];
    const double f = std::exp(-tau * L);
    sum_f += f;
    sum_lf += L * f;
    sum_llf += L * L * f;
  }
  const double denom = alpha + sum_f;
  EventTerms out;
  const double mean_l = sum_lf / denom;
  out.curv = -sum_llf / denom + mean_l * mean_l;
  if (ev.is_write) {
    out.loglik = std::log(alpha) - std::log(denom);
    out.grad = mean_l;
  } else {
    out.loglik = -tau * ev.chosen_logrank - std::log(denom);
    out.grad = mean_l - ev.chosen_logrank;
  }
  return out;
}

struct GradCurv {
  double grad = 0.0;
  double curv = 0.0;
};

GradCurv grad_curv(const SelectionDesign& d, double tau, double alpha, SelectionBounds b) {
  GradCurv out;
  for (const auto& ev : d.events) {
    if (ev.t > b.t_max || ev.seq >= b.seq_before) continue;
    const EventTerms t = event_terms(d, ev, tau, alpha);
    out.grad += t.grad;
    out.curv += t.curv;
  }
  return out;
}

}  // namespace

double selection_loglik(const SelectionDesign& d, double tau, double alpha, SelectionBounds b) {
  double ll = 0.0;
  for (const auto& ev : d.events) {
    if (ev.t > b.t_max || ev.seq >= b.seq_before) continue;
    ll += event_terms(d, ev, tau, alpha).loglik;
  }
  return ll;
}

double selection_grad_tau(const SelectionDesign& d, double tau, double alpha, SelectionBounds b) {
  double g = 0.0;
  for (const auto& ev : d.events) {
    if (ev.t > b.t_max || ev.seq >= b.seq_before) continue;
    g += event_terms(d, ev, tau, alpha).grad;
  }
  return g;
}

double selection_loglik(const Dataset& ds, const SelectionParams& params) {
  return selection_loglik(SelectionDesign::build(ds, params.rank_base), params.tau, params.alpha);
}

double selection_grad_tau(const Dataset& ds, const SelectionParams& params) {
  return selection_grad_tau(SelectionDesign::build(ds, params.rank_base), params.tau, params.alpha);
}

TauFit fit_tau(const SelectionDesign& d, double alpha, SelectionBounds bounds) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");

  std::int64_t informative = 0;
  for (const auto& ev : d.events) {
    if (ev.t > bounds.t_max || ev.seq >= bounds.seq_before) continue;
    if (ev.count >= 2) ++informative;
  }
  if (informative == 0)
    throw Unidentifiable("no selection event with two or more displayed responses");

  TauFit fit;
  fit.informative_events = informative;

  // The log-likelihood is concave, so the gradient decreases in tau:
  // bracket on the gradient sign, then safeguarded Newton.
  double lo = kTauLo, hi = kTauHi;
  int iters = 0;
  double tau;
  if (grad_curv(d, hi, alpha, bounds).grad >= 0.0) {
    tau = hi;
    fit.saturated_high = true;
  } else if (grad_curv(d, lo, alpha, bounds).grad <= 0.0) {
    tau = lo;
    fit.saturated_low = true;
  } else {
    tau = 0.0;
    GradCurv gc = grad_curv(d, tau, alpha, bounds);
    for (iters = 0; iters < 200; ++iters) {
      if (gc.grad > 0.0) lo = tau;
      else hi = tau;
      double next = gc.curv < 0.0 ? tau - gc.grad / gc.curv : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      const double step = next - tau;
      tau = next;
      gc = grad_curv(d, tau, alpha, bounds);
      if (std::abs(step) <= 1e-8) break;
    }
  }

  fit.tau = tau;
  fit.iterations = iters;
  fit.grad = selection_grad_tau(d, tau, alpha, bounds);
  fit.loglik = selection_loglik(d, tau, alpha, bounds);
  return fit;
}

TauFit fit_tau(const Dataset& ds, double alpha, RankBase base) {
  return fit_tau(SelectionDesign::build(ds, base), alpha);
}

}  // namespace cvp
