#include "cvp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cvp/errors.hpp"
#include "cvp/io_util.hpp"
#include "cvp/replay.hpp"

namespace cvp {

const EvalSeries* EvalReport::find_selection(const std::string& name) const {
  for (const auto& s : selection)
    if (s.name == name) return &s;
  return nullptr;
}

const EvalSeries* EvalReport::find_voting(const std::string& name) const {
  for (const auto& s : voting)
    if (s.name == name) return &s;
  return nullptr;
}

namespace {

void add(EvalSeries& series, int step, double nll) {
  series.by_step[static_cast<size_t>(step)].nll_sum += nll;
  series.by_step[static_cast<size_t>(step)].count += 1;
  series.total_nll += nll;
  series.total_count += 1;
}

}  // namespace

EvalReport predictive_nll(const Dataset& ds, const UrnConfig& urn,
                          const std::vector<FeatureMask>& voting_variants,
                          const EvalOptions& opts) {
  if (opts.horizon < 2) throw std::invalid_argument("horizon must be >= 2");

  EvalReport report;
  report.horizon = opts.horizon;
  report.selection.push_back(EvalSeries{"cvp", {}, 0.0, 0});
  if (opts.include_crp) report.selection.push_back(EvalSeries{"crp", {}, 0.0, 0});
  for (const auto& mask : voting_variants) report.voting.push_back(EvalSeries{mask.name(), {}, 0.0, 0});
  for (auto& s : report.selection) s.by_step.assign(static_cast<size_t>(opts.horizon) + 1, EvalCell{});
  for (auto& s : report.voting) s.by_step.assign(static_cast<size_t>(opts.horizon) + 1, EvalCell{});

  // replays and designs over the full data; truncation is by row bounds
  std::vector<std::vector<ItemState>> states;
  states.reserve(ds.items.size());
  for (const auto& item : ds.items) states.push_back(replay(item, urn));

  const SelectionDesign sel_design = SelectionDesign::build(ds, opts.rank_base);
  const VotingDesign vote_design = VotingDesign::build(ds, urn, opts.fit.exclude_first_vote);

  std::vector<VotingParams> thetas(voting_variants.size());
  for (auto& th : thetas) th.sigma2 = opts.sigma2;
  double tau = opts.fixed_tau.value_or(0.0);

  for (int t = 1; t + 1 <= opts.horizon; ++t) {
    const int predicted = t + 1;

    // learn on everything up to within-item index t
    if (!opts.fixed_tau) {
      try {
        SelectionBounds sb;
        sb.t_max = t;
        tau = fit_tau(sel_design, opts.alpha, sb).tau;
      } catch (const Unidentifiable&) {
        // keep the previous estimate until the data pins tau down
      }
    }
    if (!opts.fixed_voting) {
      RowBounds vb;
      vb.t_max = t;
      for (size_t v = 0; v < voting_variants.size(); ++v)
        thetas[v] =
            fit_voting_design(vote_design, opts.sigma2, thetas[v], voting_variants[v], opts.fit, vb)
                .params;
    }

    for (int i = 0; i < ds.m(); ++i) {
      const auto& item = ds.items[static_cast<size_t>(i)];
      if (item.T() < predicted) continue;
      const ActionRecord& e = item.events[static_cast<size_t>(predicted - 1)];
      const ItemState& pre = states[static_cast<size_t>(i)][static_cast<size_t>(predicted - 1)];

      // selection phase
      if (!e.display_order)
        throw MissingDisplayOrder("event has no display order: " + record_context(e.item_id, e.t));
      const auto& disp = *e.display_order;
      {
        double sum_f = 0.0, chosen_f = 0.0;
        for (size_t pos = 0; pos < disp.size(); ++pos) {
          const double f = popularity(static_cast<int>(pos) + 1, tau, opts.rank_base);
          sum_f += f;
          if (e.is_vote() && disp[pos] == e.vote().response) chosen_f = f;
        }
        const double denom = opts.alpha + sum_f;
        const double p = e.is_write() ? opts.alpha / denom : chosen_f / denom;
        add(report.selection[0], predicted, -std::log(p));
      }
      if (opts.include_crp) {
        const auto crp = crp_selection_distribution(pre, opts.alpha, opts.crp_pseudo);
        const double p = e.is_write() ? crp[static_cast<size_t>(pre.J)]
                                      : crp[static_cast<size_t>(e.vote().response)];
        add(report.selection[1], predicted, -std::log(p));
      }

      // voting phase
      if (e.is_vote()) {
        const int j = e.vote().response;
        const auto idx = static_cast<size_t>(j);
        for (size_t v = 0; v < report.voting.size(); ++v) {
          const VotingParams& th = opts.fixed_voting ? *opts.fixed_voting : thetas[v];
          auto nu_it = th.nu.find(item.item_id);
          const double nu = nu_it == th.nu.end() ? 0.0 : nu_it->second;
          const double g = th.lambda * pre.ratio_pos[idx] + th.mu * pre.ratio_neg[idx] +
                           nu * pre.rel_length[idx];
          const double ll =
              log_vote_probability(e.vote().polarity, th.quality_or(item.item_id, j), g);
          add(report.voting[v], predicted, -ll);
        }
      }
    }
  }
  return report;
}

EvalReport ablation_grid(const Dataset& ds, const UrnConfig& urn, const EvalOptions& opts,
                         bool group_mu_with_lambda) {
  std::vector<FeatureMask> variants;
  const int k = group_mu_with_lambda ? 3 : 4;
  for (int bits = 0; bits < (1 << k); ++bits) {
    FeatureMask m = FeatureMask::none();
    m.quality = bits & 1;
    m.lambda = bits & 2;
    if (group_mu_with_lambda) {
      m.mu = m.lambda;
      m.nu = bits & 4;
    } else {
      m.mu = bits & 4;
      m.nu = bits & 8;
    }
    variants.push_back(m);
  }
  EvalOptions grid_opts = opts;
  grid_opts.include_crp = true;  // the selection baseline row
  return predictive_nll(ds, urn, variants, grid_opts);
}

std::string eval_selection_csv(const EvalReport& report) {
  std::string out = "t,count";
  for (const auto& s : report.selection) out += "," + s.name + "_nll";
  out += "\n";
  for (int p = 2; p <= report.horizon; ++p) {
    const auto& cell = report.selection[0].by_step[static_cast<size_t>(p)];
    if (cell.count == 0) continue;
    out += format_int(p) + "," + format_int(cell.count);
    for (const auto& s : report.selection) {
      const auto& c = s.by_step[static_cast<size_t>(p)];
      out += "," + format_double(c.count > 0 ? c.nll_sum / static_cast<double>(c.count) : 0.0);
    }
    out += "\n";
  }
  out += "all," + format_int(report.selection[0].total_count);
  for (const auto& s : report.selection) out += "," + format_double(s.avg());
  out += "\n";
  return out;
}

std::string eval_voting_csv(const EvalReport& report) {
  std::string out = "t,variant,count,nll\n";
  for (const auto& s : report.voting) {
    for (int p = 2; p <= report.horizon; ++p) {
      const auto& c = s.by_step[static_cast<size_t>(p)];
      if (c.count == 0) continue;
      out += format_int(p) + "," + s.name + "," + format_int(c.count) + "," +
             format_double(c.nll_sum / static_cast<double>(c.count)) + "\n";
    }
    out += "all," + s.name + "," + format_int(s.total_count) + "," + format_double(s.avg()) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> rank_zscore(const std::vector<double>& values) {
  const size_t n = values.size();
  if (n < 2) throw ZeroVariance("z-score needs at least 2 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);  // population variance
  if (var <= 0.0) throw ZeroVariance("z-score of constant values");
  const double sd = std::sqrt(var);
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = (values[i] - mean) / sd;
  return out;
}

std::vector<CurvePoint> bin_average(const std::vector<std::pair<double, double>>& sorted_rows,
                                    int bin_size) {
  if (bin_size < 1) throw std::invalid_argument("bin_size must be >= 1");
  std::vector<CurvePoint> out;
  for (size_t begin = 0; begin < sorted_rows.size(); begin += static_cast<size_t>(bin_size)) {
    const size_t end = std::min(sorted_rows.size(), begin + static_cast<size_t>(bin_size));
    CurvePoint pt;
    for (size_t i = begin; i < end; ++i) {
      pt.x_mean += sorted_rows[i].first;
      pt.y_mean += sorted_rows[i].second;
    }
    pt.count = static_cast<std::int64_t>(end - begin);
    pt.x_mean /= static_cast<double>(pt.count);
    pt.y_mean /= static_cast<double>(pt.count);
    out.push_back(pt);
  }
  return out;
}

OlsFit regression_residual(const std::vector<std::pair<double, double>>& points,
                           bool absolute_residual) {
  const size_t n = points.size();
  if (n < 3) throw DegenerateX("regression needs at least 3 points");
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : points) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx <= 0.0) throw DegenerateX("regression over constant x");
  OlsFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double acc = 0.0;
  for (const auto& [x, y] : points) {
    const double d = y - (fit.slope * x + fit.intercept);
    acc += absolute_residual ? std::abs(d) : d * d;
  }
  fit.residual = acc / static_cast<double>(n);
  return fit;
}

double bumpiness(const std::vector<std::pair<double, double>>& points) {
  const size_t n = points.size();
  if (n < 3) throw std::invalid_argument("bumpiness needs at least 3 points");
  std::vector<double> slopes;
  slopes.reserve(n - 1);
  for (size_t i = 0; i + 1 < n; ++i) {
    const double dx = points[i + 1].first - points[i].first;
    if (dx <= 0.0) throw DuplicateX("bumpiness needs strictly increasing x");
    slopes.push_back((points[i + 1].second - points[i].second) / dx);
  }
  double acc = 0.0;
  for (size_t i = 0; i + 1 < slopes.size(); ++i) acc += std::abs(slopes[i + 1] - slopes[i]);
  return acc / static_cast<double>(slopes.size() - 1);
}

namespace {

RankingSummary summarize(const std::vector<CurvePoint>& curve, bool absolute_residual) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(curve.size());
  for (const auto& p : curve) pts.emplace_back(p.x_mean, p.y_mean);
  RankingSummary s;
  const OlsFit fit = regression_residual(pts, absolute_residual);
  s.slope = fit.slope;
  s.intercept = fit.intercept;
  s.residual = fit.residual;
  s.bumpiness = cvp::bumpiness(pts);
  s.points = static_cast<std::int64_t>(pts.size());
  return s;
}

}  // namespace

QualityReport quality_analysis(const Dataset& ds, const VotingParams& fitted,
                               const QualityOptions& opts) {
  if (!ds.has_metadata()) throw MissingMetadata("quality analysis requires the metadata sidecar");

  // final display ranks and their within-item z-scores
  std::map<std::string, std::vector<int>> ranks;
  std::map<std::string, std::vector<double>> rank_z;
  for (const auto& item : ds.items) {
    auto r = final_display_ranks(item);
    if (r.size() >= 2) {
      std::vector<double> vals(r.begin(), r.end());
      rank_z[item.item_id] = rank_zscore(vals);
    } else {
      rank_z[item.item_id] = std::vector<double>(r.size(), 0.0);
    }
    ranks[item.item_id] = std::move(r);
  }

  // community-wide z-scores of the fitted qualities
  std::vector<double> all_q;
  std::map<std::pair<std::string, int>, size_t> q_pos;
  for (const auto& item : ds.items) {
    const int J = item.j_final();
    for (int j = 0; j < J; ++j) {
      q_pos[{item.item_id, j}] = all_q.size();
      all_q.push_back(fitted.quality_or(item.item_id, j));
    }
  }
  const std::vector<double> all_q_z = rank_zscore(all_q);

  QualityReport report;
  for (const auto& meta : ds.metadata) {
    auto rit = ranks.find(meta.item_id);
    if (rit == ranks.end()) continue;
    QualityRow row;
    row.item_id = meta.item_id;
    row.response = meta.response;
    row.display_rank = rit->second[static_cast<size_t>(meta.response)];
    row.display_rank_z = rank_z[meta.item_id][static_cast<size_t>(meta.response)];
    row.quality = fitted.quality_or(meta.item_id, meta.response);
    row.quality_z = all_q_z[q_pos[{meta.item_id, meta.response}]];
    row.comment_count = meta.comment_count;
    row.avg_sentiment = meta.avg_sentiment;
    row.group_tag = meta.group_tag;
    report.rows.push_back(std::move(row));
  }

  // curves over rows that carry sentiment
  std::vector<std::pair<double, double>> by_display, by_quality;
  for (const auto& row : report.rows) {
    if (!row.avg_sentiment) continue;
    by_display.emplace_back(row.display_rank_z, *row.avg_sentiment);
    by_quality.emplace_back(row.quality_z, *row.avg_sentiment);
  }
  std::sort(by_display.begin(), by_display.end());
  std::sort(by_quality.begin(), by_quality.end());

  const auto n = static_cast<std::int64_t>(by_display.size());
  int bin = opts.bin_size;
  if (n < 3LL * bin) bin = std::max<int>(1, static_cast<int>((n + 19) / 20));
  report.bin_size_used = bin;

  if (n > 0) {
    report.display_curve = bin_average(by_display, bin);
    report.quality_curve = bin_average(by_quality, bin);
    report.display_summary = summarize(report.display_curve, opts.absolute_residual);
    report.quality_summary = summarize(report.quality_curve, opts.absolute_residual);
  }
  return report;
}

std::string quality_rows_csv(const QualityReport& report) {
  std::string out =
      "item,response,display_rank,display_rank_z,quality,quality_z,comment_count,avg_sentiment,group_tag\n";
  for (const auto& r : report.rows) {
    out += r.item_id + "," + format_int(r.response) + "," + format_int(r.display_rank) + "," +
           format_double(r.display_rank_z) + "," + format_double(r.quality) + "," +
           format_double(r.quality_z) + "," + format_int(r.comment_count) + ",";
    if (r.avg_sentiment) out += format_double(*r.avg_sentiment);
    out += "," + r.group_tag + "\n";
  }
  return out;
}

std::string quality_curves_csv(const QualityReport& report) {
  std::string out = "ranking,bin,x_mean,sentiment_mean,count\n";
  auto emit = [&](const char* name, const std::vector<CurvePoint>& curve) {
    for (size_t i = 0; i < curve.size(); ++i)
      out += std::string(name) + "," + format_int(static_cast<std::int64_t>(i)) + "," +
             format_double(curve[i].x_mean) + "," + format_double(curve[i].y_mean) + "," +
             format_int(curve[i].count) + "\n";
  };
  emit("display", report.display_curve);
  emit("quality", report.quality_curve);
  return out;
}

std::string quality_summary_csv(const QualityReport& report) {
  std::string out = "ranking,slope,intercept,residual,bumpiness,points,bin_size\n";
  auto emit = [&](const char* name, const RankingSummary& s) {
    out += std::string(name) + "," + format_double(s.slope) + "," + format_double(s.intercept) +
           "," + format_double(s.residual) + "," + format_double(s.bumpiness) + "," +
           format_int(s.points) + "," + format_int(report.bin_size_used) + "\n";
  };
  emit("display", report.display_summary);
  emit("quality", report.quality_summary);
  return out;
}

}  // namespace cvp
