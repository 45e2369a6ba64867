// cvp: replay, simulate, fit and evaluate helpfulness-vote trajectories.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cvp/coefficients.hpp"
#include "cvp/errors.hpp"
#include "cvp/evaluation.hpp"
#include "cvp/event_log.hpp"
#include "cvp/io_util.hpp"
#include "cvp/preprocess.hpp"
#include "cvp/rng.hpp"
#include "cvp/simulate.hpp"

namespace {

using namespace cvp;

struct CommonOpts {
  std::string input;
  std::string metadata;
  std::string output_dir;
  std::string community = "community";
  std::string urn_csv = "1,1,1";
  std::string knockout;
  std::string rank_base = "zero";
  double alpha = 0.5;
  double sigma2 = 1.0;
  double ridge = 0.5;
  int min_responses = 5;
  int stitch_gap = 3;
  int threads = 1;
  bool exclude_first_vote = false;
  int verbose = 0;
};

UrnConfig parse_urn(const std::string& csv) {
  std::stringstream ss(csv);
  std::string tok;
  std::vector<double> vals;
  while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
  if (vals.size() != 3) throw std::invalid_argument("--urn expects x0,y0,w");
  UrnConfig urn{vals[0], vals[1], vals[2]};
  urn.validate();
  return urn;
}

RankBase parse_rank_base(const std::string& s) {
  if (s == "zero") return RankBase::Zero;
  if (s == "one") return RankBase::One;
  throw std::invalid_argument("--rank-base expects zero|one");
}

RankMechanism parse_mechanism(const std::string& s) {
  if (s == "score") return RankMechanism::ByScore;
  if (s == "fraction") return RankMechanism::ByPositiveFraction;
  if (s == "arrival") return RankMechanism::ByArrival;
  throw std::invalid_argument("--rank-mechanism expects score|fraction|arrival");
}

TieBreak parse_tie(const std::string& s) {
  if (s == "arrival") return TieBreak::ByArrival;
  if (s == "lastvote") return TieBreak::ByLastVote;
  throw std::invalid_argument("--tie-break expects arrival|lastvote");
}

// Resolved, result-affecting configuration; written into every output
// directory. Thread count and verbosity are omitted because results do not
// depend on them.
struct ConfigEcho {
  std::vector<std::pair<std::string, std::string>> kv;
  void add(const std::string& k, const std::string& v) { kv.emplace_back(k, v); }
  void add(const std::string& k, double v) { add(k, format_double(v)); }
  void add(const std::string& k, std::int64_t v) { add(k, format_int(v)); }
  void add(const std::string& k, bool v) { add(k, std::string(v ? "true" : "false")); }
  std::string text() const {
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
  }
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory: " + dir);
}

void write_output(const std::string& dir, const std::string& name, const std::string& content,
                  int verbose) {
  const std::string path = dir + "/" + name;
  write_file_atomic(path, content);
  if (verbose > 0) std::cerr << "wrote " << path << "\n";
}

Dataset load_dataset(const CommonOpts& c) {
  Dataset ds = ingest_event_log_file(c.input, c.community);
  if (!c.metadata.empty()) attach_metadata_file(ds, c.metadata);
  return ds;
}

Dataset load_preprocessed(const CommonOpts& c, std::string* filter_summary) {
  FilterResult fr = preprocess_filter(load_dataset(c), c.min_responses, c.stitch_gap);
  if (filter_summary) *filter_summary = fr.report.summary();
  return std::move(fr.dataset);
}

void echo_common(ConfigEcho& cfg, const CommonOpts& c, bool with_fit_opts) {
  cfg.add("input", c.input);
  if (!c.metadata.empty()) cfg.add("metadata", c.metadata);
  cfg.add("community", c.community);
  cfg.add("alpha", c.alpha);
  cfg.add("urn", c.urn_csv);
  cfg.add("min_responses", static_cast<std::int64_t>(c.min_responses));
  cfg.add("stitch_gap", static_cast<std::int64_t>(c.stitch_gap));
  cfg.add("rank_base", c.rank_base);
  if (with_fit_opts) {
    cfg.add("sigma2", c.sigma2);
    cfg.add("ridge", c.ridge);
    cfg.add("knockout", c.knockout.empty() ? "(none)" : c.knockout);
    cfg.add("exclude_first_vote", c.exclude_first_vote);
  }
}

FitOptions make_fit_options(const CommonOpts& c) {
  FitOptions fo;
  fo.ridge = c.ridge;
  fo.exclude_first_vote = c.exclude_first_vote;
  fo.threads = c.threads;
  return fo;
}

// --- subcommands ----------------------------------------------------------

int cmd_validate(const CommonOpts& c) {
  Dataset ds = load_dataset(c);
  std::int64_t events = 0, gaps = 0, responses = 0;
  int items_with_gaps = 0;
  for (const auto& item : ds.items) {
    events += item.T();
    responses += item.j_final();
    if (item.has_gaps()) {
      ++items_with_gaps;
      for (const auto& e : item.events) gaps += e.is_gap() ? 1 : 0;
    }
  }
  std::cout << "community:        " << ds.community_id << "\n"
            << "items:            " << ds.m() << "\n"
            << "events:           " << events << "\n"
            << "responses:        " << responses << "\n"
            << "votes:            " << ds.n_votes() << "\n"
            << "gap records:      " << gaps << " (in " << items_with_gaps << " items)\n"
            << "metadata rows:    " << ds.metadata.size() << "\n"
            << "ok\n";
  return 0;
}

int cmd_simulate(const CommonOpts& c, const SimConfig& sim, double sentiment_sd, int groups,
                 std::uint64_t seed) {
  ensure_dir(c.output_dir);
  SimResult result = simulate_community(sim);

  // synthetic per-response metadata: sentiment = quality + noise, comment
  // count = votes received; enough to exercise the quality pipeline
  if (sentiment_sd > 0.0 || groups > 0) {
    Rng meta_rng(substream_seed(seed, 0x6d657461ull));  // independent of item streams
    for (int i = 0; i < result.dataset.m(); ++i) {
      const auto& item = result.dataset.items[static_cast<size_t>(i)];
      std::vector<std::int64_t> votes(static_cast<size_t>(item.j_final()), 0);
      for (const auto& e : item.events)
        if (e.is_vote()) votes[static_cast<size_t>(e.vote().response)] += 1;
      for (int j = 0; j < item.j_final(); ++j) {
        ResponseMeta row;
        row.item_id = item.item_id;
        row.response = j;
        row.comment_count = votes[static_cast<size_t>(j)];
        if (sentiment_sd > 0.0) {
          const double q = result.ground_truth.voting.quality.at({item.item_id, j});
          double s = q + meta_rng.normal(0.0, sentiment_sd);
          s = std::max(-5.0, std::min(5.0, s));
          row.avg_sentiment = s;
        }
        if (groups > 0) row.group_tag = "g" + std::to_string(i % groups);
        result.dataset.metadata.push_back(std::move(row));
      }
    }
  }

  write_output(c.output_dir, "events.jsonl", serialize_event_log(result.dataset), c.verbose);
  write_output(c.output_dir, "ground_truth.params", serialize_params(result.ground_truth), c.verbose);
  if (!result.dataset.metadata.empty())
    write_output(c.output_dir, "metadata.jsonl", serialize_metadata(result.dataset), c.verbose);

  ConfigEcho cfg;
  cfg.add("subcommand", "simulate");
  cfg.add("community", sim.community_id);
  cfg.add("items", static_cast<std::int64_t>(sim.items));
  cfg.add("events_per_item", static_cast<std::int64_t>(sim.events_per_item));
  cfg.add("tau", sim.selection.tau);
  cfg.add("alpha", sim.selection.alpha);
  cfg.add("lambda", sim.lambda);
  cfg.add("mu", sim.mu);
  cfg.add("sigma2", sim.sigma2);
  cfg.add("nu_mean", sim.nu.mean);
  cfg.add("nu_sd", sim.nu.sd);
  cfg.add("urn", c.urn_csv);
  cfg.add("rank_mechanism", sim.rank_mechanism == RankMechanism::ByScore      ? "score"
                            : sim.rank_mechanism == RankMechanism::ByArrival ? "arrival"
                                                                             : "fraction");
  cfg.add("tie_break", sim.tie_break == TieBreak::ByArrival ? "arrival" : "lastvote");
  cfg.add("length_median", std::exp(sim.length_model.log_median));
  cfg.add("length_log_sd", sim.length_model.log_sd);
  cfg.add("rank_base", c.rank_base);
  cfg.add("sentiment_sd", sentiment_sd);
  cfg.add("groups", static_cast<std::int64_t>(groups));
  cfg.add("seed", static_cast<std::int64_t>(seed));
  write_output(c.output_dir, "config.txt", cfg.text(), c.verbose);
  return 0;
}

int cmd_fit(const CommonOpts& c) {
  ensure_dir(c.output_dir);
  std::string filter_summary;
  Dataset ds = load_preprocessed(c, &filter_summary);
  const UrnConfig urn = parse_urn(c.urn_csv);
  const RankBase base = parse_rank_base(c.rank_base);
  const FeatureMask mask = FeatureMask::from_knockout(c.knockout);

  ParamsFile out_params;
  out_params.community_id = ds.community_id;
  out_params.alpha = c.alpha;

  std::string tau_note;
  try {
    const TauFit tf = fit_tau(ds, c.alpha, base);
    out_params.tau = tf.tau;
    tau_note = "tau=" + format_double(tf.tau) + " loglik=" + format_double(tf.loglik) +
               " grad=" + format_double(tf.grad) +
               (tf.saturated_high || tf.saturated_low ? " (saturated at search bound)" : "");
  } catch (const Unidentifiable& e) {
    tau_note = std::string("tau not identifiable: ") + e.what();
  }

  VotingParams init;
  init.sigma2 = c.sigma2;
  const FitResult fit = fit_voting(ds, urn, init, mask, make_fit_options(c));
  out_params.voting = fit.params;

  std::string report;
  report += "items:          " + format_int(ds.m()) + "\n";
  report += "votes:          " + format_int(ds.n_votes()) + "\n";
  report += "mask:           " + mask.name() + "\n";
  report += "selection:      " + tau_note + "\n";
  report += "voting loglik:  " + format_double(fit.final_loglik) + "\n";
  report += "vote terms:     " + format_double(fit.vote_loglik) + "\n";
  report += "objective:      " + format_double(fit.final_objective) + "\n";
  report += "grad norm:      " + format_double(fit.grad_norm) + "\n";
  report += "iterations:     " + format_int(fit.iterations) + "\n";
  report += std::string("converged:      ") + (fit.converged ? "yes" : "no") + "\n";

  write_output(c.output_dir, "fitted.params", serialize_params(out_params), c.verbose);
  write_output(c.output_dir, "fit_report.txt", report, c.verbose);
  write_output(c.output_dir, "preprocess.txt", filter_summary, c.verbose);

  ConfigEcho cfg;
  cfg.add("subcommand", "fit");
  echo_common(cfg, c, true);
  write_output(c.output_dir, "config.txt", cfg.text(), c.verbose);
  return 0;
}

int cmd_coeffs(const CommonOpts& c, int refit_stride, int full_refit_every, bool skip_first_vote) {
  ensure_dir(c.output_dir);
  std::string filter_summary;
  Dataset ds = load_preprocessed(c, &filter_summary);
  const UrnConfig urn = parse_urn(c.urn_csv);

  ConformityOptions copts;
  copts.mask = FeatureMask::from_knockout(c.knockout);
  copts.sigma2 = c.sigma2;
  copts.refit_stride = refit_stride;
  copts.full_refit_every = full_refit_every;
  copts.include_first_vote = !skip_first_vote;
  copts.fit = make_fit_options(c);

  const CoeffReport report = coefficient_report(ds, urn, c.alpha, copts, parse_rank_base(c.rank_base));
  write_output(c.output_dir, "coeffs.csv", coeff_csv(report), c.verbose);
  write_output(c.output_dir, "preprocess.txt", filter_summary, c.verbose);

  ConfigEcho cfg;
  cfg.add("subcommand", "coeffs");
  echo_common(cfg, c, true);
  cfg.add("refit_stride", static_cast<std::int64_t>(refit_stride));
  cfg.add("full_refit_every", static_cast<std::int64_t>(full_refit_every));
  cfg.add("skip_first_vote", skip_first_vote);
  write_output(c.output_dir, "config.txt", cfg.text(), c.verbose);
  return 0;
}

int cmd_eval(const CommonOpts& c, int horizon, bool ablation, bool mu_separate, bool crp_literal,
             bool emit_embedding, int refit_stride) {
  ensure_dir(c.output_dir);
  std::string filter_summary;
  Dataset ds = load_preprocessed(c, &filter_summary);
  const UrnConfig urn = parse_urn(c.urn_csv);

  EvalOptions eopts;
  eopts.horizon = horizon;
  eopts.alpha = c.alpha;
  eopts.rank_base = parse_rank_base(c.rank_base);
  eopts.crp_pseudo = crp_literal ? 0.0 : 1.0;
  eopts.sigma2 = c.sigma2;
  eopts.fit = make_fit_options(c);

  EvalReport report;
  if (ablation) {
    report = ablation_grid(ds, urn, eopts, !mu_separate);
  } else {
    report = predictive_nll(ds, urn, {FeatureMask::from_knockout(c.knockout)}, eopts);
  }
  write_output(c.output_dir, "eval_selection.csv", eval_selection_csv(report), c.verbose);
  write_output(c.output_dir, "eval_voting.csv", eval_voting_csv(report), c.verbose);

  if (emit_embedding) {
    ConformityOptions copts;
    copts.sigma2 = c.sigma2;
    copts.refit_stride = refit_stride;
    copts.fit = make_fit_options(c);
    const CoeffReport coeffs =
        coefficient_report(ds, urn, c.alpha, copts, parse_rank_base(c.rank_base));
    write_output(c.output_dir, "embedding.csv", coeff_csv(coeffs), c.verbose);
  }
  write_output(c.output_dir, "preprocess.txt", filter_summary, c.verbose);

  ConfigEcho cfg;
  cfg.add("subcommand", "eval");
  echo_common(cfg, c, true);
  cfg.add("horizon", static_cast<std::int64_t>(horizon));
  cfg.add("ablation", ablation);
  cfg.add("mu_separate", mu_separate);
  cfg.add("crp_literal", crp_literal);
  cfg.add("emit_embedding", emit_embedding);
  if (emit_embedding) cfg.add("refit_stride", static_cast<std::int64_t>(refit_stride));
  write_output(c.output_dir, "config.txt", cfg.text(), c.verbose);
  return 0;
}

int cmd_quality(const CommonOpts& c, const std::string& params_path, int bin_size,
                bool absolute_residual) {
  ensure_dir(c.output_dir);
  if (c.metadata.empty())
    throw MissingMetadata("quality analysis requires --metadata");
  std::string filter_summary;
  Dataset ds = load_preprocessed(c, &filter_summary);
  const UrnConfig urn = parse_urn(c.urn_csv);

  VotingParams fitted;
  if (!params_path.empty()) {
    fitted = parse_params(read_file(params_path)).voting;
  } else {
    VotingParams init;
    init.sigma2 = c.sigma2;
    fitted = fit_voting(ds, urn, init, FeatureMask::from_knockout(c.knockout), make_fit_options(c))
                 .params;
  }

  QualityOptions qopts;
  qopts.bin_size = bin_size;
  qopts.absolute_residual = absolute_residual;
  const QualityReport report = quality_analysis(ds, fitted, qopts);

  write_output(c.output_dir, "quality_responses.csv", quality_rows_csv(report), c.verbose);
  write_output(c.output_dir, "quality_curves.csv", quality_curves_csv(report), c.verbose);
  write_output(c.output_dir, "quality_summary.csv", quality_summary_csv(report), c.verbose);
  write_output(c.output_dir, "preprocess.txt", filter_summary, c.verbose);

  ConfigEcho cfg;
  cfg.add("subcommand", "quality");
  echo_common(cfg, c, true);
  cfg.add("params", params_path.empty() ? "(fit internally)" : params_path);
  cfg.add("bin_size", static_cast<std::int64_t>(bin_size));
  cfg.add("absolute_residual", absolute_residual);
  write_output(c.output_dir, "config.txt", cfg.text(), c.verbose);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chinese Voting Process: trajectory replay, simulation, fitting and evaluation"};
  app.require_subcommand(1);

  CommonOpts c;
  double sim_tau = 0.0, sim_lambda = 0.0, sim_mu = 0.0, sim_nu_mean = 0.0, sim_nu_sd = 0.0;
  double sim_length_median = 300.0, sim_length_log_sd = 0.7, sim_sentiment_sd = 0.0;
  int sim_items = 10, sim_events = 20, sim_groups = 0;
  std::uint64_t seed = 0;
  std::string rank_mechanism = "score", tie_break = "arrival", params_path;
  int horizon = 50, refit_stride = 25, full_refit_every = 500, bin_size = 1000;
  bool ablation = false, mu_separate = false, crp_literal = false, emit_embedding = false;
  bool skip_first_vote = false, absolute_residual = false;

  auto add_common = [&](CLI::App* sub, bool needs_input, bool needs_output) {
    if (needs_input) sub->add_option("--input", c.input, "event log (JSONL)")->required();
    if (needs_output) sub->add_option("--output-dir", c.output_dir, "directory for outputs")->required();
    sub->add_option("--metadata", c.metadata, "per-response metadata sidecar (JSONL)");
    sub->add_option("--community-id", c.community, "community label")->capture_default_str();
    sub->add_option("--alpha", c.alpha, "new-response propensity")->capture_default_str();
    sub->add_option("--urn", c.urn_csv, "urn pseudo-votes and increment: x0,y0,w")->capture_default_str();
    sub->add_option("--rank-base", c.rank_base, "rank decay base: zero|one")->capture_default_str();
    sub->add_option("--threads", c.threads, "worker threads (does not affect results)")->capture_default_str();
    sub->add_flag("-v,--verbose", c.verbose, "log progress to stderr");
  };
  auto add_fit_opts = [&](CLI::App* sub) {
    sub->add_option("--sigma2", c.sigma2, "quality prior variance")->capture_default_str();
    sub->add_option("--ridge", c.ridge, "ridge weight on lambda, mu, nu")->capture_default_str();
    sub->add_option("--knockout", c.knockout, "pin parameter groups to zero: q,lambda,mu,nu");
    sub->add_flag("--exclude-first-vote", c.exclude_first_vote,
                  "drop each response's first vote from the fit");
    sub->add_option("--min-responses", c.min_responses, "drop items with fewer responses")->capture_default_str();
    sub->add_option("--stitch-gap", c.stitch_gap, "max missing votes to stitch across")->capture_default_str();
  };

  CLI::App* v = app.add_subcommand("validate", "parse and validate an event log");
  add_common(v, true, false);

  CLI::App* s = app.add_subcommand("simulate", "generate a synthetic community");
  add_common(s, false, true);
  s->add_option("--items", sim_items, "number of items")->capture_default_str();
  s->add_option("--events", sim_events, "events per item")->capture_default_str();
  s->add_option("--tau", sim_tau, "trendiness exponent")->capture_default_str();
  s->add_option("--lambda", sim_lambda, "positive-ratio preference")->capture_default_str();
  s->add_option("--mu", sim_mu, "negative-ratio preference")->capture_default_str();
  s->add_option("--sigma2", c.sigma2, "quality prior variance")->capture_default_str();
  s->add_option("--nu-mean", sim_nu_mean, "length-bias mean")->capture_default_str();
  s->add_option("--nu-sd", sim_nu_sd, "length-bias spread across items")->capture_default_str();
  s->add_option("--rank-mechanism", rank_mechanism, "score|fraction|arrival")->capture_default_str();
  s->add_option("--tie-break", tie_break, "arrival|lastvote")->capture_default_str();
  s->add_option("--length-median", sim_length_median, "median response length")->capture_default_str();
  s->add_option("--length-log-sd", sim_length_log_sd, "log-sd of response length")->capture_default_str();
  s->add_option("--sentiment-sd", sim_sentiment_sd,
                "emit metadata with sentiment = quality + noise of this sd")
      ->capture_default_str();
  s->add_option("--groups", sim_groups, "assign items round-robin to this many group tags")->capture_default_str();
  s->add_option("--seed", seed, "RNG seed")->capture_default_str();

  CLI::App* f = app.add_subcommand("fit", "fit tau and the voting parameters");
  add_common(f, true, true);
  add_fit_opts(f);

  CLI::App* k = app.add_subcommand("coeffs", "community behavioral coefficients");
  add_common(k, true, true);
  add_fit_opts(k);
  k->add_option("--refit-stride", refit_stride, "votes between conformity refits")->capture_default_str();
  k->add_option("--full-refit-every", full_refit_every, "votes between cold restarts")->capture_default_str();
  k->add_flag("--skip-first-vote", skip_first_vote,
              "exclude the community's first vote from conformity");

  CLI::App* e = app.add_subcommand("eval", "predictive next-action evaluation");
  add_common(e, true, true);
  add_fit_opts(e);
  e->add_option("--horizon", horizon, "predict actions at indices up to this")->capture_default_str();
  e->add_flag("--ablation", ablation, "run the full feature-subset grid");
  e->add_flag("--mu-separate", mu_separate, "treat mu as its own ablation group");
  e->add_flag("--crp-literal", crp_literal, "CRP baseline without the +1 pseudo-count");
  e->add_flag("--emit-embedding", emit_embedding, "also write the (trendiness, conformity) table");
  e->add_option("--refit-stride", refit_stride, "conformity refit stride for the embedding")->capture_default_str();

  CLI::App* q = app.add_subcommand("quality", "final-snapshot quality analysis");
  add_common(q, true, true);
  add_fit_opts(q);
  q->add_option("--params", params_path, "fitted parameter file (otherwise fit internally)");
  q->add_option("--bin-size", bin_size, "responses per curve bin")->capture_default_str();
  q->add_flag("--absolute-residual", absolute_residual, "mean absolute instead of mean squared");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (v->parsed()) return cmd_validate(c);
    if (s->parsed()) {
      SimConfig sim;
      sim.community_id = c.community == "community" ? "sim" : c.community;
      sim.selection.tau = sim_tau;
      sim.selection.alpha = c.alpha;
      sim.selection.rank_base = parse_rank_base(c.rank_base);
      sim.lambda = sim_lambda;
      sim.mu = sim_mu;
      sim.sigma2 = c.sigma2;
      sim.nu = NuSpec{sim_nu_mean, sim_nu_sd};
      sim.urn = parse_urn(c.urn_csv);
      sim.rank_mechanism = parse_mechanism(rank_mechanism);
      sim.tie_break = parse_tie(tie_break);
      sim.length_model.log_median = std::log(sim_length_median);
      sim.length_model.log_sd = sim_length_log_sd;
      sim.events_per_item = sim_events;
      sim.items = sim_items;
      sim.seed = seed;
      return cmd_simulate(c, sim, sim_sentiment_sd, sim_groups, seed);
    }
    if (f->parsed()) return cmd_fit(c);
    if (k->parsed()) return cmd_coeffs(c, refit_stride, full_refit_every, skip_first_vote);
    if (e->parsed())
      return cmd_eval(c, horizon, ablation, mu_separate, crp_literal, emit_embedding, refit_stride);
    if (q->parsed()) return cmd_quality(c, params_path, bin_size, absolute_residual);
  } catch (const ValidationError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const NumericError& err) {
    std::cerr << "numerical failure: " << err.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
