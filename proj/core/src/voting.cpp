#include "cvp/voting.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "cvp/errors.hpp"
#include "cvp/io_util.hpp"
#include "cvp/parallel.hpp"

namespace cvp {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;  // log(2*pi)
constexpr std::size_t kChunk = 8192;

double log_sigmoid(double z) {
  // log(1 / (1 + exp(-z))), stable for |z| up to the double range
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

}  // namespace

FeatureMask FeatureMask::from_knockout(const std::string& csv) {
  FeatureMask m;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    if (tok == "q" || tok == "quality") m.quality = false;
    else if (tok == "lambda") m.lambda = false;
    else if (tok == "mu") m.mu = false;
    else if (tok == "nu") m.nu = false;
    else throw std::invalid_argument("unknown knockout group '" + tok + "' (expected q,lambda,mu,nu)");
  }
  return m;
}

std::string FeatureMask::name() const {
  if (quality && lambda && mu && nu) return "full";
  std::string out;
  auto add = [&](const char* n) {
    if (!out.empty()) out += '+';
    out += n;
  };
  if (quality) add("q");
  if (lambda) add("lambda");
  if (mu) add("mu");
  if (nu) add("nu");
  return out.empty() ? "none" : out;
}

double VotingParams::quality_or(const std::string& item_id, int response, double fallback) const {
  auto it = quality.find({item_id, response});
  return it == quality.end() ? fallback : it->second;
}

double polarity_score(const ItemState& state, int j, const VotingParams& params,
                      const std::string& item_id) {
  auto nu_it = params.nu.find(item_id);
  if (nu_it == params.nu.end())
    throw UnknownItem("no length-bias parameter for " + record_context(item_id, -1));
  const auto idx = static_cast<size_t>(j);
  return params.lambda * state.ratio_pos[idx] + params.mu * state.ratio_neg[idx] +
         nu_it->second * state.rel_length[idx];
}

double vote_probability(double q, double g) {
  const double z = q + g;
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_vote_probability(int polarity, double q, double g) {
  const double z = q + g;
  return log_sigmoid(polarity == 1 ? z : -z);
}

double voting_loglik(const Dataset& ds, const VotingParams& params, const UrnConfig& urn,
                     bool include_quality_prior, bool exclude_first_vote) {
  const double prior_const = -0.5 * (kLogTwoPi + std::log(params.sigma2));
  double ll = 0.0;
  for (const auto& item : ds.items) {
    const auto states = replay(item, urn);
    const auto nu_it = params.nu.find(item.item_id);
    const double nu = nu_it == params.nu.end() ? 0.0 : nu_it->second;
    int next_response = 0;
    std::vector<int> votes_seen;
    for (int k = 0; k < item.T(); ++k) {
      const ActionRecord& e = item.events[static_cast<size_t>(k)];
      const ItemState& pre = states[static_cast<size_t>(k)];
      if (e.is_write()) {
        votes_seen.push_back(0);
        if (include_quality_prior) {
          const double q = params.quality_or(item.item_id, next_response);
          ll += prior_const - q * q / (2.0 * params.sigma2);
        }
        ++next_response;
      } else if (e.is_vote()) {
        const int j = e.vote().response;
        if (exclude_first_vote && votes_seen[static_cast<size_t>(j)] == 0) {
          votes_seen[static_cast<size_t>(j)] += 1;
          continue;
        }
        votes_seen[static_cast<size_t>(j)] += 1;
        const auto idx = static_cast<size_t>(j);
        const double g = params.lambda * pre.ratio_pos[idx] + params.mu * pre.ratio_neg[idx] +
                         nu * pre.rel_length[idx];
        ll += log_vote_probability(e.vote().polarity, params.quality_or(item.item_id, j), g);
      }
    }
  }
  return ll;
}

// ---------------------------------------------------------------------------

VotingDesign VotingDesign::build(const Dataset& ds, const UrnConfig& urn, bool exclude_first_vote) {
  VotingDesign d;
  d.item_ids.reserve(ds.items.size());
  d.votes_per_item.assign(ds.items.size(), 0);

  for (int i = 0; i < ds.m(); ++i) {
    const auto& item = ds.items[static_cast<size_t>(i)];
    d.item_ids.push_back(item.item_id);
    const auto states = replay(item, urn);
    int next_response = 0;
    std::vector<int> q_of_response;
    std::vector<int> votes_seen;
    for (int k = 0; k < item.T(); ++k) {
      const ActionRecord& e = item.events[static_cast<size_t>(k)];
      if (e.is_write()) {
        const int q_idx = static_cast<int>(d.q_keys.size());
        d.q_keys.emplace_back(i, next_response++);
        q_of_response.push_back(q_idx);
        votes_seen.push_back(0);
        d.writes.push_back(WriteRow{i, q_idx, e.t, e.seq});
      } else if (e.is_vote()) {
        const int j = e.vote().response;
        const bool first = votes_seen[static_cast<size_t>(j)] == 0;
        votes_seen[static_cast<size_t>(j)] += 1;
        d.votes_per_item[static_cast<size_t>(i)] += 1;
        if (exclude_first_vote && first) continue;
        const ItemState& pre = states[static_cast<size_t>(k)];
        const auto idx = static_cast<size_t>(j);
        VoteRow row;
        row.item = i;
        row.q_idx = q_of_response[idx];
        row.r = pre.ratio_pos[idx];
        row.s = pre.ratio_neg[idx];
        row.u = pre.rel_length[idx];
        row.polarity = e.vote().polarity;
        row.npos = pre.pos_votes[idx];
        row.nneg = pre.neg_votes[idx];
        row.t = e.t;
        row.seq = e.seq;
        d.votes.push_back(row);
      }
    }
  }
  return d;
}

int VotingDesign::q_index(int item, int response) const {
  for (size_t k = 0; k < q_keys.size(); ++k)
    if (q_keys[k].first == item && q_keys[k].second == response) return static_cast<int>(k);
  return -1;
}

VotingObjective::VotingObjective(const VotingDesign& design, FeatureMask mask, double sigma2,
                                 const FitOptions& opts, RowBounds bounds)
    : design_(design), mask_(mask), sigma2_(sigma2), opts_(opts), bounds_(bounds) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");

  const std::size_t nq = design.q_keys.size();
  q_has_rows_.assign(nq, 0);
  for (const auto& w : design.writes)
    if (w.t <= bounds_.t_max && w.seq < bounds_.seq_before) {
      ++writes_in_bounds_;
      q_has_rows_[static_cast<size_t>(w.q_idx)] = 1;
    }

  std::vector<std::int64_t> votes_in_bounds(design.item_ids.size(), 0);
  for (const auto& v : design.votes)
    if (v.t <= bounds_.t_max && v.seq < bounds_.seq_before) {
      votes_in_bounds[static_cast<size_t>(v.item)] += 1;
      q_has_rows_[static_cast<size_t>(v.q_idx)] = 1;
    }

  // layout: [q...] [lambda] [mu] [nu...]
  dim_ = mask.quality ? nq : 0;
  if (mask.lambda) lambda_idx_ = static_cast<int>(dim_++);
  if (mask.mu) mu_idx_ = static_cast<int>(dim_++);
  nu_idx_.assign(design.item_ids.size(), -1);
  if (mask.nu) {
    for (size_t i = 0; i < design.item_ids.size(); ++i)
      if (votes_in_bounds[i] >= opts.min_votes_for_nu) nu_idx_[i] = static_cast<int>(dim_++);
  }
}

double VotingObjective::eval(const std::vector<double>& x, std::vector<double>& grad) const {
  grad.assign(dim_, 0.0);
  const double lambda = lambda_idx_ >= 0 ? x[static_cast<size_t>(lambda_idx_)] : 0.0;
  const double mu = mu_idx_ >= 0 ? x[static_cast<size_t>(mu_idx_)] : 0.0;

  const auto& votes = design_.votes;
  const std::size_t n_chunks = num_chunks(votes.size(), kChunk);
  std::vector<double> chunk_ll(n_chunks, 0.0);
  std::vector<std::vector<double>> chunk_grad;
  const bool threaded = opts_.threads > 1 && n_chunks > 1;
  if (threaded) chunk_grad.assign(n_chunks, std::vector<double>(dim_, 0.0));

  auto run = [&](std::size_t begin, std::size_t end, std::size_t c) {
    double ll = 0.0;
    std::vector<double>& g = threaded ? chunk_grad[c] : grad;
    for (std::size_t k = begin; k < end; ++k) {
      const auto& row = votes[k];
      if (row.t > bounds_.t_max || row.seq >= bounds_.seq_before) continue;
      const double q = mask_.quality ? x[static_cast<size_t>(row.q_idx)] : 0.0;
      const int nu_i = nu_idx_[static_cast<size_t>(row.item)];
      const double nu = nu_i >= 0 ? x[static_cast<size_t>(nu_i)] : 0.0;
      const double z = q + lambda * row.r + mu * row.s + nu * row.u;
      ll += log_sigmoid(row.polarity == 1 ? z : -z);
      const double err = row.polarity - vote_probability(z, 0.0);  // y - p
      if (mask_.quality) g[static_cast<size_t>(row.q_idx)] += err;
      if (lambda_idx_ >= 0) g[static_cast<size_t>(lambda_idx_)] += err * row.r;
      if (mu_idx_ >= 0) g[static_cast<size_t>(mu_idx_)] += err * row.s;
      if (nu_i >= 0) g[static_cast<size_t>(nu_i)] += err * row.u;
    }
    chunk_ll[c] = ll;
  };
  parallel_chunks(votes.size(), kChunk, threaded ? opts_.threads : 1, run);

  double ll = 0.0;
  for (std::size_t c = 0; c < n_chunks; ++c) ll += chunk_ll[c];
  if (threaded) {
    for (std::size_t c = 0; c < n_chunks; ++c)
      for (std::size_t k = 0; k < dim_; ++k) grad[k] += chunk_grad[c][k];
  }

  // quality prior per write (acts as l2 regularization on each q)
  const double prior_const = -0.5 * (kLogTwoPi + std::log(sigma2_));
  ll += prior_const * static_cast<double>(writes_in_bounds_);
  if (mask_.quality) {
    for (const auto& w : design_.writes) {
      if (w.t > bounds_.t_max || w.seq >= bounds_.seq_before) continue;
      const double q = x[static_cast<size_t>(w.q_idx)];
      ll -= q * q / (2.0 * sigma2_);
      grad[static_cast<size_t>(w.q_idx)] -= q / sigma2_;
    }
  }

  if (include_penalty) {
    double pen = 0.0;
    if (lambda_idx_ >= 0) {
      pen += lambda * lambda;
      grad[static_cast<size_t>(lambda_idx_)] -= 2.0 * opts_.ridge * lambda;
    }
    if (mu_idx_ >= 0) {
      pen += mu * mu;
      grad[static_cast<size_t>(mu_idx_)] -= 2.0 * opts_.ridge * mu;
    }
    for (int idx : nu_idx_) {
      if (idx < 0) continue;
      const double v = x[static_cast<size_t>(idx)];
      pen += v * v;
      grad[static_cast<size_t>(idx)] -= 2.0 * opts_.ridge * v;
    }
    ll -= opts_.ridge * pen;
  }
  return ll;
}

void VotingObjective::loglik_parts(const std::vector<double>& x, double& full,
                                   double& votes_only) const {
  const double lambda = lambda_idx_ >= 0 ? x[static_cast<size_t>(lambda_idx_)] : 0.0;
  const double mu = mu_idx_ >= 0 ? x[static_cast<size_t>(mu_idx_)] : 0.0;
  double ll = 0.0;
  for (const auto& row : design_.votes) {
    if (row.t > bounds_.t_max || row.seq >= bounds_.seq_before) continue;
    const double q = mask_.quality ? x[static_cast<size_t>(row.q_idx)] : 0.0;
    const int nu_i = nu_idx_[static_cast<size_t>(row.item)];
    const double nu = nu_i >= 0 ? x[static_cast<size_t>(nu_i)] : 0.0;
    const double z = q + lambda * row.r + mu * row.s + nu * row.u;
    ll += log_sigmoid(row.polarity == 1 ? z : -z);
  }
  votes_only = ll;
  const double prior_const = -0.5 * (kLogTwoPi + std::log(sigma2_));
  ll += prior_const * static_cast<double>(writes_in_bounds_);
  if (mask_.quality) {
    for (const auto& w : design_.writes) {
      if (w.t > bounds_.t_max || w.seq >= bounds_.seq_before) continue;
      const double q = x[static_cast<size_t>(w.q_idx)];
      ll -= q * q / (2.0 * sigma2_);
    }
  }
  full = ll;
}

std::vector<double> VotingObjective::pack(const VotingParams& p) const {
  std::vector<double> x(dim_, 0.0);
  if (mask_.quality) {
    for (size_t k = 0; k < design_.q_keys.size(); ++k) {
      const auto& key = design_.q_keys[k];
      auto it = p.quality.find({design_.item_ids[static_cast<size_t>(key.first)], key.second});
      x[k] = it == p.quality.end() ? 0.0 : it->second;
    }
  }
  if (lambda_idx_ >= 0) x[static_cast<size_t>(lambda_idx_)] = p.lambda;
  if (mu_idx_ >= 0) x[static_cast<size_t>(mu_idx_)] = p.mu;
  for (size_t i = 0; i < nu_idx_.size(); ++i) {
    if (nu_idx_[i] < 0) continue;
    auto it = p.nu.find(design_.item_ids[i]);
    x[static_cast<size_t>(nu_idx_[i])] = it == p.nu.end() ? 0.0 : it->second;
  }
  return x;
}

VotingParams VotingObjective::unpack(const std::vector<double>& x) const {
  VotingParams p;
  p.sigma2 = sigma2_;
  p.lambda = lambda_idx_ >= 0 ? x[static_cast<size_t>(lambda_idx_)] : 0.0;
  p.mu = mu_idx_ >= 0 ? x[static_cast<size_t>(mu_idx_)] : 0.0;
  for (size_t i = 0; i < design_.item_ids.size(); ++i)
    p.nu[design_.item_ids[i]] = nu_idx_[i] >= 0 ? x[static_cast<size_t>(nu_idx_[i])] : 0.0;
  for (size_t k = 0; k < design_.q_keys.size(); ++k) {
    const auto& key = design_.q_keys[k];
    const double q = mask_.quality ? x[k] : 0.0;
    p.quality[{design_.item_ids[static_cast<size_t>(key.first)], key.second}] = q;
  }
  return p;
}

FitResult fit_voting_design(const VotingDesign& design, double sigma2, const VotingParams& init,
                            const FeatureMask& mask, const FitOptions& opts, RowBounds bounds) {
  VotingObjective obj(design, mask, sigma2, opts, bounds);
  LbfgsResult lr;
  if (obj.dim() == 0) {
    lr.x = {};
    std::vector<double> g;
    lr.value = obj.eval(lr.x, g);
    lr.converged = true;
  } else {
    lr = lbfgs_maximize([&obj](const std::vector<double>& x, std::vector<double>& g) { return obj.eval(x, g); },
                        obj.pack(init), opts.optim);
  }
  FitResult res;
  res.params = obj.unpack(lr.x);
  res.final_objective = lr.value;
  obj.loglik_parts(lr.x, res.final_loglik, res.vote_loglik);
  res.grad_norm = lr.grad_norm;
  res.iterations = lr.iterations;
  res.converged = lr.converged;
  return res;
}

FitResult fit_voting(const Dataset& ds, const UrnConfig& urn, const VotingParams& init,
                     const FeatureMask& mask, const FitOptions& opts) {
  const VotingDesign design = VotingDesign::build(ds, urn, opts.exclude_first_vote);
  return fit_voting_design(design, init.sigma2, init, mask, opts);
}

ToyFit fit_toy_response(const std::vector<int>& votes, const UrnConfig& urn, double ridge) {
  if (votes.size() < 2)
    throw TooShort("toy fit needs at least 2 votes, got " + std::to_string(votes.size()));
  urn.validate();

  // pre-vote urn ratios r^(t-1) for votes t = 2..T
  std::vector<double> rs, ss;
  double ux = urn.x0, uy = urn.y0;
  for (size_t k = 0; k + 1 < votes.size(); ++k) {
    if (votes[k] == 1) ux += urn.w;
    else uy += urn.w;
    const double r = ux / (ux + uy);
    rs.push_back(r);
    ss.push_back(1.0 - r);
  }

  auto fn = [&](const std::vector<double>& x, std::vector<double>& g) {
    const double q = x[0], lambda = x[1], mu = x[2];
    g.assign(3, 0.0);
    double ll = 0.0;
    for (size_t k = 0; k < rs.size(); ++k) {
      const int y = votes[k + 1];
      const double z = q + lambda * rs[k] + mu * ss[k];
      ll += log_sigmoid(y == 1 ? z : -z);
      const double err = y - vote_probability(z, 0.0);
      g[0] += err;
      g[1] += err * rs[k];
      g[2] += err * ss[k];
    }
    ll -= ridge * (q * q + lambda * lambda + mu * mu);
    g[0] -= 2.0 * ridge * q;
    g[1] -= 2.0 * ridge * lambda;
    g[2] -= 2.0 * ridge * mu;
    return ll;
  };

  LbfgsOptions lopt;
  lopt.grad_tol = 1e-10;
  const LbfgsResult lr = lbfgs_maximize(fn, {0.0, 0.0, 0.0}, lopt);
  return ToyFit{lr.x[0], lr.x[1], lr.x[2], lr.value, lr.converged};
}

// ---------------------------------------------------------------------------

std::string serialize_params(const ParamsFile& p) {
  using nlohmann::json;
  std::string out = "cvp-params v1\n";
  out += "community\t" + json(p.community_id).dump() + "\n";
  if (p.alpha) out += "alpha\t" + format_double(*p.alpha) + "\n";
  if (p.tau) out += "tau\t" + format_double(*p.tau) + "\n";
  out += "lambda\t" + format_double(p.voting.lambda) + "\n";
  out += "mu\t" + format_double(p.voting.mu) + "\n";
  out += "sigma2\t" + format_double(p.voting.sigma2) + "\n";
  for (const auto& [item, v] : p.voting.nu)
    out += "nu\t" + json(item).dump() + "\t" + format_double(v) + "\n";
  for (const auto& [key, v] : p.voting.quality)
    out += "q\t" + json(key.first).dump() + "\t" + format_int(key.second) + "\t" + format_double(v) + "\n";
  return out;
}

ParamsFile parse_params(const std::string& text) {
  using nlohmann::json;
  ParamsFile p;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "cvp-params v1")
    throw MalformedRecord("parameter file must start with 'cvp-params v1'");

  auto fields = [](const std::string& s) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (true) {
      const size_t tab = s.find('\t', pos);
      if (tab == std::string::npos) {
        out.push_back(s.substr(pos));
        return out;
      }
      out.push_back(s.substr(pos, tab - pos));
      pos = tab + 1;
    }
  };
  auto as_id = [](const std::string& s) {
    try {
      return json::parse(s).get<std::string>();
    } catch (const json::exception&) {
      throw MalformedRecord("bad quoted id in parameter file: " + s);
    }
  };
  auto as_double = [](const std::string& s) {
    try {
      return std::stod(s);
    } catch (const std::exception&) {
      throw MalformedRecord("bad number in parameter file: " + s);
    }
  };

  long long n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = fields(line);
    const std::string& key = f[0];
    if (key == "community" && f.size() == 2) p.community_id = as_id(f[1]);
    else if (key == "alpha" && f.size() == 2) p.alpha = as_double(f[1]);
    else if (key == "tau" && f.size() == 2) p.tau = as_double(f[1]);
    else if (key == "lambda" && f.size() == 2) p.voting.lambda = as_double(f[1]);
    else if (key == "mu" && f.size() == 2) p.voting.mu = as_double(f[1]);
    else if (key == "sigma2" && f.size() == 2) p.voting.sigma2 = as_double(f[1]);
    else if (key == "nu" && f.size() == 3) p.voting.nu[as_id(f[1])] = as_double(f[2]);
    else if (key == "q" && f.size() == 4)
      p.voting.quality[{as_id(f[1]), static_cast<int>(std::stoll(f[2]))}] = as_double(f[3]);
    else
      throw MalformedRecord("bad parameter file line " + std::to_string(n) + ": " + line);
  }
  return p;
}

}  // namespace cvp
