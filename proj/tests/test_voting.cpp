#include <doctest.h>

#include <cmath>

#include "cvp/errors.hpp"
#include "cvp/simulate.hpp"
#include "cvp/voting.hpp"
#include "helpers.hpp"

using namespace cvp;
using namespace cvp::testing;

namespace {

VotingParams params_with(double lambda, double mu, double nu, const std::string& item = "a") {
  VotingParams p;
  p.lambda = lambda;
  p.mu = mu;
  p.nu[item] = nu;
  return p;
}

}  // namespace

TEST_CASE("polarity score is the linear blend of ratio and length features") {
  // r = 2/3 after one positive vote with urn (1,1,1); u = 1 single response
  StateBuilder sb{UrnConfig{1, 1, 1}};
  sb.apply_write(100);
  sb.apply_vote(0, 1, 2);
  const ItemState st = sb.state();
  REQUIRE(st.ratio_pos[0] == doctest::Approx(2.0 / 3.0));

  CHECK(polarity_score(st, 0, params_with(0, 0, 0), "a") == 0.0);
  CHECK(polarity_score(st, 0, params_with(1, -1, 0.5), "a") ==
        doctest::Approx(1.0 / 3.0 + 0.5).epsilon(1e-12));
  // r + s = 1 makes lambda = mu = 1 give exactly 1
  CHECK(polarity_score(st, 0, params_with(1, 1, 0), "a") == 1.0);
  CHECK_THROWS_AS(polarity_score(st, 0, params_with(1, 1, 0, "other"), "a"), UnknownItem);
}

TEST_CASE("vote probability is a stable logistic") {
  CHECK(vote_probability(0, 0) == 0.5);
  CHECK(vote_probability(0, 5.0 / 6.0) == doctest::Approx(0.6971).epsilon(2e-4));
  const double hi = vote_probability(50, 0);
  CHECK(hi <= 1.0);
  CHECK(hi > 1.0 - 1e-20);
  const double lo = vote_probability(-50, 0);
  CHECK(lo >= 0.0);
  CHECK(lo < 1e-20);
  CHECK(std::isfinite(vote_probability(700, 0)));
  CHECK(std::isfinite(vote_probability(-700, 0)));
  CHECK(std::isfinite(log_vote_probability(1, -700, 0)));
  CHECK(log_vote_probability(1, -700, 0) == doctest::Approx(-700.0));
}

TEST_CASE("voting log-likelihood: single vote and single write terms") {
  const auto vote_ds = make_dataset({single_response_item("a", {1})});
  VotingParams zero = params_with(0, 0, 0);
  CHECK(voting_loglik(vote_ds, zero, UrnConfig{1, 1, 1}, /*prior*/ false) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-12));

  const auto write_ds = make_dataset({make_item("a", {write_ev("a", 1, 100)})});
  VotingParams q0 = params_with(0, 0, 0);
  q0.quality[{"a", 0}] = 0.0;
  q0.sigma2 = 1.0;
  CHECK(voting_loglik(write_ds, q0, UrnConfig{1, 1, 1}, true) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-12));
}

TEST_CASE("voting log-likelihood agrees with the toy objective at its optimum") {
  const std::vector<int> votes = {1, 1, 1, 0, 0, 0};
  const UrnConfig urn{1, 1, 1};
  const ToyFit toy = fit_toy_response(votes, urn, 0.5);
  REQUIRE(toy.converged);

  const auto ds = make_dataset({single_response_item("a", votes)});
  VotingParams p = params_with(toy.lambda, toy.mu, 0.0);
  p.quality[{"a", 0}] = toy.q;
  const double ll =
      voting_loglik(ds, p, urn, /*prior*/ false, /*exclude_first_vote*/ true);
  const double penalized = ll - 0.5 * (toy.q * toy.q + toy.lambda * toy.lambda + toy.mu * toy.mu);
  CHECK(penalized == doctest::Approx(toy.objective).epsilon(1e-8));
}

TEST_CASE("toy fit reproduces the worked quality trajectories") {
  const UrnConfig urn{1, 1, 1};
  const std::vector<int> seq1 = {1, 1, 1, 0, 0, 0};
  const std::vector<int> seq2 = {1, 0, 1, 0, 1, 0};
  const double expect1[] = {0.363, 0.574, 0.237, 0.004, -0.175};
  const double expect2[] = {-0.363, 0.004, -0.230, 0.007, -0.166};
  for (int T = 2; T <= 6; ++T) {
    const ToyFit f1 = fit_toy_response({seq1.begin(), seq1.begin() + T}, urn, 0.5);
    const ToyFit f2 = fit_toy_response({seq2.begin(), seq2.begin() + T}, urn, 0.5);
    CHECK(std::abs(f1.q - expect1[T - 2]) < 0.02);
    CHECK(std::abs(f2.q - expect2[T - 2]) < 0.02);
  }
  const ToyFit three = fit_toy_response({1, 1, 1}, urn, 0.5);
  CHECK(std::abs(three.q - 0.574) < 0.02);
  CHECK_THROWS_AS(fit_toy_response({1}, urn, 0.5), TooShort);
}

TEST_CASE("toy fit is deterministic") {
  const ToyFit a = fit_toy_response({1, 0, 1, 0, 1, 0}, UrnConfig{1, 1, 1}, 0.5);
  const ToyFit b = fit_toy_response({1, 0, 1, 0, 1, 0}, UrnConfig{1, 1, 1}, 0.5);
  CHECK(a.q == b.q);
  CHECK(a.lambda == b.lambda);
  CHECK(a.mu == b.mu);
}

TEST_CASE("regularization keeps separable data finite") {
  const auto ds = make_dataset({single_response_item("a", {1, 1, 1, 1, 1, 1, 1, 1})});
  VotingParams init;
  const FitResult fit = fit_voting(ds, UrnConfig{1, 1, 1}, init);
  CHECK(fit.converged);
  const double q = fit.params.quality_or("a", 0);
  CHECK(std::isfinite(q));
  CHECK(q > 0.0);
}

TEST_CASE("knocking everything out leaves the null model") {
  const auto ds = make_dataset(
      {single_response_item("a", {1, 0, 1}), single_response_item("b", {0, 0})});
  VotingParams init;
  const FitResult fit = fit_voting(ds, UrnConfig{1, 1, 1}, init, FeatureMask::none());
  CHECK(fit.params.lambda == 0.0);
  CHECK(fit.params.mu == 0.0);
  for (const auto& [k, v] : fit.params.quality) CHECK(v == 0.0);
  for (const auto& [k, v] : fit.params.nu) CHECK(v == 0.0);
  CHECK(fit.vote_loglik ==
        doctest::Approx(static_cast<double>(ds.n_votes()) * std::log(0.5)).epsilon(1e-12));
}

namespace {

SimConfig small_sim(std::uint64_t seed, int items = 6, int events = 10) {
  SimConfig cfg;
  cfg.selection.tau = 0.8;
  cfg.selection.alpha = 0.5;
  cfg.lambda = 1.0;
  cfg.mu = -0.5;
  cfg.sigma2 = 1.0;
  cfg.nu = NuSpec{0.0, 0.5};
  cfg.items = items;
  cfg.events_per_item = events;
  cfg.seed = seed;
  return cfg;
}

// central finite differences over the active parameter vector
void check_gradient(const VotingObjective& obj, const std::vector<double>& x, double tol) {
  std::vector<double> grad;
  obj.eval(x, grad);
  std::vector<double> xp = x, gdummy;
  const double h = 1e-5;
  for (size_t k = 0; k < x.size(); ++k) {
    xp[k] = x[k] + h;
    const double up = obj.eval(xp, gdummy);
    xp[k] = x[k] - h;
    const double dn = obj.eval(xp, gdummy);
    xp[k] = x[k];
    const double fd = (up - dn) / (2.0 * h);
    CHECK(std::abs(grad[k] - fd) <= tol * std::max(1.0, std::abs(fd)));
  }
}

}  // namespace

TEST_CASE("analytic gradient matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const SimResult sim = simulate_community(small_sim(seed));
    const VotingDesign design = VotingDesign::build(sim.dataset, UrnConfig{1, 1, 1});
    FitOptions opts;
    VotingObjective obj(design, FeatureMask::all(), 1.0, opts);
    Rng rng(seed * 13 + 1);
    std::vector<double> x(obj.dim());
    for (auto& v : x) v = rng.normal(0.0, 0.7);
    check_gradient(obj, x, 1e-5);
  }
}

TEST_CASE("flipping polarities and swapping lambda/mu negates the qualities") {
  const SimResult sim = simulate_community(small_sim(42, 8, 14));
  Dataset flipped = sim.dataset;
  for (auto& item : flipped.items)
    for (auto& e : item.events)
      if (e.is_vote()) e.action = VoteAction{e.vote().response, 1 - e.vote().polarity};

  FeatureMask mask;
  mask.nu = false;
  VotingParams init;
  const FitResult a = fit_voting(sim.dataset, UrnConfig{1, 1, 1}, init, mask);
  const FitResult b = fit_voting(flipped, UrnConfig{1, 1, 1}, init, mask);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK(b.params.lambda == doctest::Approx(-a.params.mu).epsilon(1e-4));
  CHECK(b.params.mu == doctest::Approx(-a.params.lambda).epsilon(1e-4));
  for (const auto& [key, q] : a.params.quality)
    CHECK(b.params.quality.at(key) == doctest::Approx(-q).epsilon(1e-4));
}

TEST_CASE("objective is concave along random segments") {
  const SimResult sim = simulate_community(small_sim(5));
  const VotingDesign design = VotingDesign::build(sim.dataset, UrnConfig{1, 1, 1});
  FitOptions opts;
  VotingObjective obj(design, FeatureMask::all(), 1.0, opts);
  Rng rng(17);
  std::vector<double> a(obj.dim()), b(obj.dim()), g;
  for (size_t trial = 0; trial < 5; ++trial) {
    for (size_t k = 0; k < a.size(); ++k) {
      a[k] = rng.normal(0.0, 1.0);
      b[k] = rng.normal(0.0, 1.0);
    }
    std::vector<double> vals;
    std::vector<double> x(obj.dim());
    for (int i = 0; i <= 50; ++i) {
      const double w = i / 50.0;
      for (size_t k = 0; k < x.size(); ++k) x[k] = (1 - w) * a[k] + w * b[k];
      vals.push_back(obj.eval(x, g));
    }
    for (size_t i = 1; i + 1 < vals.size(); ++i)
      CHECK(vals[i + 1] - 2 * vals[i] + vals[i - 1] <= 1e-9);
  }
}

TEST_CASE("nested masks never beat the full model") {
  const SimResult sim = simulate_community(small_sim(11, 10, 16));
  VotingParams init;
  const FitResult full = fit_voting(sim.dataset, UrnConfig{1, 1, 1}, init);
  for (const FeatureMask& mask :
       {FeatureMask::none(), FeatureMask{true, false, false, false},
        FeatureMask{false, true, true, false}, FeatureMask{true, true, true, false}}) {
    const FitResult sub = fit_voting(sim.dataset, UrnConfig{1, 1, 1}, init, mask);
    CHECK(full.final_objective >= sub.final_objective - 1e-7);
    CHECK(full.final_loglik >= sub.final_loglik - 1e-7);
  }
}

TEST_CASE("items with too few votes keep nu pinned") {
  // item 'a' has 1 vote (< 3), item 'b' has 4 votes
  const auto ds = make_dataset({
      single_response_item("a", {1}),
      single_response_item("b", {1, 1, 0, 1}),
  });
  VotingParams init;
  const FitResult fit = fit_voting(ds, UrnConfig{1, 1, 1}, init);
  CHECK(fit.params.nu.at("a") == 0.0);
}

TEST_CASE("parameter files round-trip") {
  ParamsFile p;
  p.community_id = "c with space";
  p.tau = 1.25;
  p.alpha = 0.5;
  p.voting.lambda = -2.25;
  p.voting.mu = 0.125;
  p.voting.sigma2 = 2.0;
  p.voting.nu["item x"] = 0.7071067811865476;
  p.voting.quality[{"item x", 0}] = -0.3333333333333333;
  p.voting.quality[{"item x", 3}] = 1e-17;

  const std::string text = serialize_params(p);
  const ParamsFile back = parse_params(text);
  CHECK(back.community_id == p.community_id);
  CHECK(*back.tau == *p.tau);
  CHECK(*back.alpha == *p.alpha);
  CHECK(back.voting.lambda == p.voting.lambda);
  CHECK(back.voting.mu == p.voting.mu);
  CHECK(back.voting.sigma2 == p.voting.sigma2);
  CHECK(back.voting.nu == p.voting.nu);
  CHECK(back.voting.quality == p.voting.quality);
  CHECK(serialize_params(back) == text);
}

TEST_CASE("threaded objective evaluation is bit-identical") {
  const SimResult sim = simulate_community(small_sim(23, 12, 40));
  const VotingDesign design = VotingDesign::build(sim.dataset, UrnConfig{1, 1, 1});
  FitOptions serial, threaded;
  threaded.threads = 4;
  VotingObjective o1(design, FeatureMask::all(), 1.0, serial);
  VotingObjective o4(design, FeatureMask::all(), 1.0, threaded);
  Rng rng(3);
  std::vector<double> x(o1.dim());
  for (auto& v : x) v = rng.normal(0.0, 1.0);
  std::vector<double> g1, g4;
  const double v1 = o1.eval(x, g1);
  const double v4 = o4.eval(x, g4);
  CHECK(v1 == v4);
  CHECK(g1 == g4);
}
