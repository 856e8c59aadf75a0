#include "ehmdp/analysis.hpp"
#include "ehmdp/error.hpp"
#include "ehmdp/learners.hpp"

#include "oracle_values.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace ehmdp;

namespace {

EnvConfig two_channel_config() {
    EnvConfig cfg;
    cfg.channels = {DiscreteChannel::scaled_bernoulli(10.0, 0.5), DiscreteChannel::scaled_bernoulli(22.0, 0.4)};
    return cfg;
}

EnvConfig packet_config() {
    EnvConfig cfg;
    cfg.mode = Mode::PacketScheduling;
    cfg.q_max = 3;
    cfg.arrivals = HarvestDistribution::uniform(3);
    cfg.weights = CostWeights{1.0, 0.5};
    cfg.channels = {DiscreteChannel({0.5, 1.0, 2.0}, {0.3, 0.4, 0.3})};
    return cfg;
}

std::vector<double> random_distribution(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(n);
    double sum = 0.0;
    for (auto& x : p) {
        x = u(rng);
        sum += x;
    }
    for (auto& x : p) {
        x /= sum;
    }
    return p;
}

} // namespace

TEST_CASE("total variation examples and metric axioms") {
    const std::vector<double> p{0.5, 0.5, 0.0};
    const std::vector<double> q{0.2, 0.5, 0.3};
    CHECK(tv_distance(p, q) == doctest::Approx(oracle::kTvExample).epsilon(1e-15));
    CHECK(tv_distance(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 1.0);
    CHECK_THROWS_AS(tv_distance(p, std::vector<double>{1.0}), Error);
    std::mt19937_64 rng(21);
    for (int k = 0; k < 1000; ++k) {
        const int n = 2 + k % 7;
        const auto a = random_distribution(rng, n);
        const auto b = random_distribution(rng, n);
        const auto c = random_distribution(rng, n);
        CHECK(tv_distance(a, a) == 0.0);
        CHECK(tv_distance(a, b) >= 0.0);
        CHECK(tv_distance(a, b) <= 1.0 + 1e-12);
        CHECK(std::abs(tv_distance(a, b) - tv_distance(b, a)) <= 1e-12);
        CHECK(tv_distance(a, c) <= tv_distance(a, b) + tv_distance(b, c) + 1e-12);
    }
}

TEST_CASE("mixing coefficient and distance to stationarity") {
    Matrix iid(2, 2);
    iid << 0.3, 0.7, 0.3, 0.7;
    CHECK(mixing_gamma(iid) == 0.0);
    Matrix swap(2, 2);
    swap << 0, 1, 1, 0;
    CHECK(mixing_gamma(swap) == 1.0);
    const Environment env{EnvConfig{}};
    const auto genie = solve_genie(env);
    const Matrix P = induced_chain(env.model(), genie.policy);
    const double gamma = mixing_gamma(P);
    CHECK(gamma == doctest::Approx(oracle::kSingleGamma).epsilon(1e-14));
    const auto pi = stationary_distribution(P).pi;
    for (int t = 1; t <= 50; ++t) {
        CHECK(d_stationary(P, pi, t) <= d_bound(gamma, t) + 1e-15);
        CHECK(d_hat(P, t) <= d_bound(gamma, t) + 1e-15);
    }
    std::mt19937_64 rng(5);
    for (int k = 0; k < 100; ++k) {
        const int n = 2 + k % 5;
        Matrix Q(n, n);
        for (int r = 0; r < n; ++r) {
            const auto row = random_distribution(rng, n);
            for (int c = 0; c < n; ++c) {
                Q(r, c) = row[c];
            }
        }
        for (int s = 1; s <= 4; ++s) {
            for (int t = 1; t <= 4; ++t) {
                CHECK(d_hat(Q, s + t) <= d_hat(Q, s) * d_hat(Q, t) + 1e-12);
            }
        }
    }
}

TEST_CASE("series evaluations") {
    CHECK(p_series(2.0) == doctest::Approx(oracle::kZeta2).epsilon(1e-12));
    CHECK(std::abs(p_series(2.0) - std::numbers::pi * std::numbers::pi / 6.0) < 1e-12);
    CHECK(p_series(3.0) == doctest::Approx(oracle::kZeta3).epsilon(1e-12));
    CHECK(p_series(1.5) == doctest::Approx(oracle::kZeta1p5).epsilon(1e-12));
    CHECK_THROWS_AS(p_series(1.0), Error);
    const double c = oracle::kSingleExponentC;
    CHECK(epoch_sigma(c, 2, 10) == doctest::Approx(oracle::kSigma_2_10).epsilon(1e-10));
    CHECK(epoch_exp_sum(c, 2, 10) == doctest::Approx(oracle::kExpSum_2_10).epsilon(1e-10));
    CHECK(epoch_sigma(c, 6, 2) == doctest::Approx(oracle::kSigma_6_2).epsilon(1e-10));
    CHECK(epoch_exp_sum(c, 6, 2) == doctest::Approx(oracle::kExpSum_6_2).epsilon(1e-10));
    CHECK(epoch_sigma(0.5, 1, 3) == doctest::Approx(oracle::kSigma_c05_1_3).epsilon(1e-12));
    double brute = 0.0;
    for (int k = 0; k < 40; ++k) {
        brute += std::pow(3.0, k) * std::exp(-0.5 * std::pow(3.0, k));
    }
    CHECK(epoch_sigma(0.5, 1, 3) == doctest::Approx(brute).epsilon(1e-13));
    CHECK_THROWS_AS(epoch_sigma(0.0, 2, 10), Error);
}

TEST_CASE("gap constants of the single-channel configuration") {
    const Environment env{EnvConfig{}};
    const auto g = compute_gaps(env);
    CHECK(g.rho_star == doctest::Approx(oracle::kSingleRhoStar).epsilon(1e-12));
    CHECK(g.delta1 == doctest::Approx(oracle::kSingleDelta1).epsilon(1e-8));
    CHECK(g.B0 == doctest::Approx(oracle::kSingleB0).epsilon(1e-14));
    CHECK(g.mu_max == doctest::Approx(oracle::kSingleMuMax).epsilon(1e-14));
    CHECK(g.delta_max == doctest::Approx(oracle::kSingleRhoStar).epsilon(1e-12));
    CHECK(g.gamma == doctest::Approx(oracle::kSingleGamma).epsilon(1e-14));
    CHECK(std::isinf(g.delta3));
    CHECK(g.unique_policy);
    CHECK(g.warnings.empty());
    CHECK(default_count_form(env) == CountForm::StateIndependent);
    CHECK(count_factor(g, CountForm::StateIndependent) == 10.0);
    CHECK(count_factor(g, CountForm::General) == 30.0);
    CHECK(exponent_c(g) == doctest::Approx(oracle::kSingleExponentC).epsilon(1e-8));
}

TEST_CASE("bound evaluations follow the closed forms") {
    const Environment env{EnvConfig{}};
    const auto g = compute_gaps(env);
    const double c = exponent_c(g);
    const double phase = g.mu_max / (1.0 - g.gamma);
    const auto opt = bound_optimal(g);
    REQUIRE(opt.ok);
    CHECK(opt.value == doctest::Approx(oracle::kSingleMuMax / 0.8).epsilon(1e-14));
    const auto lpsm = bound_lpsm(g, CountForm::StateIndependent);
    REQUIRE(lpsm.ok);
    CHECK(lpsm.value == doctest::Approx((1.0 + 10.0 / std::expm1(c)) * (phase + g.delta_max)).epsilon(1e-12));
    const auto epoch = bound_epoch(g, CountForm::StateIndependent, 2, 10);
    REQUIRE(epoch.ok);
    const double head = 1.0 + 10.0 * (1.0 - std::exp(-2.0 * c)) / std::expm1(c);
    const double expected = head * (phase + g.delta_max) + 9.0 * 10.0 * 2.0 * epoch_sigma(c, 2, 10) * g.delta_max +
                            10.0 * epoch_exp_sum(c, 2, 10) * phase;
    CHECK(epoch.value == doctest::Approx(expected).epsilon(1e-12));
    const auto z = convergence_time_bound(g, CountForm::StateIndependent);
    REQUIRE(z.ok);
    CHECK(z.value == doctest::Approx(1.0 + 10.0 * std::exp(-c) / std::pow(-std::expm1(-c), 2)).epsilon(1e-9));
    CHECK(count_bound_lpsm(g, CountForm::StateIndependent).ok);
    CHECK(count_bound_epoch(g, CountForm::StateIndependent, 2, 10).ok);

    GapConstants tied = g;
    tied.delta1 = 0.0;
    CHECK_FALSE(bound_lpsm(tied, CountForm::General).ok);
    GapConstants sticky = g;
    sticky.gamma = 1.0;
    CHECK(std::isinf(bound_optimal(sticky).value));
}

TEST_CASE("gap constants of the two-channel configuration") {
    const Environment env(two_channel_config());
    const auto g = compute_gaps(env);
    CHECK(g.rho_star == doctest::Approx(oracle::kTwoRhoStar).epsilon(1e-12));
    CHECK(g.delta3 == doctest::Approx(oracle::kTwoDelta3).epsilon(1e-10));
    CHECK(g.delta4 == doctest::Approx(oracle::kTwoDelta4).epsilon(1e-9));
    CHECK(g.B0 == doctest::Approx(oracle::kTwoB0).epsilon(1e-14));
    CHECK(minimal_w(g) == doctest::Approx(oracle::kTwoMinW).epsilon(1e-8));
    const auto refused = bound_mc(g, 2, 300.0, 10000);
    CHECK_FALSE(refused.ok);
    REQUIRE(refused.min_w.has_value());
    CHECK(*refused.min_w == doctest::Approx(oracle::kTwoMinW).epsilon(1e-8));
    const auto ok = bound_mc(g, 2, 3e8, 10000);
    CHECK(ok.ok);
    CHECK(ok.value > 0.0);
}

TEST_CASE("cost-mode gaps are measured toward improvement") {
    const Environment env(packet_config());
    const auto g = compute_gaps(env);
    CHECK(g.rho_star == doctest::Approx(oracle::kPacketRhoStar).epsilon(1e-12));
    CHECK(g.delta1 == doctest::Approx(oracle::kPacketDelta1).epsilon(1e-9));
    CHECK(g.delta_max >= 0.0);
    CHECK(default_count_form(env) == CountForm::General);
}

TEST_CASE("degenerate gap cases") {
    EnvConfig same;
    same.channels = {DiscreteChannel::scaled_bernoulli(10.0, 0.2), DiscreteChannel::scaled_bernoulli(10.0, 0.2)};
    const auto g = compute_gaps(Environment(same));
    CHECK(g.delta3 == 0.0);
    CHECK_FALSE(g.unique_channels);
    CHECK_FALSE(g.warnings.empty());
    EnvConfig flat;
    flat.channels = {DiscreteChannel::deterministic(0.0)};
    const auto h = compute_gaps(Environment(flat));
    CHECK(h.delta1 == 0.0);
    CHECK_FALSE(h.unique_policy);
    EnvConfig one;
    one.q_max = 1;
    one.arrivals = HarvestDistribution::uniform(1);
    const auto k = compute_gaps(Environment(one));
    CHECK(std::isinf(k.delta1));
}

TEST_CASE("KL divergence and the lower-bound constant") {
    const auto a = DiscreteChannel::scaled_bernoulli(10.0, 0.2);
    const auto b = DiscreteChannel::scaled_bernoulli(10.0, 0.5);
    CHECK(*kl_divergence(a, b) == doctest::Approx(oracle::kKlExample).epsilon(1e-12));
    CHECK(*kl_divergence(a, a) == 0.0);
    CHECK_FALSE(kl_divergence(a, DiscreteChannel::scaled_bernoulli(22.0, 0.4)).has_value());
    CHECK(std::isinf(*kl_divergence(a, DiscreteChannel({0.0, 10.0}, {1.0, 0.0}))));

    EnvConfig pair;
    pair.channels = {a, b};
    const Environment env(pair);
    const auto g = compute_gaps(env);
    const auto optimal = optimal_channel_set(env);
    CHECK(optimal == std::vector<int>{1});
    const auto lb = lower_bound_constant(pair.channels, optimal, g.delta3);
    CHECK_FALSE(lb.degenerate);
    CHECK(lb.value == doctest::Approx(oracle::kLowerBoundPair).epsilon(1e-10));

    const Environment two(two_channel_config());
    const auto lb2 = lower_bound_constant(two.config().channels, optimal_channel_set(two), compute_gaps(two).delta3);
    CHECK(lb2.degenerate);
    CHECK(lb2.reason.find("support") != std::string::npos);
}

TEST_CASE("regret traces and accumulation") {
    const std::vector<double> r{1.0, 0.0, 2.0};
    const auto up = regret_trace(r, 1.0, Sense::Maximize);
    CHECK(up == std::vector<double>{0.0, 1.0, 0.0});
    const auto down = regret_trace(r, 1.0, Sense::Minimize);
    CHECK(down == std::vector<double>{0.0, -1.0, 0.0});
    TraceAccumulator acc(2);
    acc.add(std::vector<double>{1.0, 2.0});
    acc.add(std::vector<double>{3.0, 2.0});
    acc.add(std::vector<double>{5.0, 2.0});
    const auto s = acc.stats();
    CHECK(s.runs == 3);
    CHECK(s.mean[0] == doctest::Approx(3.0));
    CHECK(s.sem[0] == doctest::Approx(2.0 / std::sqrt(3.0)));
    CHECK(s.sem[1] == 0.0);
}
