#include "ehmdp/env.hpp"
#include "ehmdp/error.hpp"

#include "oracle_values.hpp"

#include <doctest.h>

#include <random>

using namespace ehmdp;

TEST_CASE("rate values and inversion") {
    CHECK(rate(1, 10.0) == doctest::Approx(oracle::kRate_1_10).epsilon(1e-15));
    CHECK(rate(4, 22.0) == doctest::Approx(oracle::kRate_4_22).epsilon(1e-15));
    CHECK(rate(0, 10.0) == 0.0);
    CHECK(rate(2, 3.0, 2.0) == doctest::Approx(2.0 * std::log2(7.0)));
    CHECK_FALSE(invert_rate(0, 0.0).has_value());
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> g(0.0, 50.0);
    for (int k = 0; k < 1000; ++k) {
        const double x = g(rng);
        const Action a = 1 + k % 6;
        const double b = 0.5 + (k % 3);
        CHECK(*invert_rate(a, rate(a, x, b), b) == doctest::Approx(x).epsilon(1e-10));
        CHECK(rate(a + 1, x, b) >= rate(a, x, b));
    }
}

TEST_CASE("mean rates of scaled Bernoulli channels") {
    const auto ch = DiscreteChannel::scaled_bernoulli(10.0, 0.2);
    CHECK(mean_rate(1, ch) == doctest::Approx(oracle::kMeanSingle_1).epsilon(1e-15));
    CHECK(mean_rate(3, ch) == doctest::Approx(oracle::kMeanSingle_3).epsilon(1e-15));
    CHECK(mean_rate(3, DiscreteChannel::scaled_bernoulli(10.0, 0.5)) ==
          doctest::Approx(oracle::kMeanTwo_ch0_3).epsilon(1e-15));
    CHECK(mean_rate(3, DiscreteChannel::scaled_bernoulli(22.0, 0.4)) ==
          doctest::Approx(oracle::kMeanTwo_ch1_3).epsilon(1e-15));
    CHECK(ch.support() == std::vector<double>{0.0, 10.0});
    CHECK(ch.mean_gain() == doctest::Approx(2.0));
}

TEST_CASE("channel construction rejects malformed input") {
    CHECK_THROWS_AS(DiscreteChannel({1.0, 2.0}, {0.5}), Error);
    CHECK_THROWS_AS(DiscreteChannel({1.0, -2.0}, {0.5, 0.5}), Error);
    CHECK_THROWS_AS(DiscreteChannel({1.0, 2.0}, {0.5, 0.6}), Error);
    CHECK_THROWS_AS(DiscreteChannel::scaled_bernoulli(10.0, 1.5), Error);
}

TEST_CASE("sample frequencies converge to the channel law") {
    const DiscreteChannel ch({0.5, 1.0, 2.0}, {0.3, 0.4, 0.3});
    Rng rng = make_run_rng(5, 0);
    std::vector<long> hits(3, 0);
    double sum = 0.0;
    const long n = 1'000'000;
    for (long k = 0; k < n; ++k) {
        const double x = ch.sample(rng);
        sum += x;
        hits[x == 0.5 ? 0 : x == 1.0 ? 1 : 2] += 1;
    }
    for (int k = 0; k < 3; ++k) {
        CHECK(static_cast<double>(hits[k]) / n == doctest::Approx(ch.probs()[k]).epsilon(0.01));
    }
    CHECK(sum / n == doctest::Approx(ch.mean_gain()).epsilon(0.005));
}

TEST_CASE("packet cost") {
    CHECK(packet_cost(3, 2, 10.0, CostWeights{1.0, 1.0}) == oracle::kPacketCostExample);
    CHECK(packet_cost(2, 0, 1.0, CostWeights{1.0, 0.5}) == doctest::Approx(2.5));
    RewardFunction f{Mode::PacketScheduling, 1.0, CostWeights{1.0, 0.5}};
    CHECK(f.state_dependent());
    CHECK(f.sense() == Sense::Minimize);
    CHECK(*f.invert(3, 2, f(3, 2, 1.7)) == doctest::Approx(1.7));
    CHECK(*f.invert(3, 0, f(3, 0, 0.9)) == doctest::Approx(0.9));
}

TEST_CASE("run streams are deterministic and distinct") {
    Rng a = make_run_rng(42, 3);
    Rng b = make_run_rng(42, 3);
    Rng c = make_run_rng(42, 4);
    Rng d = make_run_rng(43, 3);
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
    CHECK(x != d());
}

TEST_CASE("environment step") {
    EnvConfig cfg;
    const Environment env(cfg);
    CHECK(env.model().num_states() == 5);
    CHECK(env.sense() == Sense::Maximize);
    Rng r1 = make_run_rng(1, 0);
    Rng r2 = make_run_rng(1, 0);
    for (int k = 0; k < 200; ++k) {
        const auto o1 = env.step(4, 3, 0, r1);
        const auto o2 = env.step(4, 3, 0, r2);
        CHECK(o1.next_state == o2.next_state);
        CHECK(o1.value == o2.value);
        CHECK(o1.next_state >= 1);
        CHECK(o1.gain.has_value());
        CHECK(o1.value == doctest::Approx(rate(3, *o1.gain)));
    }
    Rng r3 = make_run_rng(1, 0);
    CHECK_THROWS_AS(env.step(1, 0, 0, r3), Error);
    CHECK_THROWS_AS(env.step(1, 1, 2, r3), Error);
    const auto mu = env.mean_rewards(0);
    CHECK(mu[env.model().pair_index(0, 0)] == 0.0);
}

TEST_CASE("the stream position does not depend on the channel used") {
    EnvConfig cfg;
    cfg.channels = {DiscreteChannel::scaled_bernoulli(10.0, 0.5), DiscreteChannel::scaled_bernoulli(22.0, 0.4)};
    const Environment env(cfg);
    Rng r1 = make_run_rng(9, 1);
    Rng r2 = make_run_rng(9, 1);
    for (int k = 0; k < 100; ++k) {
        CHECK(env.step(2, 2, 0, r1).next_state == env.step(2, 2, 1, r2).next_state);
    }
}

TEST_CASE("realistic observation hides the gain when nothing is sent") {
    EnvConfig cfg;
    cfg.observation = GainObservation::Realistic;
    const Environment env(cfg);
    Rng rng = make_run_rng(2, 0);
    CHECK_FALSE(env.step(0, 0, 0, rng).gain.has_value());
    const auto o = env.step(2, 2, 0, rng);
    REQUIRE(o.gain.has_value());
    CHECK((*o.gain == doctest::Approx(0.0) || *o.gain == doctest::Approx(10.0)));
}
