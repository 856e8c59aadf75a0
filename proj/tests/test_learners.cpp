#include "ehmdp/env.hpp"
#include "ehmdp/error.hpp"
#include "ehmdp/learners.hpp"

#include "oracle_values.hpp"

#include <doctest.h>

#include <cmath>

using namespace ehmdp;

namespace {

EnvConfig two_channel_config() {
    EnvConfig cfg;
    cfg.channels = {DiscreteChannel::scaled_bernoulli(10.0, 0.5), DiscreteChannel::scaled_bernoulli(22.0, 0.4)};
    return cfg;
}

void drive(Learner& learner, const Environment& env, long horizon, Rng& rng) {
    int s = env.config().initial_state;
    for (long t = 0; t < horizon; ++t) {
        const Decision d = learner.act(t, s);
        const SlotOutcome o = env.step(s, d.action, d.channel, rng);
        learner.observe(t, s, d, o);
        s = o.next_state;
    }
}

} // namespace

TEST_CASE("estimates are running means of f over observed gains") {
    const Environment env{EnvConfig{}};
    const auto ctx = LearnerContext::from(env);
    EstimateTable table(ctx, 1);
    CHECK(table.indexing() == EstimateTable::Indexing::PerAction);
    const std::vector<double> gains{10.0, 0.0, 0.0, 10.0, 10.0};
    for (double g : gains) {
        table.observe(0, g);
    }
    CHECK(table.count(0) == 5);
    for (Action a = 1; a <= 4; ++a) {
        CHECK(table.theta(0, a, a) == doctest::Approx(0.6 * rate(a, 10.0)).epsilon(1e-14));
    }
    CHECK(table.theta(0, 0, 0) == 0.0);
    // every state sharing an action shares its estimate
    CHECK(table.theta(0, 2, 1) == table.theta(0, 4, 1));
    CHECK_THROWS_AS(table.theta(0, 1, 3), Error);
}

TEST_CASE("state-dependent rewards are estimated per pair") {
    EnvConfig cfg;
    cfg.mode = Mode::PacketScheduling;
    cfg.q_max = 2;
    cfg.arrivals = HarvestDistribution::uniform(2);
    cfg.channels = {DiscreteChannel({0.5, 2.0}, {0.5, 0.5})};
    const Environment env(cfg);
    EstimateTable table(LearnerContext::from(env), 1);
    CHECK(table.indexing() == EstimateTable::Indexing::PerPair);
    table.observe(0, 2.0);
    table.observe(0, 0.5);
    CHECK(table.theta(0, 2, 1) == doctest::Approx(1.0 + 1.25 * 2.0));
    CHECK(table.theta(0, 1, 1) == doctest::Approx(1.25 * 2.0));
}

TEST_CASE("LPSM plays the smallest action at t = 0 and solves every later slot") {
    const Environment env{EnvConfig{}};
    LpsmLearner lpsm(LearnerContext::from(env));
    const Decision d0 = lpsm.act(0, 3);
    CHECK(d0.action == 1);
    CHECK_FALSE(d0.lp_solved);
    Rng rng = make_run_rng(1, 0);
    Rng rng2 = make_run_rng(1, 0);
    LpsmLearner fresh(LearnerContext::from(env));
    drive(fresh, env, 100, rng);
    CHECK(fresh.lp_solve_count() == 99);
    EpochLpsmLearner epoch(LearnerContext::from(env), 2, 10);
    drive(epoch, env, 100, rng2);
    CHECK(epoch.lp_solve_count() == 3);
}

TEST_CASE("epoch schedule slots and count") {
    std::vector<long> slots;
    for (long t = 0; t <= 99; ++t) {
        if (epoch_solve_slot(t, 2, 10)) {
            slots.push_back(t);
        }
    }
    CHECK(slots == std::vector<long>{1, 2, 20});
    for (int n0 : {1, 2, 3, 6}) {
        for (int eta : {2, 3, 10}) {
            long brute = 0;
            for (long t = 0; t <= 5000; ++t) {
                brute += epoch_solve_slot(t, n0, eta) ? 1 : 0;
                CHECK(epoch_solve_count(t, n0, eta) == brute);
            }
        }
    }
}

TEST_CASE("exploration schedule properties") {
    CHECK(ExplorationSchedule(300.0, 2, 10000).count(10000) == oracle::kSchedule_300_2_10000);
    CHECK(ExplorationSchedule(300.0, 2, 10000).count(1000) == oracle::kSchedule_300_2_1000);
    CHECK(ExplorationSchedule(5.0, 2, 10000).count(10000) == oracle::kSchedule_5_2_10000);
    for (double w : {0.5, 2.0, 7.0, 40.0}) {
        for (int m : {1, 2, 3}) {
            const ExplorationSchedule r(w, m, 3000);
            CHECK(r.contains(1));
            for (long t : {10L, 100L, 1000L, 3000L}) {
                const double ln = std::log(static_cast<double>(t));
                CHECK(r.count(t) <= m * static_cast<long>(std::ceil(w * ln)) + m);
                CHECK(r.count(t) >= std::min<long>(t, m * static_cast<long>(std::ceil(w * ln))));
            }
        }
    }
    const ExplorationSchedule tiny(1e-9, 1, 1000);
    CHECK(tiny.count(1000) == 1);
    CHECK(ExplorationSchedule(3.0, 2, 500).count(500) == ExplorationSchedule(3.0, 2, 500).count(500));
    CHECK_THROWS_AS(ExplorationSchedule(0.0, 2, 10), Error);
    GrowthSpec loglog{GrowthSpec::Kind::LogLog, 2.0, {}};
    CHECK(loglog(3) == 2.0);
    CHECK(loglog(100000) == doctest::Approx(2.0 * std::log(std::log(100000.0))));
    GrowthSpec table{GrowthSpec::Kind::Table, 1.0, {1.0, 2.0}};
    CHECK(table(1) == 1.0);
    CHECK(table(50) == 2.0);
}

TEST_CASE("deterministic channels lock on to the best policy immediately") {
    EnvConfig cfg;
    cfg.channels = {DiscreteChannel::deterministic(10.0)};
    const Environment env(cfg);
    const auto genie = solve_genie(env);
    Rng rng = make_run_rng(4, 0);
    LpsmLearner lpsm(LearnerContext::from(env));
    drive(lpsm, env, 5, rng);
    CHECK(*lpsm.policy() == genie.policy);
    EpochLpsmLearner epoch(LearnerContext::from(env), 2, 10);
    drive(epoch, env, 5, rng);
    CHECK(*epoch.policy() == genie.policy);

    EnvConfig two;
    two.channels = {DiscreteChannel::deterministic(3.0), DiscreteChannel::deterministic(8.0)};
    const Environment env2(two);
    const auto genie2 = solve_genie(env2);
    McLpsmLearner mc(LearnerContext::from(env2), ExplorationSchedule(1.0, 2, 50));
    drive(mc, env2, 50, rng);
    CHECK(*mc.policy() == genie2.policy);
    CHECK(mc.channel_map() == genie2.channel_of_pair);
}

TEST_CASE("genie solution on the reference configurations") {
    const Environment single{EnvConfig{}};
    const auto g1 = solve_genie(single);
    CHECK(g1.policy.actions() == oracle::kSingleBetaStar);
    CHECK(g1.rho_star == doctest::Approx(oracle::kSingleRhoStar).epsilon(1e-12));
    const Environment two(two_channel_config());
    const auto g2 = solve_genie(two);
    CHECK(g2.policy.actions() == oracle::kTwoBetaStar);
    CHECK(g2.rho_star == doctest::Approx(oracle::kTwoRhoStar).epsilon(1e-12));
    for (Action a = 1; a <= 4; ++a) {
        const auto& m = two.model();
        const int i = m.pair_index(a, *m.action_position(a, a));
        CHECK(g2.channel_of_pair[i] == oracle::kTwoPhiStar[a - 1]);
    }
    CHECK(naive_policy(single.model()).actions() == std::vector<Action>{0, 1, 2, 3, 4});
}

TEST_CASE("LPSM finds the optimal policy by t = 100 in most runs") {
    const Environment env{EnvConfig{}};
    const auto genie = solve_genie(env);
    int hits = 0;
    const int runs = 1000;
    for (int run = 0; run < runs; ++run) {
        Rng rng = make_run_rng(77, run);
        LpsmLearner lpsm(LearnerContext::from(env));
        drive(lpsm, env, 101, rng);
        hits += *lpsm.policy() == genie.policy ? 1 : 0;
    }
    CHECK(hits > 950);
}

TEST_CASE("MC-LPSM explores round robin and exploits the best estimated channel") {
    const Environment env(two_channel_config());
    const auto ctx = LearnerContext::from(env);
    McLpsmLearner mc(ctx, ExplorationSchedule(2.0, 2, 400));
    Rng rng = make_run_rng(8, 0);
    int s = 0;
    for (long t = 0; t < 400; ++t) {
        const Decision d = mc.act(t, s);
        if (mc.schedule().contains(t + 1)) {
            CHECK(d.exploring);
            CHECK(d.channel == t % 2);
            CHECK(d.action == smallest_action(env.model(), s));
        } else {
            CHECK_FALSE(d.exploring);
            const double other = mc.estimates().theta(1 - d.channel, s, d.action);
            CHECK(mc.estimates().theta(d.channel, s, d.action) >= other);
        }
        const auto o = env.step(s, d.action, d.channel, rng);
        mc.observe(t, s, d, o);
        s = o.next_state;
    }
    CHECK(mc.lp_solve_count() <= mc.schedule().count(400));
    CHECK(mc.action_channel_map().size() == 5);
}

TEST_CASE("realistic observation skips updates when nothing is sent") {
    EnvConfig cfg;
    cfg.observation = GainObservation::Realistic;
    const Environment env(cfg);
    LpsmLearner lpsm(LearnerContext::from(env));
    Rng rng = make_run_rng(3, 0);
    const Decision d = lpsm.act(0, 0);
    lpsm.observe(0, 0, d, env.step(0, d.action, 0, rng));
    CHECK(lpsm.estimates().count(0) == 0);
    const Decision d1 = lpsm.act(1, 2);
    lpsm.observe(1, 2, d1, env.step(2, d1.action, 0, rng));
    CHECK(lpsm.estimates().count(0) == 1);
}

TEST_CASE("baselines and single-channel guards") {
    const Environment two(two_channel_config());
    CHECK_THROWS_AS(LpsmLearner(LearnerContext::from(two)), Error);
    const auto genie = solve_genie(two);
    auto g = make_baseline(BaselineKind::Genie, two, genie);
    const Decision d = g->act(0, 4);
    CHECK(d.action == 3);
    CHECK(d.channel == 0);
    CHECK_THROWS_AS(make_baseline(BaselineKind::Fixed, two, genie), Error);
    CHECK_THROWS_AS(EpochLpsmLearner(LearnerContext::from(Environment{EnvConfig{}}), 2, 1), Error);
}
