#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdlib>
#include <random>
#include <string>

#include "metrosim/errors.hpp"
#include "metrosim/mdp_env.hpp"

using namespace metrosim;

namespace {

LineDataset load_line() {
    const char* dir = std::getenv("METROSIM_DATA_DIR");
    REQUIRE(dir != nullptr);
    return LineDataset::load_file(std::string(dir) + "/xiamen_line1.csv");
}

MetroEnv make_env(EnvConfig cfg = {}) {
    return MetroEnv(load_line(), TrainPhysics::defaults(), cfg);
}

EnvConfig solo_config() {
    EnvConfig cfg;
    cfg.fleet.num_trains = 1;
    cfg.fleet.trains_up = 1;
    cfg.fleet.trains_down = 0;
    cfg.disturbance.probability_per_stop = 0.0;
    return cfg;
}

}  // namespace

TEST_CASE("action mapping is affine onto the command bounds") {
    MetroEnv env = make_env();

    const auto at = [&](double a, double b) { return env.map_action({a, b}); };

    CHECK(at(-1.0, -1.0) == std::make_pair(kmh_to_mps(40.0), 15.0));
    CHECK(at(1.0, 1.0) == std::make_pair(kmh_to_mps(80.0), 60.0));
    CHECK(at(0.0, 0.0) == std::make_pair(kmh_to_mps(60.0), 37.5));
    // Out-of-range raw values saturate rather than extrapolate.
    CHECK(at(-7.0, 9.0) == std::make_pair(kmh_to_mps(40.0), 60.0));
    CHECK(mps_to_kmh(at(0.5, -0.5).first) ==
          doctest::Approx(70.0).epsilon(1e-15));
    CHECK(at(0.5, -0.5).second == doctest::Approx(26.25).epsilon(1e-15));
}

TEST_CASE("env config rejects inverted or oversized bounds") {
    EnvConfig cfg;
    cfg.bounds.cruise_min_kmh = 90.0;
    CHECK_THROWS_AS(make_env(cfg), ValidationError);

    cfg = EnvConfig{};
    cfg.bounds.cruise_max_kmh = 120.0;  // above the line's 80 km/h limit
    CHECK_THROWS_AS(make_env(cfg), ValidationError);

    cfg = EnvConfig{};
    cfg.reward_scale_steps = 0;
    CHECK_THROWS_AS(make_env(cfg), ValidationError);

    cfg = EnvConfig{};
    cfg.bounds.dwell_min_s = 30.0;
    cfg.bounds.dwell_max_s = 20.0;
    CHECK_THROWS_AS(make_env(cfg), ValidationError);
}

TEST_CASE("reset produces a bounded fleet snapshot with train 0 deciding") {
    MetroEnv env = make_env();
    const Observation obs = env.reset(0);

    CHECK(obs.deciding_train_id == 0);
    REQUIRE(static_cast<int>(obs.features.size()) == 20 * 8);
    CHECK(env.observation_size() == 160);
    for (double f : obs.features) {
        CHECK(f >= -1.0);
        CHECK(f <= 1.0);
    }
    for (int id = 0; id < 20; ++id) {
        const double* row = obs.features.data() + id * 8;
        CHECK(row[0] == -1.0);  // never accelerated
        CHECK(row[1] == -1.0);  // never cruised
        CHECK(row[2] == -1.0);  // never braked
        CHECK(row[3] == -1.0);  // holding since t=0
        CHECK(row[4] == 0.0);   // at origin
        CHECK(row[5] == doctest::Approx(
                  id < 10 ? 890.0 / 30380.0 : 860.0 / 30380.0));
        CHECK(row[6] == (id < 10 ? 1.0 : -1.0));
        CHECK(row[7] == 0.0);
    }
}

TEST_CASE("observation times and positions track the world's stamps") {
    EnvConfig cfg = solo_config();
    MetroEnv env = make_env(cfg);
    env.reset(0);

    // Serve the first decision; the env pauses again once the train has run
    // segment 1 and finished its hold at station 1.
    const StepResult r1 = env.step({0.0, 0.0});
    REQUIRE(!r1.done);
    const Observation& o = r1.observation;
    CHECK(o.deciding_train_id == 0);

    const TrainState& st = env.world().train_states()[0];
    const double H = cfg.obs_horizon_s;
    const double L = env.world().line_length_m();
    CHECK(st.stamps.cruise_start_s > 0.0);
    CHECK(st.stamps.brake_start_s > st.stamps.cruise_start_s);
    CHECK(st.stamps.dwell_start_s > st.stamps.brake_start_s);
    // Wall-clock stamps pass through the fixed normalisation verbatim.
    CHECK(o.features[0] == -1.0);  // departed at t=0: lower edge
    CHECK(o.features[1] ==
          2.0 * std::min(st.stamps.cruise_start_s / H, 1.0) - 1.0);
    CHECK(o.features[2] ==
          2.0 * std::min(st.stamps.brake_start_s / H, 1.0) - 1.0);
    CHECK(o.features[3] ==
          2.0 * std::min(st.stamps.dwell_start_s / H, 1.0) - 1.0);
    // Holding at station 1: 890 m down the line, at the platform itself.
    CHECK(o.features[4] == 890.0 / L);
    CHECK(o.features[5] == 0.0);
}

TEST_CASE("a commanded decision lands on the deciding train verbatim") {
    MetroEnv env = make_env(solo_config());
    env.reset(0);

    const StepResult r1 = env.step({1.0, -1.0});  // 80 km/h, 15 s hold
    const TrainState& st = env.world().train_states()[0];
    CHECK(st.commanded_cruise_mps == kmh_to_mps(80.0));
    CHECK(st.commanded_next_dwell_s == 15.0);
    CHECK(r1.observation.deciding_train_id == 0);
    CHECK(!r1.done);
    CHECK(env.world().departures_of(0).size() == 1);

    // Second decision is for the following segment.
    CHECK(env.world().pending_decisions().front().next_segment_index == 1);
}

TEST_CASE("episode runs exactly one decision per train per segment") {
    MetroEnv env = make_env();
    env.reset(3);
    std::mt19937_64 rng(9);
    const auto u = [&rng] {
        return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
    };
    int steps = 0;
    bool done = false;
    while (!done) {
        const StepResult r = env.step({u(), u()});
        done = r.done;
        ++steps;
        REQUIRE(steps <= 460);
    }
    CHECK(steps == 460);
    CHECK(env.summary().decisions == 460);
    CHECK_THROWS_AS(env.step({0.0, 0.0}), ValidationError);
}

TEST_CASE("episode reward telescopes to the ledger's overlap, bit for bit") {
    MetroEnv env = make_env();
    env.reset(11);
    std::mt19937_64 rng(23);
    const auto u = [&rng] {
        return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
    };
    double reward_sum = 0.0;
    bool done = false;
    while (!done) {
        const StepResult r = env.step({u(), u()});
        reward_sum += r.reward;
        done = r.done;
    }
    const EpisodeSummary s = env.summary();
    CHECK(s.reward_sum == reward_sum);
    CHECK(s.ledger.overlap_steps > 0);
    // Dyadic reward scale: the sums are exact, not approximately equal.
    CHECK(reward_sum ==
          static_cast<double>(s.ledger.overlap_steps) / 1024.0);
    CHECK(reward_sum * env.config().reward_scale_s() ==
          s.ledger.overlap_seconds());
}

TEST_CASE("per-observation bounds hold through a whole random episode") {
    MetroEnv env = make_env();
    Observation obs = env.reset(17);
    std::mt19937_64 rng(31);
    const auto u = [&rng] {
        return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
    };
    bool done = false;
    while (!done) {
        for (double f : obs.features) {
            REQUIRE(f >= -1.0);
            REQUIRE(f <= 1.0);
        }
        const StepResult r = env.step({u(), u()});
        obs = r.observation;
        done = r.done;
    }
    // Terminal snapshot: everyone home, nobody deciding.
    CHECK(obs.deciding_train_id == -1);
    for (int id = 0; id < 20; ++id) {
        CHECK(obs.features[id * 8 + 7] == 1.0);
        CHECK(obs.features[id * 8 + 5] == 0.0);
    }
}

TEST_CASE("baseline episodes replay bit-identically under one seed") {
    MetroEnv env = make_env();
    const EpisodeSummary a = env.run_baseline(7);
    const EpisodeSummary b = env.run_baseline(7);

    CHECK(a.decisions == 460);
    CHECK(a.ledger.e_traction_kwh == b.ledger.e_traction_kwh);
    CHECK(a.ledger.e_regen_kwh == b.ledger.e_regen_kwh);
    CHECK(a.ledger.overlap_steps == b.ledger.overlap_steps);
    CHECK(a.total_time_s == b.total_time_s);
    CHECK(a.reward_sum == b.reward_sum);
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].time_s == b.log[i].time_s);
        CHECK(a.log[i].train_id == b.log[i].train_id);
        CHECK(a.log[i].reward == b.log[i].reward);
    }

    // The nominal fleet spends real time in regenerative overlap.
    CHECK(a.ledger.overlap_seconds() > 0.0);
    CHECK(a.ledger.e_total_kwh() < a.ledger.e_traction_kwh);

    const EpisodeSummary c = env.run_baseline(8);
    CHECK(c.ledger.e_traction_kwh != a.ledger.e_traction_kwh);
}

TEST_CASE("summary is refused while trains are still out") {
    MetroEnv env = make_env(solo_config());
    env.reset(0);
    env.step({0.0, 0.0});
    CHECK_THROWS_AS(env.summary(), NotFinishedError);
}
