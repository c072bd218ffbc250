#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "metrosim/errors.hpp"
#include "metrosim/network_sim.hpp"

using namespace metrosim;

namespace {

LineDataset load_line() {
    const char* dir = std::getenv("METROSIM_DATA_DIR");
    REQUIRE(dir != nullptr);
    return LineDataset::load_file(std::string(dir) + "/xiamen_line1.csv");
}

// Serve every pending decision with the dataset's own cruise/dwell.
void serve_nominal(World& world) {
    while (!world.pending_decisions().empty()) {
        const DecisionRequest req = world.pending_decisions().front();
        const SegmentRecord seg =
            world.nominal_segment(req.train_id, req.next_segment_index);
        world.apply_command(req.train_id, kmh_to_mps(seg.cruise_kmh),
                            seg.dwell_s);
    }
}

// Drive a world to completion under nominal commands; returns the number
// of decisions served.
int run_nominal(World& world) {
    int decisions = 0;
    while (!world.done()) {
        auto reqs = world.advance_until_decision();
        decisions += static_cast<int>(reqs.size());
        serve_nominal(world);
    }
    return decisions;
}

std::int64_t steps_of(double seconds, double dt) {
    return std::llround(seconds / dt);
}

}  // namespace

TEST_CASE("fleet and disturbance configs reject bad values") {
    FleetConfig fleet;
    fleet.trains_up = 9;
    CHECK_THROWS_AS(fleet.validate(), ValidationError);
    fleet.trains_up = 10;
    fleet.headway_s = 0.0;
    CHECK_THROWS_AS(fleet.validate(), ValidationError);
    fleet.headway_s = 120.0;
    CHECK_NOTHROW(fleet.validate());

    DisturbanceConfig dc;
    dc.probability_per_stop = 1.5;
    CHECK_THROWS_AS(dc.validate(), ValidationError);
    dc.probability_per_stop = 0.3;
    dc.max_extra_dwell_s = -1.0;
    CHECK_THROWS_AS(dc.validate(), ValidationError);
}

TEST_CASE("disturbance sampler matches its nominal moments") {
    const int n = 100000;

    SUBCASE("uniform, default gate") {
        DisturbanceConfig dc;  // p=0.3, max=30, uniform
        std::mt19937_64 rng(7);
        double sum = 0.0;
        int hits = 0;
        for (int i = 0; i < n; ++i) {
            const double x = sample_disturbance(dc, rng);
            REQUIRE(x >= 0.0);
            REQUIRE(x <= 30.0);
            sum += x;
            if (x > 0.0) ++hits;
        }
        // E[x] = 0.3 * 15 = 4.5
        CHECK(sum / n == doctest::Approx(4.5).epsilon(0.03));
        CHECK(static_cast<double>(hits) / n == doctest::Approx(0.3).epsilon(0.02));
    }

    SUBCASE("gate closed means identically zero") {
        DisturbanceConfig dc;
        dc.probability_per_stop = 0.0;
        std::mt19937_64 rng(7);
        for (int i = 0; i < 1000; ++i) {
            CHECK(sample_disturbance(dc, rng) == 0.0);
        }
    }

    SUBCASE("truncated exponential stays in range with the right mean") {
        DisturbanceConfig dc;
        dc.probability_per_stop = 1.0;
        dc.distribution = DisturbanceKind::truncated_exponential;
        std::mt19937_64 rng(11);
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = sample_disturbance(dc, rng);
            REQUIRE(x >= 0.0);
            REQUIRE(x <= 30.0);
            sum += x;
        }
        // tau = 10, truncated at 30: E = tau - 30 e^{-3} / (1 - e^{-3}).
        const double expected = 10.0 - 30.0 * std::exp(-3.0) / (1.0 - std::exp(-3.0));
        CHECK(sum / n == doctest::Approx(expected).epsilon(0.01));
    }
}

TEST_CASE("initial schedule staggers departures one headway apart") {
    const LineDataset line = load_line();
    FleetConfig fleet;
    DisturbanceConfig dc;
    dc.probability_per_stop = 0.0;
    World world(line, TrainPhysics::defaults(), fleet, dc);

    // Trains 0 (up) and 10 (down) are due out immediately.
    REQUIRE(world.pending_decisions().size() == 2);
    CHECK(world.pending_decisions()[0].train_id == 0);
    CHECK(world.pending_decisions()[1].train_id == 10);
    CHECK(world.pending_decisions()[0].next_segment_index == 0);
    CHECK(world.pending_decisions()[0].time_s == 0.0);

    run_nominal(world);
    for (int id = 0; id < 20; ++id) {
        const int slot = id < 10 ? id : id - 10;
        REQUIRE(world.departures_of(id).size() == 23);
        CHECK(world.departures_of(id)[0] ==
              doctest::Approx(120.0 * slot).epsilon(1e-12));
    }
}

TEST_CASE("a nominal episode asks for exactly one decision per departure") {
    const LineDataset line = load_line();
    FleetConfig fleet;
    DisturbanceConfig dc;
    World world(line, TrainPhysics::defaults(), fleet, dc);
    const int decisions = run_nominal(world);
    CHECK(decisions == 20 * 23);  // every train departs once per segment
}

TEST_CASE("undisturbed departures reproduce the cumulative timetable") {
    const LineDataset line = load_line();
    const TrainPhysics phys = TrainPhysics::defaults();
    const double dt = 0.1;
    FleetConfig fleet;
    DisturbanceConfig dc;
    dc.probability_per_stop = 0.0;
    World world(line, phys, fleet, dc);
    run_nominal(world);

    // Departure n of train m must equal its first departure plus the sum of
    // single-segment traversals and quantized dwells — accumulated in whole
    // steps, so the comparison is exact.
    for (int id : {0, 3, 9, 10, 17}) {
        const Direction dir = id < 10 ? Direction::up : Direction::down;
        const auto& segs = world.dataset_for(dir).segments();
        const auto& deps = world.departures_of(id);
        REQUIRE(deps.size() == 23);
        std::int64_t expected = steps_of(deps[0], dt);
        for (std::size_t n = 1; n < deps.size(); ++n) {
            const SegmentRecord& seg = segs[n - 1];
            const SegmentRunResult run = run_segment(
                seg.distance_km * 1000.0, kmh_to_mps(seg.cruise_kmh), phys, dt);
            expected += run.steps + steps_of(seg.dwell_s, dt);
            CHECK(steps_of(deps[n], dt) == expected);
        }
    }

    // Completion time composes the same way: last slot's start offset plus
    // every traversal plus every interior dwell, maximised across paths.
    std::int64_t worst = 0;
    for (const Direction dir : {Direction::up, Direction::down}) {
        const auto& segs = world.dataset_for(dir).segments();
        std::int64_t total = steps_of(9 * 120.0, dt);
        for (std::size_t i = 0; i < segs.size(); ++i) {
            const SegmentRunResult run = run_segment(
                segs[i].distance_km * 1000.0, kmh_to_mps(segs[i].cruise_kmh),
                phys, dt);
            total += run.steps;
            if (i + 1 < segs.size()) total += steps_of(segs[i].dwell_s, dt);
        }
        worst = std::max(worst, total);
    }
    CHECK(steps_of(world.total_time(), dt) == worst);
}

TEST_CASE("a lone train never overlaps traction with braking") {
    const LineDataset line = load_line();
    FleetConfig fleet;
    fleet.num_trains = 1;
    fleet.trains_up = 1;
    fleet.trains_down = 0;
    DisturbanceConfig dc;
    dc.probability_per_stop = 0.0;
    World world(line, TrainPhysics::defaults(), fleet, dc);
    run_nominal(world);

    const EnergyLedger& led = world.ledger();
    CHECK(led.overlap_steps == 0);
    CHECK(led.e_regen_kwh == 0.0);
    CHECK(led.e_traction_kwh > 0.0);
    CHECK(led.e_brake_gross_kwh > 0.0);
    CHECK(led.e_total_kwh() == led.e_traction_kwh);
    CHECK(led.overlap_seconds() == 0.0);
}

TEST_CASE("ledger bounds hold at every step of a staggered pair") {
    const LineDataset line = load_line();
    const TrainPhysics phys = TrainPhysics::defaults();
    FleetConfig fleet;
    fleet.num_trains = 2;
    fleet.trains_up = 2;
    fleet.trains_down = 0;
    fleet.headway_s = 60.0;  // tighter spacing makes overlap frequent
    DisturbanceConfig dc;
    dc.probability_per_stop = 0.0;
    World world(line, phys, fleet, dc);

    EnergyLedger prev = world.ledger();
    while (!world.done()) {
        serve_nominal(world);
        if (world.done()) break;
        world.advance();
        const EnergyLedger& led = world.ledger();
        // Monotone accounts...
        CHECK(led.e_traction_kwh >= prev.e_traction_kwh);
        CHECK(led.e_brake_gross_kwh >= prev.e_brake_gross_kwh);
        CHECK(led.e_regen_kwh >= prev.e_regen_kwh);
        CHECK(led.overlap_steps >= prev.overlap_steps);
        // ...and exact pointwise bounds.
        REQUIRE(led.e_regen_kwh >= 0.0);
        REQUIRE(led.e_regen_kwh <= led.e_traction_kwh);
        REQUIRE(led.e_regen_kwh <= led.e_regen_cap_kwh);
        prev = led;
    }

    const EnergyLedger& led = world.ledger();
    CHECK(led.overlap_steps > 0);
    CHECK(led.e_regen_kwh > 0.0);
    CHECK(led.e_total_kwh() == led.e_traction_kwh - led.e_regen_kwh);
    CHECK(led.e_regen_cap_kwh ==
          doctest::Approx(phys.beta3 * led.e_brake_gross_kwh).epsilon(1e-12));
    CHECK(led.overlap_seconds() ==
          static_cast<double>(led.overlap_steps) * 0.1);
}

TEST_CASE("same seed reruns bit-identically, new seed diverges") {
    const LineDataset line = load_line();
    FleetConfig fleet;
    fleet.num_trains = 4;
    fleet.trains_up = 2;
    fleet.trains_down = 2;
    DisturbanceConfig dc;
    dc.seed = 42;

    World a(line, TrainPhysics::defaults(), fleet, dc);
    World b(line, TrainPhysics::defaults(), fleet, dc);
    run_nominal(a);
    run_nominal(b);
    CHECK(a.total_time() == b.total_time());
    CHECK(a.ledger().e_traction_kwh == b.ledger().e_traction_kwh);
    CHECK(a.ledger().e_brake_gross_kwh == b.ledger().e_brake_gross_kwh);
    CHECK(a.ledger().e_regen_kwh == b.ledger().e_regen_kwh);
    CHECK(a.ledger().overlap_steps == b.ledger().overlap_steps);
    for (int id = 0; id < fleet.num_trains; ++id) {
        CHECK(a.departures_of(id) == b.departures_of(id));
    }

    dc.seed = 43;
    World c(line, TrainPhysics::defaults(), fleet, dc);
    run_nominal(c);
    CHECK(c.total_time() != a.total_time());
}

TEST_CASE("a drawn disturbance lengthens exactly one dwell by its size") {
    const LineDataset line = load_line();
    FleetConfig fleet;
    fleet.num_trains = 1;
    fleet.trains_up = 1;
    fleet.trains_down = 0;
    DisturbanceConfig dc;
    dc.probability_per_stop = 1.0;
    dc.seed = 5;
    World world(line, TrainPhysics::defaults(), fleet, dc);
    run_nominal(world);

    // Replay the generator to predict the first stop's draw, then check the
    // realised dwell is the commanded dwell plus that draw, rounded up to a
    // whole step.
    std::mt19937_64 replay(dc.seed);
    const double eps1 = sample_disturbance(dc, replay);
    REQUIRE(eps1 > 0.0);
    const double arrive1 = world.arrivals_of(0)[0];
    const double depart2 = world.departures_of(0)[1];
    const double nominal_dwell = line.segments()[0].dwell_s;
    const std::int64_t held = steps_of(depart2 - arrive1, 0.1);
    const std::int64_t expect = static_cast<std::int64_t>(
        std::ceil((nominal_dwell + eps1) / 0.1 - 1e-9));
    CHECK(held == expect);
}

TEST_CASE("stretching one dwell shifts completion by the same amount") {
    const LineDataset line = load_line();
    FleetConfig fleet;
    fleet.num_trains = 1;
    fleet.trains_up = 1;
    fleet.trains_down = 0;
    DisturbanceConfig dc;
    dc.probability_per_stop = 0.0;

    const auto run_with_pad = [&](double pad_s) {
        World world(line, TrainPhysics::defaults(), fleet, dc);
        while (!world.done()) {
            for (const DecisionRequest req :
                 std::vector<DecisionRequest>(world.pending_decisions())) {
                const SegmentRecord seg =
                    world.nominal_segment(req.train_id, req.next_segment_index);
                const double extra = req.next_segment_index == 4 ? pad_s : 0.0;
                world.apply_command(req.train_id, kmh_to_mps(seg.cruise_kmh),
                                    seg.dwell_s + extra);
            }
            world.advance_until_decision();
        }
        return world.total_time();
    };

    const double base = run_with_pad(0.0);
    const double padded = run_with_pad(7.5);
    CHECK(padded - base == doctest::Approx(7.5).epsilon(1e-12));
}

TEST_CASE("trailing train running hot trips the overtaking guard") {
    const LineDataset line = load_line();
    const TrainPhysics phys = TrainPhysics::defaults();
    FleetConfig fleet;
    fleet.num_trains = 2;
    fleet.trains_up = 2;
    fleet.trains_down = 0;
    DisturbanceConfig dc;
    dc.probability_per_stop = 0.0;

    // Leader crawls with long holds, trailer sprints with minimal ones.
    const auto serve_hostile = [&](World& world) {
        while (!world.pending_decisions().empty()) {
            const DecisionRequest req = world.pending_decisions().front();
            if (req.train_id == 0) {
                world.apply_command(0, kmh_to_mps(40.0), 60.0);
            } else {
                world.apply_command(1, kmh_to_mps(80.0), 15.0);
            }
        }
    };

    SUBCASE("counted by default") {
        World world(line, phys, fleet, dc);
        while (!world.done()) {
            serve_hostile(world);
            if (!world.done()) world.advance_until_decision();
        }
        CHECK(world.overtake_events() > 0);
    }

    SUBCASE("rejected when the policy demands order") {
        SimParams params;
        params.overtake_policy = OvertakePolicy::reject;
        World world(line, phys, fleet, dc, params);
        CHECK_THROWS_WITH_AS(
            [&] {
                while (!world.done()) {
                    serve_hostile(world);
                    if (!world.done()) world.advance_until_decision();
                }
            }(),
            doctest::Contains("overtaking: train 1 passed train 0"),
            ValidationError);
    }
}

TEST_CASE("world guards against out-of-order driving") {
    const LineDataset line = load_line();
    FleetConfig fleet;
    fleet.num_trains = 1;
    fleet.trains_up = 1;
    fleet.trains_down = 0;
    DisturbanceConfig dc;
    World world(line, TrainPhysics::defaults(), fleet, dc);

    // Decision pending from construction: time may not move yet.
    CHECK_THROWS_AS(world.advance(), ValidationError);
    CHECK_THROWS_AS(world.apply_command(7, 15.0, 25.0), ValidationError);
    CHECK_THROWS_AS(world.apply_command(0, kmh_to_mps(81.0), 25.0),
                    ValidationError);
    CHECK_THROWS_AS(world.apply_command(0, kmh_to_mps(60.0), -1.0),
                    ValidationError);
    CHECK_THROWS_AS(world.total_time(), NotFinishedError);

    run_nominal(world);
    CHECK_THROWS_AS(world.advance(), ValidationError);
}

TEST_CASE("an empty fleet is complete at birth with empty accounts") {
    const LineDataset line = load_line();
    FleetConfig fleet;
    fleet.num_trains = 0;
    fleet.trains_up = 0;
    fleet.trains_down = 0;
    DisturbanceConfig dc;
    World world(line, TrainPhysics::defaults(), fleet, dc);

    CHECK(world.done());
    CHECK(world.total_time() == 0.0);
    CHECK(world.ledger().e_traction_kwh == 0.0);
    CHECK(world.ledger().e_brake_gross_kwh == 0.0);
    CHECK(world.ledger().e_regen_kwh == 0.0);
    CHECK(world.ledger().overlap_steps == 0);
    CHECK(world.pending_decisions().empty());
}

TEST_CASE("trace stream logs one power row per step") {
    const LineDataset line = load_line();
    FleetConfig fleet;
    fleet.num_trains = 1;
    fleet.trains_up = 1;
    fleet.trains_down = 0;
    DisturbanceConfig dc;
    World world(line, TrainPhysics::defaults(), fleet, dc);

    std::ostringstream trace;
    world.set_trace_stream(&trace);
    serve_nominal(world);
    for (int i = 0; i < 50; ++i) world.advance();

    std::istringstream in(trace.str());
    std::string row;
    REQUIRE(std::getline(in, row));
    CHECK(row == "t_s,p_traction_kw,p_braking_kw,p_regen_kw,overlap");
    int rows = 0;
    while (std::getline(in, row)) {
        ++rows;
        CHECK(std::count(row.begin(), row.end(), ',') == 4);
    }
    CHECK(rows == 50);
}
