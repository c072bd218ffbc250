#include "metrosim/dynamics.hpp"

#include <string>

#include "metrosim/errors.hpp"

namespace metrosim {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw ValidationError(msg);
}

double accel_net_kn(double v, const TrainPhysics& p) {
    return traction_force_kn(v, p.traction) -
           resistance_force_kn(v, p.resistance) - p.gravity_component_kn;
}

double brake_net_kn(double v, const TrainPhysics& p) {
    return -(braking_force_kn(v, p.braking) +
             resistance_force_kn(v, p.resistance) + p.gravity_component_kn);
}

// One Euler speed update of an accelerating train, capped at the commanded
// speed.  Shared verbatim by the planner and the stepper so phase distances
// land on identical floating-point values in both.
double accel_speed_step(double v, double target, const TrainPhysics& p, double dt) {
    const double a = accel_net_kn(v, p) * 1000.0 / p.mass_kg;
    double v2 = v + a * dt;
    if (v2 > target) v2 = target;
    if (v2 < 0.0) v2 = 0.0;
    return v2;
}

double brake_speed_step(double v, const TrainPhysics& p, double dt) {
    const double a = brake_net_kn(v, p) * 1000.0 / p.mass_kg;
    double v2 = v + a * dt;
    if (v2 < 0.0) v2 = 0.0;
    return v2;
}

double accel_phase_distance(double target, const TrainPhysics& p, double dt) {
    double v = 0.0, x = 0.0;
    while (v < target) {
        const double v2 = accel_speed_step(v, target, p, dt);
        if (v2 <= v)
            throw ValidationError("commanded cruise speed " +
                                  std::to_string(mps_to_kmh(target)) +
                                  " km/h is unreachable with these physics");
        x += v * dt;
        v = v2;
    }
    return x;
}

double brake_phase_distance(double from, const TrainPhysics& p, double dt) {
    double v = from, x = 0.0;
    while (v > 0.0) {
        const double v2 = brake_speed_step(v, p, dt);
        x += v * dt;
        v = v2;
    }
    return x;
}

}  // namespace

double traction_force_kn(double v_mps, const TractionParams& tp) {
    if (v_mps < tp.v1_mps) return tp.p1_kn;
    return tp.q1 / (v_mps + tp.p2_mps);
}

double braking_force_kn(double v_mps, const BrakingParams& bp) {
    if (v_mps < bp.v2_mps) return bp.p3_kn;
    return bp.q2 / (v_mps + bp.p4_mps);
}

double resistance_force_kn(double v_mps, const ResistanceParams& rp) {
    return rp.lambda1 * v_mps * v_mps + rp.lambda2 * v_mps + rp.lambda3;
}

void TrainPhysics::normalize_and_validate() {
    require(mass_kg > 0.0, "mass must be positive");
    require(traction.p1_kn > 0.0, "traction plateau p1 must be positive");
    require(traction.v1_mps > 0.0, "traction corner speed v1 must be positive");
    require(traction.p2_mps >= 0.0, "traction offset p2 must be non-negative");
    require(braking.p3_kn > 0.0, "braking plateau p3 must be positive");
    require(braking.v2_mps > 0.0, "braking corner speed v2 must be positive");
    require(braking.p4_mps >= 0.0, "braking offset p4 must be non-negative");
    require(resistance.lambda1 > 0.0, "resistance lambda1 must be positive");
    require(resistance.lambda2 >= 0.0, "resistance lambda2 must be non-negative");
    require(resistance.lambda3 > 0.0, "resistance lambda3 must be positive");
    require(beta1 > 0.0 && beta1 <= 1.0, "beta1 must be in (0,1]");
    require(beta2 > 0.0 && beta2 <= 1.0, "beta2 must be in (0,1]");
    require(beta3 > 0.0 && beta3 <= 1.0, "beta3 must be in (0,1]");
    // Make both force curves continuous at their corner speeds.
    traction.q1 = traction.p1_kn * (traction.v1_mps + traction.p2_mps);
    braking.q2 = braking.p3_kn * (braking.v2_mps + braking.p4_mps);
}

TrainPhysics TrainPhysics::defaults() {
    TrainPhysics p;
    p.mass_kg = 200000.0;
    p.traction = {.p1_kn = 200.0, .q1 = 0.0, .p2_mps = 2.0, .v1_mps = kmh_to_mps(40.0)};
    p.braking = {.p3_kn = 200.0, .q2 = 0.0, .p4_mps = 2.0, .v2_mps = kmh_to_mps(40.0)};
    p.resistance = {.lambda1 = 0.008, .lambda2 = 0.03, .lambda3 = 1.5};
    p.beta1 = 0.9;
    p.beta2 = 0.9;
    p.beta3 = 0.85;
    p.gravity_component_kn = 0.0;
    p.normalize_and_validate();
    return p;
}

PhasePlan plan_profile(double distance_m, double cruise_mps,
                       const TrainPhysics& phys, double dt_s) {
    require(distance_m > 0.0, "segment distance must be positive");
    require(cruise_mps > 0.0, "cruise speed must be positive");
    require(dt_s > 0.0, "time step must be positive");

    double ad = accel_phase_distance(cruise_mps, phys, dt_s);
    double bd = brake_phase_distance(cruise_mps, phys, dt_s);
    if (ad + bd <= distance_m)
        return {.accel_distance_m = ad,
                .cruise_distance_m = distance_m - ad - bd,
                .brake_distance_m = bd,
                .cruise_speed_mps = cruise_mps,
                .demoted = false};

    // The trapezoid does not fit: find the fastest triangular profile.  The
    // combined accel+brake distance grows with the peak, so bisect on it.
    const double peak_min = accel_speed_step(0.0, cruise_mps, phys, dt_s);
    if (accel_phase_distance(peak_min, phys, dt_s) +
            brake_phase_distance(peak_min, phys, dt_s) >
        distance_m)
        throw ValidationError("segment of " + std::to_string(distance_m) +
                              " m is too short for even a one-step speed triangle");
    double lo = peak_min, hi = cruise_mps;
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (accel_phase_distance(mid, phys, dt_s) +
                brake_phase_distance(mid, phys, dt_s) <=
            distance_m)
            lo = mid;
        else
            hi = mid;
    }
    ad = accel_phase_distance(lo, phys, dt_s);
    bd = brake_phase_distance(lo, phys, dt_s);
    return {.accel_distance_m = ad,
            .cruise_distance_m = distance_m - ad - bd,
            .brake_distance_m = bd,
            .cruise_speed_mps = lo,
            .demoted = true};
}

TrainState step_train(const TrainState& ts, const TrainPhysics& phys,
                      const PhasePlan& plan, const StepContext& ctx) {
    TrainState ns = ts;
    const double dt = ctx.dt_s;
    const double dist = ctx.segment_distance_m;
    const double brake_mark = dist - plan.brake_distance_m;
    const double step_end = ctx.now_s + dt;

    const auto arrive = [&] {
        ns.position_in_segment_m = dist;
        ns.speed_mps = 0.0;
        ns.phase = Phase::dwelling;
        ns.dwell_remaining_s = ns.commanded_next_dwell_s;
        ns.stamps.dwell_start_s = step_end;
    };

    // A cruising train whose next step would carry it past the braking mark
    // brakes for that whole step instead.  Braking a fraction of a step
    // early keeps the slow low-speed tail of the brake curve intact (the
    // alternative — braking after the mark is crossed — hits the platform
    // with residual speed and silently discards up to ~2 s of the run).
    Phase phase = ts.phase;
    if (phase == Phase::cruising &&
        ts.position_in_segment_m + ts.speed_mps * dt > brake_mark) {
        phase = Phase::braking;
        ns.phase = Phase::braking;
        ns.stamps.brake_start_s = ctx.now_s;
    }

    switch (phase) {
        case Phase::accelerating: {
            double v2 = accel_speed_step(ts.speed_mps, plan.cruise_speed_mps, phys, dt);
            if (v2 > ctx.speed_limit_mps) v2 = ctx.speed_limit_mps;
            const double x2 = ts.position_in_segment_m + ts.speed_mps * dt;
            ns.speed_mps = v2;
            ns.position_in_segment_m = x2;
            if (x2 >= dist) {
                arrive();
            } else if (x2 >= brake_mark) {
                // Triangular profile whose peak lands exactly on the mark.
                ns.phase = Phase::braking;
                ns.stamps.brake_start_s = step_end;
            } else if (v2 >= plan.cruise_speed_mps) {
                ns.speed_mps = plan.cruise_speed_mps;
                ns.phase = Phase::cruising;
                ns.stamps.cruise_start_s = step_end;
            }
            break;
        }
        case Phase::cruising: {
            const double x2 = ts.position_in_segment_m + plan.cruise_speed_mps * dt;
            ns.position_in_segment_m = x2;
            ns.speed_mps = plan.cruise_speed_mps;
            if (x2 >= dist) arrive();
            break;
        }
        case Phase::braking: {
            const double v2 = brake_speed_step(ts.speed_mps, phys, dt);
            const double x2 = ts.position_in_segment_m + ts.speed_mps * dt;
            ns.speed_mps = v2;
            ns.position_in_segment_m = x2;
            if (x2 >= dist || v2 <= 0.0) arrive();
            break;
        }
        case Phase::dwelling:
        case Phase::finished:
            throw ValidationError("step_train called on a non-moving train");
    }
    return ns;
}

void PhaseEnergyMeter::accumulate(const TrainState& before, const TrainState& after,
                                  const TrainPhysics& phys, const PhasePlan& plan,
                                  const StepContext& ctx) {
    const double dt = ctx.dt_s;
    const double b1 = phys.beta1;
    const auto p_tr = [&](double v) {
        return traction_force_kn(v, phys.traction) * v / b1;
    };
    const auto p_cr = [&](double v) {
        return resistance_force_kn(v, phys.resistance) * v / b1;
    };
    const auto p_br = [&](double v) {
        return braking_force_kn(v, phys.braking) * v * phys.beta2;
    };

    switch (before.phase) {
        case Phase::accelerating: {
            const double v0 = before.speed_mps;
            const double vc = plan.cruise_speed_mps;
            const double a = accel_net_kn(v0, phys) * 1000.0 / phys.mass_kg;
            if (v0 < vc && a > 0.0 && v0 + a * dt > vc) {
                // Capped step: the commanded speed is reached a fraction tau
                // of the way through; the remainder of the step cruises.
                const double tau = (vc - v0) / (a * dt);
                accel_kj += tau * dt * 0.5 * (p_tr(v0) + p_tr(vc));
                cruise_kj += (1.0 - tau) * dt * p_cr(vc);
            } else {
                accel_kj += dt * 0.5 * (p_tr(v0) + p_tr(after.speed_mps));
            }
            break;
        }
        case Phase::cruising: {
            // Only the early-brake trigger stamps brake_start with the step
            // START time; every other transition stamps the step end.
            if (after.stamps.brake_start_s == ctx.now_s) {
                // The early-brake trigger fired: credit the sub-step spent
                // cruising up to the mark, then meter the braking step.
                const double mark = ctx.segment_distance_m - plan.brake_distance_m;
                double sigma = (mark - before.position_in_segment_m) /
                               (before.speed_mps * dt);
                if (sigma < 0.0) sigma = 0.0;
                if (sigma > 1.0) sigma = 1.0;
                cruise_kj += sigma * dt * p_cr(before.speed_mps);
                const double v_after = after.phase == Phase::dwelling
                                           ? 0.0
                                           : after.speed_mps;
                brake_kj += dt * 0.5 * (p_br(before.speed_mps) + p_br(v_after));
            } else {
                cruise_kj += dt * p_cr(before.speed_mps);
            }
            break;
        }
        case Phase::braking: {
            const double v1 = after.phase == Phase::dwelling ? 0.0 : after.speed_mps;
            brake_kj += dt * 0.5 * (p_br(before.speed_mps) + p_br(v1));
            break;
        }
        case Phase::dwelling:
        case Phase::finished:
            break;
    }
}

SegmentRunResult run_segment(double distance_m, double cruise_mps,
                             const TrainPhysics& phys, double dt_s) {
    const PhasePlan plan = plan_profile(distance_m, cruise_mps, phys, dt_s);
    TrainState ts;
    ts.phase = Phase::accelerating;
    ts.commanded_cruise_mps = plan.cruise_speed_mps;
    PhaseEnergyMeter meter;
    long steps = 0;
    constexpr long kStepCap = 10'000'000;
    StepContext ctx{.segment_distance_m = distance_m,
                    .speed_limit_mps = cruise_mps,
                    .now_s = 0.0,
                    .dt_s = dt_s};
    while (ts.phase != Phase::dwelling) {
        ctx.now_s = static_cast<double>(steps) * dt_s;
        const TrainState next = step_train(ts, phys, plan, ctx);
        meter.accumulate(ts, next, phys, plan, ctx);
        ts = next;
        if (++steps > kStepCap)
            throw ValidationError("segment run exceeded the step budget");
    }
    return {.traversal_s = static_cast<double>(steps) * dt_s,
            .accel_energy_kwh = meter.accel_kj / 3600.0,
            .cruise_energy_kwh = meter.cruise_kj / 3600.0,
            .brake_energy_kwh = meter.brake_kj / 3600.0,
            .plan = plan,
            .steps = steps};
}

double traction_power_kw(const TrainState& ts, const TrainPhysics& phys) {
    if (ts.phase == Phase::accelerating)
        return traction_force_kn(ts.speed_mps, phys.traction) * ts.speed_mps /
               phys.beta1;
    if (ts.phase == Phase::cruising)
        return resistance_force_kn(ts.speed_mps, phys.resistance) * ts.speed_mps /
               phys.beta1;
    return 0.0;
}

double braking_power_kw(const TrainState& ts, const TrainPhysics& phys) {
    if (ts.phase == Phase::braking)
        return braking_force_kn(ts.speed_mps, phys.braking) * ts.speed_mps *
               phys.beta2;
    return 0.0;
}

}  // namespace metrosim
