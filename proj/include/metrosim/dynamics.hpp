#pragma once

#include <cstdint>

namespace metrosim {

constexpr double kmh_to_mps(double kmh) { return kmh / 3.6; }
constexpr double mps_to_kmh(double mps) { return mps * 3.6; }

/// Traction force curve: constant-torque plateau p1 below the corner speed
/// v1, then the constant-power branch q1/(v + p2).  q1 is always derived as
/// p1·(v1 + p2) so the two branches meet at v1.
struct TractionParams {
    double p1_kn = 0.0;
    double q1 = 0.0;  // kN·(m/s), derived
    double p2_mps = 0.0;
    double v1_mps = 0.0;
};

/// Braking force magnitude, same two-branch shape as traction.
struct BrakingParams {
    double p3_kn = 0.0;
    double q2 = 0.0;  // kN·(m/s), derived
    double p4_mps = 0.0;
    double v2_mps = 0.0;
};

/// Davis running resistance lambda1·v² + lambda2·v + lambda3.
struct ResistanceParams {
    double lambda1 = 0.0;  // kN/(m/s)^2
    double lambda2 = 0.0;  // kN/(m/s)
    double lambda3 = 0.0;  // kN
};

/**
 * @brief Complete physical description of one train.
 *
 * beta1 converts electrical to mechanical power (traction), beta2 converts
 * mechanical braking power back to electrical, and beta3 is the fraction of
 * fed-back power other trains can reuse.  gravity_component_kn is the fixed
 * along-track component of gravity (0 on a flat line).
 */
struct TrainPhysics {
    double mass_kg = 0.0;
    TractionParams traction;
    BrakingParams braking;
    ResistanceParams resistance;
    double beta1 = 1.0;
    double beta2 = 1.0;
    double beta3 = 1.0;
    double gravity_component_kn = 0.0;

    /// Repository default parameter set (matches data/default_physics.json).
    static TrainPhysics defaults();

    /// Re-derive q1/q2 from the plateau values and corner speeds, and check
    /// the remaining invariants.  Called by every loader.
    void normalize_and_validate();
};

double traction_force_kn(double v_mps, const TractionParams& tp);
double braking_force_kn(double v_mps, const BrakingParams& bp);
double resistance_force_kn(double v_mps, const ResistanceParams& rp);

/// Distances of the three motion phases for one inter-station run.  If the
/// commanded speed does not fit the segment, cruise_speed_mps holds the
/// demoted (triangular-profile) peak and demoted is set.
struct PhasePlan {
    double accel_distance_m = 0.0;
    double cruise_distance_m = 0.0;
    double brake_distance_m = 0.0;
    double cruise_speed_mps = 0.0;
    bool demoted = false;
};

/// Integrate the acceleration and braking phases at the given step size and
/// lay out the run.  Throws ValidationError if distance cannot accommodate
/// even a minimal speed triangle.
PhasePlan plan_profile(double distance_m, double cruise_mps,
                       const TrainPhysics& phys, double dt_s);

enum class Phase : std::uint8_t {
    dwelling,
    accelerating,
    cruising,
    braking,
    finished,
};

enum class Direction : std::uint8_t { up, down };

/// Simulation-clock times at which the train last entered each phase;
/// negative means "has not happened yet".
struct PhaseTimestamps {
    double accel_start_s = -1.0;
    double cruise_start_s = -1.0;
    double brake_start_s = -1.0;
    double dwell_start_s = -1.0;
};

struct TrainState {
    int train_id = 0;
    Direction direction = Direction::up;
    int segment_index = 0;
    double position_in_segment_m = 0.0;
    double speed_mps = 0.0;
    Phase phase = Phase::dwelling;
    double dwell_remaining_s = 0.0;
    double commanded_cruise_mps = 0.0;
    double commanded_next_dwell_s = 0.0;
    PhaseTimestamps stamps;
};

/// Everything step_train needs besides the state itself.  now_s is the
/// simulation clock at the START of the step being taken; the step covers
/// [now_s, now_s + dt_s].
struct StepContext {
    double segment_distance_m = 0.0;
    double speed_limit_mps = 0.0;
    double now_s = 0.0;
    double dt_s = 0.0;
};

/// One explicit-Euler step of a moving train (phase must be accelerating,
/// cruising, or braking).  Position advances with the pre-step speed; speed
/// follows the net phase force; arrival clamps to the platform.  A cruising
/// train that would cross the braking mark this step starts braking at the
/// step's beginning instead (stamped with the step START time); all other
/// transitions are stamped with the step end, now_s + dt.
TrainState step_train(const TrainState& ts, const TrainPhysics& phys,
                      const PhasePlan& plan, const StepContext& ctx);

/**
 * @brief Per-phase electrical energy integrator for a single train's run.
 *
 * Trapezoid rule along each step's governing phase, with the two boundary
 * steps split sub-dt: the step that caps at the commanded speed charges the
 * pre-cap fraction as acceleration and the rest as cruising, and the step
 * on which the early-brake trigger fires credits the fraction spent
 * reaching the mark to cruising.  This keeps every phase bucket within a
 * fraction of a percent of a fine-step integration despite dt-sized steps.
 * Values are kJ (kW·s); traction/cruise include the 1/beta1 conversion,
 * braking includes beta2.
 */
struct PhaseEnergyMeter {
    double accel_kj = 0.0;
    double cruise_kj = 0.0;
    double brake_kj = 0.0;

    void accumulate(const TrainState& before, const TrainState& after,
                    const TrainPhysics& phys, const PhasePlan& plan,
                    const StepContext& ctx);
};

/// Outcome of driving one train over one segment in isolation.
struct SegmentRunResult {
    double traversal_s = 0.0;
    double accel_energy_kwh = 0.0;
    double cruise_energy_kwh = 0.0;
    double brake_energy_kwh = 0.0;
    PhasePlan plan;
    long steps = 0;
};

/// Plan and execute a full stop-to-stop run (no dwell) at the given step
/// size, metering per-phase energy along the way.
SegmentRunResult run_segment(double distance_m, double cruise_mps,
                             const TrainPhysics& phys, double dt_s);

/// Electrical power drawn from the grid right now, kW.  Accelerating trains
/// draw traction force times speed over beta1; cruising trains draw the
/// power needed to balance running resistance; others draw nothing.
double traction_power_kw(const TrainState& ts, const TrainPhysics& phys);

/// Electrical power fed back by the brakes right now, kW (magnitude).
double braking_power_kw(const TrainState& ts, const TrainPhysics& phys);

}  // namespace metrosim
