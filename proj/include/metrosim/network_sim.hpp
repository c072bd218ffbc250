#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "metrosim/dynamics.hpp"
#include "metrosim/line_data.hpp"

namespace metrosim {

struct FleetConfig {
    int num_trains = 20;
    double headway_s = 120.0;
    int trains_up = 10;
    int trains_down = 10;

    void validate() const;
};

enum class DisturbanceKind : std::uint8_t { uniform, truncated_exponential };

struct DisturbanceConfig {
    double probability_per_stop = 0.3;
    double max_extra_dwell_s = 30.0;
    DisturbanceKind distribution = DisturbanceKind::uniform;
    std::uint64_t seed = 0;

    void validate() const;
};

/// One stochastic extra-dwell draw.  Uses hand-rolled transforms over the
/// raw engine output so the stream is identical on every platform (the
/// standard-library distributions are implementation-defined).
double sample_disturbance(const DisturbanceConfig& dc, std::mt19937_64& rng);

/**
 * @brief Cumulative network energy accounts, kept exactly self-consistent.
 *
 * All sums sample instantaneous fleet power at the start of each step and
 * add power·dt/3600 termwise, so the invariants E_R ≤ E_T and
 * E_R ≤ regen_cap hold bitwise (rounding is monotone and the regen term is
 * the pointwise min).  regen_cap accumulates beta3·P_B with the identical
 * expression shape used inside the min, making the braking-side bound
 * exact as well; it tracks beta3·e_brake_gross_kwh to rounding.
 * overlap is counted in whole steps (int64) so reward telescoping can be
 * bit-exact; overlap_seconds is derived, never accumulated.
 */
struct EnergyLedger {
    double e_traction_kwh = 0.0;     // time integral of sum of traction power
    double e_brake_gross_kwh = 0.0;  // time integral of sum of braking power
    double e_regen_kwh = 0.0;        // integral of min(P_T, beta3*P_B)
    double e_regen_cap_kwh = 0.0;    // integral of beta3*P_B, termwise
    std::int64_t overlap_steps = 0;
    double dt_s = 0.0;

    double e_total_kwh() const { return e_traction_kwh - e_regen_kwh; }
    double overlap_seconds() const {
        return static_cast<double>(overlap_steps) * dt_s;
    }
};

/// Emitted at the instant a train's dwell expires: the train is held at the
/// platform until a command for its upcoming segment arrives.
struct DecisionRequest {
    int train_id = 0;
    int next_segment_index = 0;
    double time_s = 0.0;
};

/// What to do when a trailing train's line position passes its leader's.
enum class OvertakePolicy : std::uint8_t {
    count,   ///< record the event and keep simulating
    reject,  ///< throw; used where order inversion must be impossible
};

struct SimParams {
    double dt_s = 0.1;
    OvertakePolicy overtake_policy = OvertakePolicy::count;
};

/**
 * @brief The whole line: a fleet of trains time-stepped in lockstep over a
 * shared electrical network.
 *
 * Up-direction trains run the dataset as given, down-direction trains run
 * the reversed dataset on a separate track; the two groups interact only
 * through power aggregation.  The world advances one dt per advance() call
 * and pauses whenever trains need commands: every pending DecisionRequest
 * must be answered via apply_command() before time can move again.
 */
class World {
public:
    World(const LineDataset& line, const TrainPhysics& phys,
          const FleetConfig& fleet, const DisturbanceConfig& disturbance,
          const SimParams& params = {});

    /// Advance the clock one dt: integrate energy from the states at the
    /// step start, move every active train, tick dwell timers, and collect
    /// the trains (in id order) whose dwell just expired.  Throws if called
    /// with unanswered decisions or after completion.
    std::vector<DecisionRequest> advance();

    /// Keep advancing until at least one decision is pending or the run is
    /// complete; returns the pending requests (empty when done).
    std::vector<DecisionRequest> advance_until_decision();

    /// Answer one DecisionRequest: dispatch the train onto its next segment
    /// with the given cruise speed, remembering the dwell to apply at the
    /// next station.  The departure is stamped at the current clock.
    void apply_command(int train_id, double cruise_mps, double dwell_s);

    bool done() const;

    /// Simulation clock at the moment the last train reached its terminal.
    /// Throws NotFinishedError before completion.
    double total_time() const;

    const EnergyLedger& ledger() const { return ledger_; }
    const std::vector<DecisionRequest>& pending_decisions() const {
        return pending_;
    }
    const std::vector<TrainState>& train_states() const { return states_; }
    const LineDataset& dataset_for(Direction d) const {
        return d == Direction::up ? line_up_ : line_down_;
    }
    double line_length_m() const { return line_length_m_; }
    double speed_limit_mps() const { return speed_limit_mps_; }
    double dt() const { return params_.dt_s; }
    double now_s() const { return static_cast<double>(step_count_) * params_.dt_s; }
    std::int64_t step_count() const { return step_count_; }
    int num_trains() const { return static_cast<int>(states_.size()); }
    std::int64_t overtake_events() const { return overtake_events_; }

    /// Per-train departure clocks, one entry per served command, seconds.
    const std::vector<double>& departures_of(int train_id) const {
        return departures_[static_cast<std::size_t>(train_id)];
    }
    const std::vector<double>& arrivals_of(int train_id) const {
        return arrivals_[static_cast<std::size_t>(train_id)];
    }

    /// Nominal (dataset) commands for a train's upcoming segment; used by
    /// the no-action baseline.
    SegmentRecord nominal_segment(int train_id, int segment_index) const;

    /// Distance travelled along the train's own route, metres from its
    /// origin platform (= full route length once finished).
    double linear_position_m(int train_id) const;

    /// Stream one CSV row per step (t, P_T, P_B, P_R, overlap flag) to out;
    /// pass nullptr to stop.  A header row is written immediately.
    void set_trace_stream(std::ostream* out);

private:
    struct TrainRecord {
        PhasePlan plan;
        std::int64_t dwell_steps_left = 0;
        bool departed_once = false;
        std::int64_t finish_step = -1;
    };

    const LineDataset& line_of(Direction d) const {
        return d == Direction::up ? line_up_ : line_down_;
    }
    void check_overtaking();
    std::int64_t quantize_dwell(double seconds) const;

    LineDataset line_up_;
    LineDataset line_down_;
    TrainPhysics phys_;
    FleetConfig fleet_;
    DisturbanceConfig disturbance_;
    SimParams params_;
    std::mt19937_64 rng_;
    double speed_limit_mps_ = 0.0;
    double line_length_m_ = 0.0;

    std::vector<TrainState> states_;
    std::vector<TrainRecord> records_;
    std::vector<DecisionRequest> pending_;
    std::vector<std::vector<double>> departures_;
    std::vector<std::vector<double>> arrivals_;
    EnergyLedger ledger_;
    std::int64_t step_count_ = 0;
    std::int64_t overtake_events_ = 0;
    std::ostream* trace_ = nullptr;
};

}  // namespace metrosim
