#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "metrosim/network_sim.hpp"

namespace metrosim {

/// Per-decision command ranges the two raw action channels map onto.
struct ActionBounds {
    double cruise_min_kmh = 40.0;
    double cruise_max_kmh = 80.0;
    double dwell_min_s = 15.0;
    double dwell_max_s = 60.0;

    void validate() const;
};

/// Everything that parameterises an episode besides the line and the
/// physics.  The disturbance seed is the default; reset() can override it.
struct EnvConfig {
    FleetConfig fleet;
    DisturbanceConfig disturbance;
    ActionBounds bounds;
    std::int64_t reward_scale_steps = 1024;  ///< overlap steps per unit reward
    double dt_s = 0.1;
    double obs_horizon_s = 5000.0;  ///< clock normaliser for time features
    OvertakePolicy overtake_policy = OvertakePolicy::count;

    void validate() const;

    /// Seconds of overlap per unit reward (= reward_scale_steps * dt_s).
    double reward_scale_s() const {
        return static_cast<double>(reward_scale_steps) * dt_s;
    }
};

/// Fleet snapshot handed to the policy: one row of kFeaturesPerTrain per
/// train, flattened row-major, every entry in [-1, 1].  The train whose
/// command is being requested is carried alongside as deciding_train_id
/// (-1 on the terminal observation).
struct Observation {
    std::vector<double> features;
    int deciding_train_id = -1;
};

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool done = false;
};

/// One served decision, as recorded in the episode log.
struct DecisionLogEntry {
    double time_s = 0.0;
    int train_id = 0;
    int segment_index = 0;
    double cruise_cmd_kmh = 0.0;
    double dwell_cmd_s = 0.0;
    double reward = 0.0;
};

/// End-of-episode accounting: the energy ledger plus scheduling outcomes.
struct EpisodeSummary {
    EnergyLedger ledger;
    double total_time_s = 0.0;
    std::int64_t overtake_events = 0;
    int decisions = 0;
    double reward_sum = 0.0;
    std::vector<DecisionLogEntry> log;
};

/**
 * @brief Decision-process wrapper around World: one step per command.
 *
 * Each step answers the earliest pending DecisionRequest with a mapped
 * action, then lets the clock run until the next request (or completion).
 * The reward is the regenerative-overlap time gained in between, counted
 * in whole steps and scaled by 1/reward_scale_steps — a telescoping sum,
 * so episode reward times reward_scale_s() reproduces the ledger's final
 * overlap_seconds() bit-for-bit.
 */
class MetroEnv {
public:
    static constexpr int kFeaturesPerTrain = 8;

    MetroEnv(const LineDataset& line, const TrainPhysics& phys,
             const EnvConfig& config);

    /// Start a fresh episode with the given disturbance seed and return the
    /// observation for the first pending decision.
    Observation reset(std::uint64_t seed);

    /// Serve the pending decision with a raw policy action (each channel
    /// clamped to [-1, 1] and mapped affinely onto the command bounds).
    /// Throws if the episode is over.
    StepResult step(const std::array<double, 2>& raw_action);

    /// Raw action -> (cruise m/s, dwell s) under this env's bounds.
    std::pair<double, double> map_action(const std::array<double, 2>& raw) const;

    bool done() const;
    int observation_size() const;
    int num_trains() const { return config_.fleet.num_trains; }
    const EnvConfig& config() const { return config_; }
    const World& world() const;

    /// Stream per-step power rows (see World::set_trace_stream) for every
    /// episode from the next reset() on; nullptr stops tracing.
    void set_trace_stream(std::ostream* out);

    /// Episode accounting; call once done. Throws NotFinishedError early.
    EpisodeSummary summary() const;

    /// Run one whole episode taking no actions: every decision is served
    /// with the dataset's own cruise/dwell for that segment.
    EpisodeSummary run_baseline(std::uint64_t seed);

private:
    Observation build_observation() const;
    double serve(int train_id, double cruise_mps, double dwell_s,
                 double cruise_cmd_kmh, double dwell_cmd_s);

    LineDataset line_;
    TrainPhysics phys_;
    EnvConfig config_;
    std::optional<World> world_;
    std::vector<DecisionLogEntry> log_;
    double reward_sum_ = 0.0;
    std::ostream* trace_stream_ = nullptr;
};

}  // namespace metrosim
