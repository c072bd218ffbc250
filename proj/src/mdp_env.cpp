#include "metrosim/mdp_env.hpp"

#include <algorithm>
#include <cmath>

#include "metrosim/errors.hpp"

namespace metrosim {

void ActionBounds::validate() const {
    if (!(cruise_min_kmh > 0.0) || !(cruise_max_kmh >= cruise_min_kmh)) {
        throw ValidationError(
            "bounds: cruise range must satisfy 0 < min <= max");
    }
    if (!(dwell_min_s >= 0.0) || !(dwell_max_s >= dwell_min_s)) {
        throw ValidationError(
            "bounds: dwell range must satisfy 0 <= min <= max");
    }
}

void EnvConfig::validate() const {
    fleet.validate();
    disturbance.validate();
    bounds.validate();
    if (reward_scale_steps <= 0) {
        throw ValidationError("env: reward_scale_steps must be positive");
    }
    if (!(dt_s > 0.0) || !std::isfinite(dt_s)) {
        throw ValidationError("env: dt_s must be positive and finite");
    }
    if (!(obs_horizon_s > 0.0) || !std::isfinite(obs_horizon_s)) {
        throw ValidationError("env: obs_horizon_s must be positive and finite");
    }
}

MetroEnv::MetroEnv(const LineDataset& line, const TrainPhysics& phys,
                   const EnvConfig& config)
    : line_(line), phys_(phys), config_(config) {
    config_.validate();
    if (kmh_to_mps(config_.bounds.cruise_max_kmh) >
        kmh_to_mps(line_.speed_limit_kmh()) + 1e-12) {
        throw ValidationError(
            "env: cruise_max_kmh exceeds the line speed limit");
    }
}

Observation MetroEnv::reset(std::uint64_t seed) {
    DisturbanceConfig dc = config_.disturbance;
    dc.seed = seed;
    SimParams params;
    params.dt_s = config_.dt_s;
    params.overtake_policy = config_.overtake_policy;
    world_.emplace(line_, phys_, config_.fleet, dc, params);
    if (trace_stream_ != nullptr) world_->set_trace_stream(trace_stream_);
    log_.clear();
    reward_sum_ = 0.0;
    return build_observation();
}

void MetroEnv::set_trace_stream(std::ostream* out) {
    trace_stream_ = out;
    if (world_.has_value()) world_->set_trace_stream(out);
}

bool MetroEnv::done() const {
    return world_.has_value() && world_->done();
}

int MetroEnv::observation_size() const {
    return config_.fleet.num_trains * kFeaturesPerTrain;
}

const World& MetroEnv::world() const {
    if (!world_.has_value()) {
        throw ValidationError("env: reset() has not been called");
    }
    return *world_;
}

std::pair<double, double> MetroEnv::map_action(
    const std::array<double, 2>& raw) const {
    const auto squash = [](double x) { return std::clamp(x, -1.0, 1.0); };
    const ActionBounds& b = config_.bounds;
    const double cruise_kmh =
        b.cruise_min_kmh +
        (squash(raw[0]) + 1.0) / 2.0 * (b.cruise_max_kmh - b.cruise_min_kmh);
    const double dwell_s =
        b.dwell_min_s +
        (squash(raw[1]) + 1.0) / 2.0 * (b.dwell_max_s - b.dwell_min_s);
    return {kmh_to_mps(cruise_kmh), dwell_s};
}

double MetroEnv::serve(int train_id, double cruise_mps, double dwell_s,
                       double cruise_cmd_kmh, double dwell_cmd_s) {
    World& w = *world_;
    const DecisionRequest req = w.pending_decisions().front();
    const std::int64_t before = w.ledger().overlap_steps;
    w.apply_command(train_id, cruise_mps, dwell_s);
    if (w.pending_decisions().empty()) w.advance_until_decision();
    const std::int64_t gained = w.ledger().overlap_steps - before;
    const double reward = static_cast<double>(gained) /
                          static_cast<double>(config_.reward_scale_steps);
    log_.push_back(DecisionLogEntry{req.time_s, train_id,
                                    req.next_segment_index, cruise_cmd_kmh,
                                    dwell_cmd_s, reward});
    reward_sum_ += reward;
    return reward;
}

StepResult MetroEnv::step(const std::array<double, 2>& raw_action) {
    if (!world_.has_value()) {
        throw ValidationError("env: step() before reset()");
    }
    if (world_->done()) {
        throw ValidationError("env: step() after the episode ended");
    }
    const int train_id = world_->pending_decisions().front().train_id;
    const auto [cruise_mps, dwell_s] = map_action(raw_action);
    const double reward =
        serve(train_id, cruise_mps, dwell_s, mps_to_kmh(cruise_mps), dwell_s);
    StepResult out;
    out.reward = reward;
    out.done = world_->done();
    out.observation = build_observation();
    return out;
}

Observation MetroEnv::build_observation() const {
    const World& w = *world_;
    const double horizon = config_.obs_horizon_s;
    const double length_m = w.line_length_m();
    const auto norm_time = [horizon](double t) {
        if (t < 0.0) return -1.0;
        return 2.0 * std::min(t / horizon, 1.0) - 1.0;
    };

    Observation obs;
    obs.features.resize(static_cast<std::size_t>(w.num_trains()) *
                        kFeaturesPerTrain);
    for (int id = 0; id < w.num_trains(); ++id) {
        const TrainState& st = w.train_states()[static_cast<std::size_t>(id)];
        const auto& segs = w.dataset_for(st.direction).segments();
        const double seg_len_m =
            segs[static_cast<std::size_t>(st.segment_index)].distance_km *
            1000.0;
        const double to_next_m =
            st.phase == Phase::finished
                ? 0.0
                : seg_len_m - st.position_in_segment_m;
        double* row =
            obs.features.data() +
            static_cast<std::size_t>(id) * kFeaturesPerTrain;
        row[0] = norm_time(st.stamps.accel_start_s);
        row[1] = norm_time(st.stamps.cruise_start_s);
        row[2] = norm_time(st.stamps.brake_start_s);
        row[3] = norm_time(st.stamps.dwell_start_s);
        row[4] = w.linear_position_m(id) / length_m;
        row[5] = to_next_m / length_m;
        row[6] = st.direction == Direction::up ? 1.0 : -1.0;
        row[7] = st.phase == Phase::finished ? 1.0 : 0.0;
    }
    obs.deciding_train_id = w.pending_decisions().empty()
                                ? -1
                                : w.pending_decisions().front().train_id;
    return obs;
}

EpisodeSummary MetroEnv::summary() const {
    if (!world_.has_value() || !world_->done()) {
        throw NotFinishedError(
            "episode summary requested before the episode ended");
    }
    EpisodeSummary s;
    s.ledger = world_->ledger();
    s.total_time_s = world_->total_time();
    s.overtake_events = world_->overtake_events();
    s.decisions = static_cast<int>(log_.size());
    s.reward_sum = reward_sum_;
    s.log = log_;
    return s;
}

EpisodeSummary MetroEnv::run_baseline(std::uint64_t seed) {
    reset(seed);
    while (!world_->done()) {
        const DecisionRequest req = world_->pending_decisions().front();
        const SegmentRecord seg =
            world_->nominal_segment(req.train_id, req.next_segment_index);
        serve(req.train_id, kmh_to_mps(seg.cruise_kmh), seg.dwell_s,
              seg.cruise_kmh, seg.dwell_s);
    }
    return summary();
}

}  // namespace metrosim
