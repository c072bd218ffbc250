#include "metrosim/network_sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

#include "metrosim/errors.hpp"

namespace metrosim {

namespace {

// Shortest round-trip formatting, same convention as the dataset files.
std::string fmt(double value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

}  // namespace

void FleetConfig::validate() const {
    if (num_trains < 0) {
        throw ValidationError("fleet: num_trains must be >= 0");
    }
    if (trains_up < 0 || trains_down < 0) {
        throw ValidationError("fleet: per-direction counts must be >= 0");
    }
    if (trains_up + trains_down != num_trains) {
        throw ValidationError(
            "fleet: trains_up + trains_down must equal num_trains (" +
            std::to_string(trains_up) + " + " + std::to_string(trains_down) +
            " != " + std::to_string(num_trains) + ")");
    }
    if (!(headway_s > 0.0) || !std::isfinite(headway_s)) {
        throw ValidationError("fleet: headway_s must be positive and finite");
    }
}

void DisturbanceConfig::validate() const {
    if (!(probability_per_stop >= 0.0) || !(probability_per_stop <= 1.0)) {
        throw ValidationError(
            "disturbance: probability_per_stop must lie in [0, 1]");
    }
    if (!(max_extra_dwell_s >= 0.0) || !std::isfinite(max_extra_dwell_s)) {
        throw ValidationError(
            "disturbance: max_extra_dwell_s must be >= 0 and finite");
    }
}

double sample_disturbance(const DisturbanceConfig& dc, std::mt19937_64& rng) {
    // Raw 53-bit mantissa draw; identical on every conforming platform,
    // unlike the standard library's distribution templates.
    const auto u01 = [&rng] {
        return static_cast<double>(rng() >> 11) * 0x1.0p-53;
    };
    const double gate = u01();
    if (gate >= dc.probability_per_stop) return 0.0;
    const double u = u01();
    switch (dc.distribution) {
        case DisturbanceKind::uniform:
            return u * dc.max_extra_dwell_s;
        case DisturbanceKind::truncated_exponential: {
            // Inverse-CDF sample of Exp(tau) conditioned on [0, max], with
            // the scale pinned at a third of the cap so the mass is front
            // loaded the way short operational hiccups are.
            const double tau = dc.max_extra_dwell_s / 3.0;
            if (!(tau > 0.0)) return 0.0;
            const double span = 1.0 - std::exp(-dc.max_extra_dwell_s / tau);
            return -tau * std::log1p(-u * span);
        }
    }
    throw ValidationError("disturbance: unknown distribution");
}

World::World(const LineDataset& line, const TrainPhysics& phys,
             const FleetConfig& fleet, const DisturbanceConfig& disturbance,
             const SimParams& params)
    : line_up_(line),
      line_down_(line.reversed()),
      phys_(phys),
      fleet_(fleet),
      disturbance_(disturbance),
      params_(params),
      rng_(disturbance.seed) {
    phys_.normalize_and_validate();
    fleet_.validate();
    disturbance_.validate();
    if (!(params_.dt_s > 0.0) || !std::isfinite(params_.dt_s)) {
        throw ValidationError("sim: dt_s must be positive and finite");
    }

    speed_limit_mps_ = kmh_to_mps(line_up_.speed_limit_kmh());
    line_length_m_ = line_up_.total_distance_km() * 1000.0;
    ledger_.dt_s = params_.dt_s;

    const std::int64_t headway_steps = quantize_dwell(fleet_.headway_s);
    const int n = fleet_.num_trains;
    states_.resize(static_cast<std::size_t>(n));
    records_.resize(static_cast<std::size_t>(n));
    departures_.resize(static_cast<std::size_t>(n));
    arrivals_.resize(static_cast<std::size_t>(n));
    for (int id = 0; id < n; ++id) {
        const bool up = id < fleet_.trains_up;
        const int slot = up ? id : id - fleet_.trains_up;
        TrainState& st = states_[static_cast<std::size_t>(id)];
        st.train_id = id;
        st.direction = up ? Direction::up : Direction::down;
        st.segment_index = 0;
        st.position_in_segment_m = 0.0;
        st.speed_mps = 0.0;
        st.phase = Phase::dwelling;
        st.stamps.dwell_start_s = 0.0;

        TrainRecord& rec = records_[static_cast<std::size_t>(id)];
        rec.dwell_steps_left = headway_steps * slot;
        st.dwell_remaining_s =
            static_cast<double>(rec.dwell_steps_left) * params_.dt_s;
        if (rec.dwell_steps_left == 0) {
            pending_.push_back(DecisionRequest{id, 0, 0.0});
        }
    }
}

std::int64_t World::quantize_dwell(double seconds) const {
    if (seconds <= 0.0) return 0;
    // Round up to the next whole step, forgiving representation error so
    // grid-aligned durations (25 s at dt 0.1) land on their exact count.
    return static_cast<std::int64_t>(
        std::ceil(seconds / params_.dt_s - 1e-9));
}

bool World::done() const {
    return std::all_of(states_.begin(), states_.end(), [](const TrainState& s) {
        return s.phase == Phase::finished;
    });
}

double World::total_time() const {
    if (!done()) {
        throw NotFinishedError(
            "total_time requested before every train reached its terminal");
    }
    std::int64_t last = 0;
    for (const auto& rec : records_) last = std::max(last, rec.finish_step);
    return static_cast<double>(last) * params_.dt_s;
}

double World::linear_position_m(int idx) const {
    const TrainState& st = states_[static_cast<std::size_t>(idx)];
    if (!records_[static_cast<std::size_t>(idx)].departed_once) return 0.0;
    const auto& segs = line_of(st.direction).segments();
    double ahead = 0.0;
    for (int i = 0; i < st.segment_index; ++i) {
        ahead += segs[static_cast<std::size_t>(i)].distance_km * 1000.0;
    }
    return ahead + st.position_in_segment_m;
}

void World::check_overtaking() {
    const auto scan = [this](int first, int count) {
        for (int k = 1; k < count; ++k) {
            const int leader = first + k - 1;
            const int trailer = first + k;
            if (linear_position_m(trailer) >
                linear_position_m(leader) + 1e-9) {
                ++overtake_events_;
                if (params_.overtake_policy == OvertakePolicy::reject) {
                    throw ValidationError(
                        "overtaking: train " + std::to_string(trailer) +
                        " passed train " + std::to_string(leader) + " at t=" +
                        fmt(now_s()) + " s");
                }
            }
        }
    };
    scan(0, fleet_.trains_up);
    scan(fleet_.trains_up, fleet_.trains_down);
}

SegmentRecord World::nominal_segment(int train_id, int segment_index) const {
    const TrainState& st = states_.at(static_cast<std::size_t>(train_id));
    const auto& segs = line_of(st.direction).segments();
    return segs.at(static_cast<std::size_t>(segment_index));
}

void World::set_trace_stream(std::ostream* out) {
    trace_ = out;
    if (trace_ != nullptr) {
        *trace_ << "t_s,p_traction_kw,p_braking_kw,p_regen_kw,overlap\n";
    }
}

std::vector<DecisionRequest> World::advance() {
    if (!pending_.empty()) {
        throw ValidationError(
            "advance called with " + std::to_string(pending_.size()) +
            " unanswered decision request(s)");
    }
    if (done()) {
        throw ValidationError("advance called on a completed simulation");
    }

    // Electrical bookkeeping samples the fleet at the step start; the regen
    // term is the pointwise min, so every ledger bound stays exact no
    // matter how the sums round.
    const double dt = params_.dt_s;
    double p_traction = 0.0;
    double p_braking = 0.0;
    for (const TrainState& st : states_) {
        p_traction += traction_power_kw(st, phys_);
        p_braking += braking_power_kw(st, phys_);
    }
    const double p_cap = phys_.beta3 * p_braking;
    const double p_regen = std::min(p_traction, p_cap);
    const bool overlap = p_traction > 0.0 && p_braking > 0.0;
    const auto kwh = [dt](double kw) { return kw * dt / 3600.0; };
    ledger_.e_traction_kwh += kwh(p_traction);
    ledger_.e_brake_gross_kwh += kwh(p_braking);
    ledger_.e_regen_kwh += kwh(p_regen);
    ledger_.e_regen_cap_kwh += kwh(p_cap);
    if (overlap) ++ledger_.overlap_steps;
    if (trace_ != nullptr) {
        *trace_ << fmt(now_s()) << ',' << fmt(p_traction) << ','
                << fmt(p_braking) << ',' << fmt(p_regen) << ','
                << (overlap ? 1 : 0) << '\n';
    }

    // Trains already holding at a platform tick their timers this step;
    // arrivals made during this step start their dwell on the next one.
    std::vector<int> holding;
    for (const TrainState& st : states_) {
        if (st.phase == Phase::dwelling) holding.push_back(st.train_id);
    }

    const double t_end = static_cast<double>(step_count_ + 1) * dt;
    for (TrainState& st : states_) {
        if (st.phase == Phase::dwelling || st.phase == Phase::finished) {
            continue;
        }
        TrainRecord& rec = records_[static_cast<std::size_t>(st.train_id)];
        const auto& segs = line_of(st.direction).segments();
        const SegmentRecord& seg =
            segs[static_cast<std::size_t>(st.segment_index)];
        StepContext ctx;
        ctx.segment_distance_m = seg.distance_km * 1000.0;
        ctx.speed_limit_mps = speed_limit_mps_;
        ctx.now_s = now_s();
        ctx.dt_s = dt;
        st = step_train(st, phys_, rec.plan, ctx);
        if (st.phase != Phase::dwelling) continue;

        arrivals_[static_cast<std::size_t>(st.train_id)].push_back(t_end);
        const bool terminal =
            st.segment_index + 1 == static_cast<int>(segs.size());
        if (terminal) {
            st.phase = Phase::finished;
            st.dwell_remaining_s = 0.0;
            rec.finish_step = step_count_ + 1;
        } else {
            const double extra = sample_disturbance(disturbance_, rng_);
            rec.dwell_steps_left =
                quantize_dwell(st.commanded_next_dwell_s + extra);
            st.dwell_remaining_s =
                static_cast<double>(rec.dwell_steps_left) * dt;
        }
    }

    ++step_count_;
    for (int id : holding) {
        TrainState& st = states_[static_cast<std::size_t>(id)];
        TrainRecord& rec = records_[static_cast<std::size_t>(id)];
        if (rec.dwell_steps_left > 0) --rec.dwell_steps_left;
        st.dwell_remaining_s =
            static_cast<double>(rec.dwell_steps_left) * dt;
        if (rec.dwell_steps_left == 0) {
            const int next_segment =
                rec.departed_once ? st.segment_index + 1 : 0;
            pending_.push_back(DecisionRequest{id, next_segment, now_s()});
        }
    }
    check_overtaking();
    return pending_;
}

std::vector<DecisionRequest> World::advance_until_decision() {
    while (pending_.empty() && !done()) advance();
    return pending_;
}

void World::apply_command(int train_id, double cruise_mps, double dwell_s) {
    const auto it = std::find_if(
        pending_.begin(), pending_.end(),
        [train_id](const DecisionRequest& r) { return r.train_id == train_id; });
    if (it == pending_.end()) {
        throw ValidationError("apply_command: train " +
                              std::to_string(train_id) +
                              " has no pending decision");
    }
    if (!(cruise_mps > 0.0) || cruise_mps > speed_limit_mps_ + 1e-12) {
        throw ValidationError(
            "apply_command: cruise speed " + fmt(mps_to_kmh(cruise_mps)) +
            " km/h is outside (0, " + fmt(line_up_.speed_limit_kmh()) + "]");
    }
    if (!(dwell_s >= 0.0) || !std::isfinite(dwell_s)) {
        throw ValidationError("apply_command: dwell must be >= 0 and finite");
    }

    const int next_segment = it->next_segment_index;
    TrainState& st = states_[static_cast<std::size_t>(train_id)];
    TrainRecord& rec = records_[static_cast<std::size_t>(train_id)];
    const auto& segs = line_of(st.direction).segments();
    const SegmentRecord& seg = segs.at(static_cast<std::size_t>(next_segment));

    rec.plan = plan_profile(seg.distance_km * 1000.0, cruise_mps, phys_,
                            params_.dt_s);
    rec.departed_once = true;
    st.segment_index = next_segment;
    st.position_in_segment_m = 0.0;
    st.speed_mps = 0.0;
    st.phase = Phase::accelerating;
    st.commanded_cruise_mps = cruise_mps;
    st.commanded_next_dwell_s = dwell_s;
    st.stamps.accel_start_s = now_s();
    departures_[static_cast<std::size_t>(train_id)].push_back(now_s());
    pending_.erase(it);
}

}  // namespace metrosim
