#include "metrosim/ppo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "metrosim/checkpoint.hpp"
#include "metrosim/errors.hpp"
#include "metrosim/rng.hpp"

namespace metrosim {

namespace {

// Stream tag for per-episode disturbance seeds (see rng.hpp mix_seed).
constexpr std::uint64_t kEpisodeStream = 0x45505349u;  // 'EPSI'

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) /
           static_cast<double>(xs.size());
}

MetricStats stats_of(const std::vector<double>& xs) {
    MetricStats s;
    if (xs.empty()) return s;
    s.mean = mean_of(xs);
    if (xs.size() > 1) {
        double acc = 0.0;
        for (double x : xs) acc += (x - s.mean) * (x - s.mean);
        s.stdev = std::sqrt(acc / static_cast<double>(xs.size() - 1));
    }
    return s;
}

}  // namespace

void PpoConfig::validate() const {
    if (n_steps <= 0) throw ValidationError("ppo: n_steps must be positive");
    if (batch_size <= 0 || batch_size > n_steps) {
        throw ValidationError("ppo: batch_size must lie in [1, n_steps]");
    }
    if (!(gamma > 0.0) || gamma > 1.0) {
        throw ValidationError("ppo: gamma must lie in (0, 1]");
    }
    if (!(clip_range > 0.0) || !(clip_range < 1.0)) {
        throw ValidationError("ppo: clip_range must lie in (0, 1)");
    }
    if (!(vf_coef >= 0.0) || !(ent_coef >= 0.0)) {
        throw ValidationError("ppo: loss coefficients must be >= 0");
    }
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ValidationError("ppo: learning_rate must be >= 0 and finite");
    }
    if (epochs_per_update <= 0) {
        throw ValidationError("ppo: epochs_per_update must be positive");
    }
    if (total_iterations <= 0) {
        throw ValidationError("ppo: total_iterations must be positive");
    }
    if (hidden_size <= 0) {
        throw ValidationError("ppo: hidden_size must be positive");
    }
}

RolloutBuffer::RolloutBuffer(int capacity_, int obs_dim_)
    : capacity(capacity_), obs_dim(obs_dim_) {
    if (capacity <= 0 || obs_dim <= 0) {
        throw ValidationError(
            "rollout buffer: capacity and obs_dim must be positive");
    }
    observations.resize(static_cast<std::size_t>(capacity) * obs_dim);
    actions.resize(static_cast<std::size_t>(capacity));
    log_probs.resize(static_cast<std::size_t>(capacity));
    rewards.resize(static_cast<std::size_t>(capacity));
    values.resize(static_cast<std::size_t>(capacity));
    dones.resize(static_cast<std::size_t>(capacity));
}

void RolloutBuffer::push(const double* obs,
                         const std::array<double, 2>& action,
                         double log_prob, double reward, double value,
                         bool done) {
    if (full()) throw ValidationError("rollout buffer overflow");
    std::copy(obs, obs + obs_dim,
              observations.begin() + static_cast<std::size_t>(size) * obs_dim);
    actions[static_cast<std::size_t>(size)] = action;
    log_probs[static_cast<std::size_t>(size)] = log_prob;
    rewards[static_cast<std::size_t>(size)] = reward;
    values[static_cast<std::size_t>(size)] = value;
    dones[static_cast<std::size_t>(size)] = done ? 1 : 0;
    ++size;
}

void RolloutBuffer::clear() { size = 0; }

AdvantageResult compute_advantages(const RolloutBuffer& buffer,
                                   double bootstrap_value, double gamma) {
    if (!buffer.full()) {
        throw ValidationError("advantages requested from a partial buffer");
    }
    const int n = buffer.size;
    AdvantageResult out;
    out.advantages.resize(static_cast<std::size_t>(n));
    out.value_targets.resize(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
        const double next_value =
            t + 1 < n ? buffer.values[static_cast<std::size_t>(t + 1)]
                      : bootstrap_value;
        const double mask =
            buffer.dones[static_cast<std::size_t>(t)] != 0 ? 0.0 : 1.0;
        const double adv = buffer.rewards[static_cast<std::size_t>(t)] +
                           gamma * next_value * mask -
                           buffer.values[static_cast<std::size_t>(t)];
        out.advantages[static_cast<std::size_t>(t)] = adv;
        out.value_targets[static_cast<std::size_t>(t)] =
            adv + buffer.values[static_cast<std::size_t>(t)];
    }
    return out;
}

void normalize_advantages(std::vector<double>& advantages) {
    if (advantages.empty()) return;
    const double n = static_cast<double>(advantages.size());
    const double mean =
        std::accumulate(advantages.begin(), advantages.end(), 0.0) / n;
    double var = 0.0;
    for (double a : advantages) var += (a - mean) * (a - mean);
    var /= n;
    const double denom = std::sqrt(var) + 1e-8;
    for (double& a : advantages) a = (a - mean) / denom;
}

LossBreakdown ppo_losses(ActorCritic& nets, const std::vector<Sample>& batch,
                         const PpoConfig& cfg, bool accumulate_grads) {
    if (batch.empty()) throw ValidationError("ppo_losses: empty batch");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const double lo = 1.0 - cfg.clip_range;
    const double hi = 1.0 + cfg.clip_range;
    const int dim = nets.policy.output_size();

    double pg_sum = 0.0;
    double vf_sum = 0.0;
    for (const Sample& s : batch) {
        const std::vector<double>& mean_ref =
            nets.policy.forward(s.observation.data());
        std::array<double, 2> mean{mean_ref[0], mean_ref[1]};
        const double* log_std = nets.log_std.value.data();
        const double lp =
            gaussian_log_prob(s.action.data(), mean.data(), log_std, dim);
        const double ratio = std::exp(lp - s.old_log_prob);
        const double clipped = std::clamp(ratio, lo, hi);
        const double surr_free = ratio * s.advantage;
        const double surr_clip = clipped * s.advantage;
        const bool free_branch = surr_free <= surr_clip;
        pg_sum += free_branch ? surr_free : surr_clip;

        const double v = nets.value.forward(s.observation.data())[0];
        const double diff = v - s.value_target;
        vf_sum += diff * diff;

        if (accumulate_grads) {
            // d(total)/d(lp): only the un-clipped branch carries gradient
            // (when the clipped branch wins, the ratio sits outside the
            // band where clamp is constant).
            if (free_branch) {
                const double dlp = -inv_b * s.advantage * ratio;
                std::array<double, 2> dmean;
                for (int d = 0; d < dim; ++d) {
                    const double sigma = std::exp(log_std[d]);
                    const double z = (s.action[d] - mean[d]) / sigma;
                    dmean[d] = dlp * z / sigma;
                    nets.log_std.grad[d] += dlp * (z * z - 1.0);
                }
                nets.policy.backward(dmean.data());
            }
            const double dv = cfg.vf_coef * inv_b * 2.0 * diff;
            nets.value.backward(&dv);
        }
    }

    LossBreakdown out;
    out.policy = -pg_sum * inv_b;
    out.value = vf_sum * inv_b;
    const double half_log_2pi_e =
        0.5 * (1.0 + std::log(2.0 * std::numbers::pi));
    for (int d = 0; d < dim; ++d) {
        out.entropy -= nets.log_std.value[static_cast<std::size_t>(d)] +
                       half_log_2pi_e;
    }
    if (accumulate_grads) {
        for (int d = 0; d < dim; ++d) {
            nets.log_std.grad[static_cast<std::size_t>(d)] -= cfg.ent_coef;
        }
    }
    out.total = out.policy + cfg.vf_coef * out.value + cfg.ent_coef * out.entropy;
    return out;
}

PpoTrainer::PpoTrainer(MetroEnv env, const PpoConfig& cfg)
    : env_(std::move(env)),
      cfg_(cfg),
      nets_(env_.observation_size(), 2, cfg.hidden_size),
      opt_(nets_.parameters(), cfg.learning_rate),
      buffer_(cfg.n_steps, env_.observation_size()),
      rng_(mix_seed(cfg.seed, 1)) {
    cfg_.validate();
    nets_.init(mix_seed(cfg_.seed, 0));
}

std::vector<double> PpoTrainer::reset_for_new_episode() {
    const std::uint64_t ep_seed =
        mix_seed(cfg_.seed, kEpisodeStream + episode_counter_);
    ++episode_counter_;
    episode_reward_ = 0.0;
    episode_open_ = true;
    return env_.reset(ep_seed).features;
}

void PpoTrainer::collect() {
    buffer_.clear();
    const int dim = nets_.policy.output_size();
    for (int k = 0; k < cfg_.n_steps; ++k) {
        if (!episode_open_) obs_ = reset_for_new_episode();

        const std::vector<double>& mean_ref = nets_.policy.forward(obs_.data());
        std::array<double, 2> mean{mean_ref[0], mean_ref[1]};
        std::array<double, 2> raw;
        for (int d = 0; d < dim; ++d) {
            const double sigma =
                std::exp(nets_.log_std.value[static_cast<std::size_t>(d)]);
            raw[static_cast<std::size_t>(d)] =
                mean[static_cast<std::size_t>(d)] +
                sigma * standard_normal(rng_);
        }
        const double lp = gaussian_log_prob(raw.data(), mean.data(),
                                            nets_.log_std.value.data(), dim);
        const double v = nets_.value_of(obs_.data());

        const StepResult r = env_.step(raw);
        buffer_.push(obs_.data(), raw, lp, r.reward, v, r.done);
        episode_reward_ += r.reward;
        if (r.done) {
            reward_window_.push_back(episode_reward_);
            if (reward_window_.size() > kRewardWindow) {
                reward_window_.pop_front();
            }
            episode_open_ = false;
        } else {
            obs_ = r.observation.features;
        }
    }
    env_steps_ += cfg_.n_steps;
    bootstrap_value_ = episode_open_ ? nets_.value_of(obs_.data()) : 0.0;
}

LossBreakdown PpoTrainer::update() {
    AdvantageResult adv = compute_advantages(buffer_, bootstrap_value_,
                                             cfg_.gamma);
    normalize_advantages(adv.advantages);

    std::vector<int> order(static_cast<std::size_t>(buffer_.size));
    std::iota(order.begin(), order.end(), 0);

    LossBreakdown mean_losses;
    int batches = 0;
    for (int epoch = 0; epoch < cfg_.epochs_per_update; ++epoch) {
        fisher_yates(order, rng_);
        for (int start = 0; start < buffer_.size; start += cfg_.batch_size) {
            const int stop = std::min(start + cfg_.batch_size, buffer_.size);
            std::vector<Sample> batch;
            batch.reserve(static_cast<std::size_t>(stop - start));
            for (int i = start; i < stop; ++i) {
                const int idx = order[static_cast<std::size_t>(i)];
                Sample s;
                s.observation.assign(
                    buffer_.obs_at(idx), buffer_.obs_at(idx) + buffer_.obs_dim);
                s.action = buffer_.actions[static_cast<std::size_t>(idx)];
                s.old_log_prob =
                    buffer_.log_probs[static_cast<std::size_t>(idx)];
                s.advantage = adv.advantages[static_cast<std::size_t>(idx)];
                s.value_target =
                    adv.value_targets[static_cast<std::size_t>(idx)];
                batch.push_back(std::move(s));
            }
            nets_.zero_grad();
            const LossBreakdown losses =
                ppo_losses(nets_, batch, cfg_, /*accumulate_grads=*/true);
            if (!std::isfinite(losses.total)) {
                std::ostringstream dump;
                dump << "non-finite loss at iteration " << (iter_ + 1)
                     << " epoch " << epoch << " batch offset " << start
                     << ": pg=" << losses.policy << " vf=" << losses.value
                     << " ent=" << losses.entropy << "; batch advantages:";
                for (const Sample& s : batch) dump << ' ' << s.advantage;
                throw TrainingError(dump.str());
            }
            opt_.step();
            mean_losses.policy += losses.policy;
            mean_losses.value += losses.value;
            mean_losses.entropy += losses.entropy;
            mean_losses.total += losses.total;
            ++batches;
        }
    }
    const double inv = 1.0 / static_cast<double>(batches);
    mean_losses.policy *= inv;
    mean_losses.value *= inv;
    mean_losses.entropy *= inv;
    mean_losses.total *= inv;
    buffer_.clear();
    return mean_losses;
}

IterationLog PpoTrainer::run_iteration() {
    const auto started = std::chrono::steady_clock::now();
    collect();
    const LossBreakdown losses = update();
    const auto finished = std::chrono::steady_clock::now();
    const double elapsed_s =
        std::chrono::duration<double>(finished - started).count();

    if (!reward_window_.empty()) {
        last_mean_ep_reward_ =
            std::accumulate(reward_window_.begin(), reward_window_.end(),
                            0.0) /
            static_cast<double>(reward_window_.size());
    }
    IterationLog row;
    row.iteration = ++iter_;
    row.mean_ep_reward = last_mean_ep_reward_;
    row.pg_loss = losses.policy;
    row.value_loss = losses.value;
    row.entropy_loss = losses.entropy;
    row.steps_per_sec =
        elapsed_s > 0.0 ? static_cast<double>(cfg_.n_steps) / elapsed_s : 0.0;
    logs_.push_back(row);
    return row;
}

void PpoTrainer::train() {
    while (iter_ < cfg_.total_iterations) run_iteration();
}

CheckpointData PpoTrainer::make_checkpoint() const {
    CheckpointData data;
    data.config_hash = config_fingerprint(env_.config(), cfg_);
    data.train_seed = cfg_.seed;
    data.iterations_done = iter_;
    data.env_steps = env_steps_;
    data.adam_steps = opt_.steps_taken();
    data.episode_counter = episode_counter_;
    data.last_mean_ep_reward = last_mean_ep_reward_;
    data.obs_size = env_.observation_size();
    data.action_size = nets_.policy.output_size();
    data.hidden_size = cfg_.hidden_size;
    for (const Tensor* t : nets_.parameters()) data.tensors.push_back(t->value);
    // Moments mirror the parameter list order.
    data.adam_m = opt_.first_moments();
    data.adam_v = opt_.second_moments();
    std::ostringstream rng_text;
    rng_text << rng_;
    data.rng_state = rng_text.str();
    return data;
}

void PpoTrainer::restore(const CheckpointData& data) {
    const std::uint64_t here = config_fingerprint(env_.config(), cfg_);
    if (data.config_hash != here) {
        throw ValidationError(
            "checkpoint was trained under a different configuration "
            "(fingerprint mismatch)");
    }
    std::vector<Tensor*> params = nets_.parameters();
    if (data.tensors.size() != params.size()) {
        throw ValidationError("checkpoint tensor count mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (data.tensors[i].size() != params[i]->size()) {
            throw ValidationError("checkpoint tensor shape mismatch");
        }
        params[i]->value = data.tensors[i];
    }
    if (data.adam_m.size() != params.size() ||
        data.adam_v.size() != params.size()) {
        throw ValidationError("checkpoint optimizer state mismatch");
    }
    opt_.first_moments() = data.adam_m;
    opt_.second_moments() = data.adam_v;
    opt_.set_steps_taken(data.adam_steps);
    iter_ = static_cast<int>(data.iterations_done);
    env_steps_ = data.env_steps;
    episode_counter_ = data.episode_counter;
    last_mean_ep_reward_ = data.last_mean_ep_reward;
    std::istringstream rng_text(data.rng_state);
    rng_text >> rng_;
    if (!rng_text) {
        throw ParseError("checkpoint: malformed rng state");
    }
    episode_open_ = false;  // resume collection on a fresh episode
}

namespace {

EvalReport aggregate(std::vector<std::uint64_t> seeds,
                     std::vector<EpisodeSummary> episodes,
                     bool deterministic) {
    EvalReport report;
    report.seeds = std::move(seeds);
    report.episodes = std::move(episodes);
    report.deterministic = deterministic;
    std::vector<double> et, er, etot, ovl, tt;
    for (const EpisodeSummary& s : report.episodes) {
        et.push_back(s.ledger.e_traction_kwh);
        er.push_back(s.ledger.e_regen_kwh);
        etot.push_back(s.ledger.e_total_kwh());
        ovl.push_back(s.ledger.overlap_seconds());
        tt.push_back(s.total_time_s);
    }
    report.e_traction_kwh = stats_of(et);
    report.e_regen_kwh = stats_of(er);
    report.e_total_kwh = stats_of(etot);
    report.overlap_seconds = stats_of(ovl);
    report.total_time_s = stats_of(tt);
    return report;
}

}  // namespace

EvalReport evaluate_policy(MetroEnv& env, ActorCritic& nets,
                           std::uint64_t seed_base, int n_episodes,
                           bool deterministic, std::uint64_t noise_seed) {
    if (n_episodes <= 0) {
        throw ValidationError("evaluate: n_episodes must be positive");
    }
    const int dim = nets.policy.output_size();
    std::vector<std::uint64_t> seeds;
    std::vector<EpisodeSummary> episodes;
    for (int ep = 0; ep < n_episodes; ++ep) {
        const std::uint64_t seed = seed_base + static_cast<std::uint64_t>(ep);
        std::mt19937_64 noise(mix_seed(noise_seed, seed));
        Observation obs = env.reset(seed);
        bool done = env.done();
        while (!done) {
            const std::vector<double>& mean_ref =
                nets.policy.forward(obs.features.data());
            std::array<double, 2> raw{mean_ref[0], mean_ref[1]};
            if (!deterministic) {
                for (int d = 0; d < dim; ++d) {
                    const double sigma = std::exp(
                        nets.log_std.value[static_cast<std::size_t>(d)]);
                    raw[static_cast<std::size_t>(d)] +=
                        sigma * standard_normal(noise);
                }
            }
            StepResult r = env.step(raw);
            obs = std::move(r.observation);
            done = r.done;
        }
        seeds.push_back(seed);
        episodes.push_back(env.summary());
    }
    return aggregate(std::move(seeds), std::move(episodes), deterministic);
}

EvalReport evaluate_baseline(MetroEnv& env, std::uint64_t seed_base,
                             int n_episodes) {
    if (n_episodes <= 0) {
        throw ValidationError("evaluate: n_episodes must be positive");
    }
    std::vector<std::uint64_t> seeds;
    std::vector<EpisodeSummary> episodes;
    for (int ep = 0; ep < n_episodes; ++ep) {
        const std::uint64_t seed = seed_base + static_cast<std::uint64_t>(ep);
        seeds.push_back(seed);
        episodes.push_back(env.run_baseline(seed));
    }
    return aggregate(std::move(seeds), std::move(episodes), true);
}

}  // namespace metrosim
