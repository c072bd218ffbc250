#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include "metrosim/mdp_env.hpp"
#include "metrosim/mlp.hpp"

namespace metrosim {

struct PpoConfig {
    int n_steps = 480;          ///< rollout buffer capacity
    int batch_size = 64;
    double gamma = 0.99;
    double clip_range = 0.2;
    double vf_coef = 0.5;       ///< c1
    double ent_coef = 0.1;      ///< c2
    double learning_rate = 3e-4;
    int epochs_per_update = 10;
    int total_iterations = 600;
    int hidden_size = 64;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Fixed-capacity on-policy transition store.  Filled to capacity before
/// every update (episodes may straddle the boundary) and cleared after.
struct RolloutBuffer {
    RolloutBuffer(int capacity, int obs_dim);

    void push(const double* obs, const std::array<double, 2>& action,
              double log_prob, double reward, double value, bool done);
    void clear();
    bool full() const { return size == capacity; }
    const double* obs_at(int i) const {
        return observations.data() + static_cast<std::size_t>(i) * obs_dim;
    }

    int capacity = 0;
    int obs_dim = 0;
    int size = 0;
    std::vector<double> observations;  // capacity x obs_dim, row-major
    std::vector<std::array<double, 2>> actions;
    std::vector<double> log_probs;
    std::vector<double> rewards;
    std::vector<double> values;
    std::vector<std::uint8_t> dones;
};

struct AdvantageResult {
    std::vector<double> advantages;     // pre-normalization
    std::vector<double> value_targets;  // advantage + value
};

/// One-step discounted advantages over a full buffer:
/// A_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t), with
/// `bootstrap_value` standing in for V after the final transition.
AdvantageResult compute_advantages(const RolloutBuffer& buffer,
                                   double bootstrap_value, double gamma);

/// Shift/scale to zero mean and unit variance (guarded by +1e-8 on the
/// denominator).
void normalize_advantages(std::vector<double>& advantages);

/// One stored transition as the update consumes it.
struct Sample {
    std::vector<double> observation;
    std::array<double, 2> action;  // pre-clamp raw draw
    double old_log_prob = 0.0;
    double advantage = 0.0;  // normalized
    double value_target = 0.0;
};

struct LossBreakdown {
    double policy = 0.0;   // negated clipped surrogate (to minimize)
    double value = 0.0;    // MSE against value targets
    double entropy = 0.0;  // negative Gaussian entropy (closed form)
    double total = 0.0;    // policy + c1*value + c2*entropy
};

/// Evaluate the minimized objective on a minibatch; when
/// `accumulate_grads` is set, also backpropagate d(total)/d(parameter)
/// into every tensor's grad field (caller zeroes grads beforehand).
LossBreakdown ppo_losses(ActorCritic& nets, const std::vector<Sample>& batch,
                         const PpoConfig& cfg, bool accumulate_grads);

/// Per-iteration training record.  Everything but steps_per_sec is a pure
/// function of the seed; the throughput column is wall-clock.
struct IterationLog {
    int iteration = 0;
    double mean_ep_reward = 0.0;
    double pg_loss = 0.0;
    double value_loss = 0.0;
    double entropy_loss = 0.0;
    double steps_per_sec = 0.0;
};

struct CheckpointData;  // checkpoint.hpp

/**
 * @brief On-policy actor-critic training loop over a MetroEnv.
 *
 * Each iteration fills the rollout buffer (auto-resetting the env on
 * episode ends, with fresh per-episode disturbance seeds derived from the
 * config seed), computes normalized one-step advantages, then runs
 * shuffled-minibatch Adam passes over the clipped-surrogate objective.
 */
class PpoTrainer {
public:
    PpoTrainer(MetroEnv env, const PpoConfig& cfg);

    /// One collect+update cycle; appends and returns the log row.
    IterationLog run_iteration();

    /// Run until total_iterations have been completed.
    void train();

    const std::vector<IterationLog>& logs() const { return logs_; }
    ActorCritic& nets() { return nets_; }
    const ActorCritic& nets() const { return nets_; }
    MetroEnv& env() { return env_; }
    const PpoConfig& config() const { return cfg_; }
    int iterations_done() const { return iter_; }
    std::int64_t env_steps() const { return env_steps_; }

    CheckpointData make_checkpoint() const;
    void restore(const CheckpointData& data);

private:
    void collect();
    LossBreakdown update();
    std::vector<double> reset_for_new_episode();

    MetroEnv env_;
    PpoConfig cfg_;
    ActorCritic nets_;
    AdamOptimizer opt_;
    RolloutBuffer buffer_;
    std::mt19937_64 rng_;
    std::vector<double> obs_;
    bool episode_open_ = false;
    double episode_reward_ = 0.0;
    double bootstrap_value_ = 0.0;
    /// Trailing window of completed-episode returns; mean_ep_reward is the
    /// mean over this window so the log tracks policy quality instead of the
    /// handful of episodes that happen to finish inside one rollout.
    static constexpr std::size_t kRewardWindow = 100;
    std::deque<double> reward_window_;
    double last_mean_ep_reward_ = 0.0;
    std::uint64_t episode_counter_ = 0;
    std::int64_t env_steps_ = 0;
    int iter_ = 0;
    std::vector<IterationLog> logs_;
};

/// Mean and sample standard deviation of one evaluation metric.
struct MetricStats {
    double mean = 0.0;
    double stdev = 0.0;
};

struct EvalReport {
    std::vector<std::uint64_t> seeds;
    std::vector<EpisodeSummary> episodes;
    MetricStats e_traction_kwh;
    MetricStats e_regen_kwh;
    MetricStats e_total_kwh;
    MetricStats overlap_seconds;
    MetricStats total_time_s;
    bool deterministic = true;
};

/// Roll the policy over episodes seeded seed_base..seed_base+n-1, taking
/// the mean action (deterministic) or sampling with noise_seed.
EvalReport evaluate_policy(MetroEnv& env, ActorCritic& nets,
                           std::uint64_t seed_base, int n_episodes,
                           bool deterministic, std::uint64_t noise_seed = 0);

/// Same aggregation for the no-action baseline on the same seeds.
EvalReport evaluate_baseline(MetroEnv& env, std::uint64_t seed_base,
                             int n_episodes);

}  // namespace metrosim
