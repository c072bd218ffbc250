#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metrosim/mdp_env.hpp"

namespace metrosim {

struct PpoConfig;

/// Everything needed to reproduce a trainer mid-run or evaluate a policy:
/// tensor values in ActorCritic::parameters() order, Adam moments, the
/// training RNG stream, and enough metadata to refuse mismatched configs.
struct CheckpointData {
    std::uint32_t version = 1;
    std::uint64_t config_hash = 0;  ///< fingerprint of env+ppo configs, seedless
    std::uint64_t train_seed = 0;
    std::int64_t iterations_done = 0;
    std::int64_t env_steps = 0;
    std::int64_t adam_steps = 0;
    std::uint64_t episode_counter = 0;
    double last_mean_ep_reward = 0.0;
    int obs_size = 0;
    int action_size = 0;
    int hidden_size = 0;
    std::vector<std::vector<double>> tensors;
    std::vector<std::vector<double>> adam_m;
    std::vector<std::vector<double>> adam_v;
    std::string rng_state;  ///< text-serialized mt19937_64
};

/// Raw little-endian binary dump; refuses to load other magics/versions.
void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

struct ActorCritic;  // mlp.hpp

/// Rebuild just the networks from a checkpoint (for evaluation; training
/// resumption needs PpoTrainer::restore, which also recovers the optimizer
/// and RNG stream).  Throws ValidationError on shape mismatches.
ActorCritic nets_from_checkpoint(const CheckpointData& data);

/// FNV-1a over bytes / text.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64(const std::string& text);

/// Seed- and budget-independent fingerprint of the run configuration: two
/// runs share a hash exactly when their env and training hyperparameters
/// agree, so checkpoints can be matched to configs while seed sweeps stay
/// compatible and finished runs can be resumed under a larger
/// total_iterations.
std::uint64_t config_fingerprint(const EnvConfig& env_cfg,
                                 const PpoConfig& ppo_cfg);

}  // namespace metrosim
