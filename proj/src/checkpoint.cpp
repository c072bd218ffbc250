#include "metrosim/checkpoint.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string_view>
#include <type_traits>

#include "metrosim/errors.hpp"
#include "metrosim/mlp.hpp"
#include "metrosim/ppo.hpp"

namespace metrosim {

namespace {

constexpr char kMagic[8] = {'M', 'S', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kVersion = 1;

// The format is little-endian on disk; these helpers assume a
// little-endian host, which the build targets (x86-64 / aarch64 Linux).
template <typename T>
void write_pod(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    static_assert(std::is_trivially_copyable_v<T>);
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw ParseError("checkpoint: truncated file");
    return value;
}

void write_blocks(std::ostream& out,
                  const std::vector<std::vector<double>>& blocks) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(blocks.size()));
    for (const std::vector<double>& block : blocks) {
        write_pod<std::uint64_t>(out,
                                 static_cast<std::uint64_t>(block.size()));
        out.write(reinterpret_cast<const char*>(block.data()),
                  static_cast<std::streamsize>(block.size() * sizeof(double)));
    }
}

std::vector<std::vector<double>> read_blocks(std::istream& in) {
    const auto count = read_pod<std::uint32_t>(in);
    if (count > 1u << 20) throw ParseError("checkpoint: absurd block count");
    std::vector<std::vector<double>> blocks(count);
    for (std::vector<double>& block : blocks) {
        const auto len = read_pod<std::uint64_t>(in);
        if (len > (1ull << 32)) {
            throw ParseError("checkpoint: absurd block length");
        }
        block.resize(static_cast<std::size_t>(len));
        in.read(reinterpret_cast<char*>(block.data()),
                static_cast<std::streamsize>(len * sizeof(double)));
        if (!in) throw ParseError("checkpoint: truncated tensor block");
    }
    return blocks;
}

// Shortest round-trip decimal form, so the fingerprint text is canonical.
void append_number(std::string& text, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    text.append(buf, res.ptr);
}

void append_field(std::string& text, std::string_view key, double v) {
    text.append(key);
    text.push_back('=');
    append_number(text, v);
    text.push_back('\n');
}

void append_field(std::string& text, std::string_view key, std::int64_t v) {
    text.append(key);
    text.push_back('=');
    text.append(std::to_string(v));
    text.push_back('\n');
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointData& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("checkpoint: cannot open for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(out, kVersion);
    write_pod<std::uint64_t>(out, data.config_hash);
    write_pod<std::uint64_t>(out, data.train_seed);
    write_pod<std::int64_t>(out, data.iterations_done);
    write_pod<std::int64_t>(out, data.env_steps);
    write_pod<std::int64_t>(out, data.adam_steps);
    write_pod<std::uint64_t>(out, data.episode_counter);
    write_pod<double>(out, data.last_mean_ep_reward);
    write_pod<std::int32_t>(out, data.obs_size);
    write_pod<std::int32_t>(out, data.action_size);
    write_pod<std::int32_t>(out, data.hidden_size);
    write_blocks(out, data.tensors);
    write_blocks(out, data.adam_m);
    write_blocks(out, data.adam_v);
    write_pod<std::uint64_t>(out,
                             static_cast<std::uint64_t>(data.rng_state.size()));
    out.write(data.rng_state.data(),
              static_cast<std::streamsize>(data.rng_state.size()));
    if (!out) throw ParseError("checkpoint: write failed: " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("checkpoint: cannot open: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ParseError("checkpoint: bad magic (not a checkpoint file)");
    }
    CheckpointData data;
    data.version = read_pod<std::uint32_t>(in);
    if (data.version != kVersion) {
        throw ParseError("checkpoint: unsupported version " +
                         std::to_string(data.version));
    }
    data.config_hash = read_pod<std::uint64_t>(in);
    data.train_seed = read_pod<std::uint64_t>(in);
    data.iterations_done = read_pod<std::int64_t>(in);
    data.env_steps = read_pod<std::int64_t>(in);
    data.adam_steps = read_pod<std::int64_t>(in);
    data.episode_counter = read_pod<std::uint64_t>(in);
    data.last_mean_ep_reward = read_pod<double>(in);
    data.obs_size = read_pod<std::int32_t>(in);
    data.action_size = read_pod<std::int32_t>(in);
    data.hidden_size = read_pod<std::int32_t>(in);
    data.tensors = read_blocks(in);
    data.adam_m = read_blocks(in);
    data.adam_v = read_blocks(in);
    const auto rng_len = read_pod<std::uint64_t>(in);
    if (rng_len > (1ull << 20)) {
        throw ParseError("checkpoint: absurd rng state length");
    }
    data.rng_state.resize(static_cast<std::size_t>(rng_len));
    in.read(data.rng_state.data(), static_cast<std::streamsize>(rng_len));
    if (!in) throw ParseError("checkpoint: truncated rng state");
    return data;
}

std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::uint64_t fnv1a64(const std::string& text) {
    return fnv1a64(text.data(), text.size());
}

ActorCritic nets_from_checkpoint(const CheckpointData& data) {
    if (data.obs_size <= 0 || data.action_size <= 0 ||
        data.hidden_size <= 0) {
        throw ValidationError("checkpoint carries non-positive net sizes");
    }
    ActorCritic nets(data.obs_size, data.action_size, data.hidden_size);
    std::vector<Tensor*> params = nets.parameters();
    if (data.tensors.size() != params.size()) {
        throw ValidationError("checkpoint tensor count mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (data.tensors[i].size() != params[i]->size()) {
            throw ValidationError("checkpoint tensor shape mismatch");
        }
        params[i]->value = data.tensors[i];
    }
    return nets;
}

std::uint64_t config_fingerprint(const EnvConfig& env_cfg,
                                 const PpoConfig& ppo_cfg) {
    // Canonical key=value lines over every hyperparameter.  Seeds are
    // deliberately left out: a seed sweep shares one fingerprint.
    std::string text;
    text.reserve(512);
    append_field(text, "fleet.num_trains",
                 static_cast<std::int64_t>(env_cfg.fleet.num_trains));
    append_field(text, "fleet.headway_s", env_cfg.fleet.headway_s);
    append_field(text, "fleet.trains_up",
                 static_cast<std::int64_t>(env_cfg.fleet.trains_up));
    append_field(text, "fleet.trains_down",
                 static_cast<std::int64_t>(env_cfg.fleet.trains_down));
    append_field(text, "disturbance.probability_per_stop",
                 env_cfg.disturbance.probability_per_stop);
    append_field(text, "disturbance.max_extra_dwell_s",
                 env_cfg.disturbance.max_extra_dwell_s);
    append_field(
        text, "disturbance.distribution",
        static_cast<std::int64_t>(env_cfg.disturbance.distribution));
    append_field(text, "bounds.cruise_min_kmh", env_cfg.bounds.cruise_min_kmh);
    append_field(text, "bounds.cruise_max_kmh", env_cfg.bounds.cruise_max_kmh);
    append_field(text, "bounds.dwell_min_s", env_cfg.bounds.dwell_min_s);
    append_field(text, "bounds.dwell_max_s", env_cfg.bounds.dwell_max_s);
    append_field(text, "env.reward_scale_steps", env_cfg.reward_scale_steps);
    append_field(text, "env.dt_s", env_cfg.dt_s);
    append_field(text, "env.obs_horizon_s", env_cfg.obs_horizon_s);
    append_field(text, "env.overtake_policy",
                 static_cast<std::int64_t>(env_cfg.overtake_policy));
    append_field(text, "ppo.n_steps",
                 static_cast<std::int64_t>(ppo_cfg.n_steps));
    append_field(text, "ppo.batch_size",
                 static_cast<std::int64_t>(ppo_cfg.batch_size));
    append_field(text, "ppo.gamma", ppo_cfg.gamma);
    append_field(text, "ppo.clip_range", ppo_cfg.clip_range);
    append_field(text, "ppo.vf_coef", ppo_cfg.vf_coef);
    append_field(text, "ppo.ent_coef", ppo_cfg.ent_coef);
    append_field(text, "ppo.learning_rate", ppo_cfg.learning_rate);
    append_field(text, "ppo.epochs_per_update",
                 static_cast<std::int64_t>(ppo_cfg.epochs_per_update));
    // total_iterations is deliberately absent: it is the run's budget, not
    // part of the learning recipe, and extending the budget is exactly what
    // resuming a checkpoint is for.
    append_field(text, "ppo.hidden_size",
                 static_cast<std::int64_t>(ppo_cfg.hidden_size));
    return fnv1a64(text);
}

}  // namespace metrosim
