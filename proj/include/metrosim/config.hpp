#pragma once

#include <string>

#include "metrosim/dynamics.hpp"
#include "metrosim/mdp_env.hpp"
#include "metrosim/ppo.hpp"

namespace metrosim {

/**
 * @brief JSON round-trip for the three runtime configuration structs.
 *
 * Config files are sparse overlays: absent keys keep the struct defaults,
 * so `{}` is a valid file meaning "all defaults".  Unknown keys are errors
 * (they are almost always typos) and every load ends in the struct's own
 * validate(), so a loaded config is always usable.  All failures throw
 * ValidationError carrying the file path and the offending field.
 */
TrainPhysics load_physics_json(const std::string& path);
EnvConfig load_env_config_json(const std::string& path);
PpoConfig load_ppo_config_json(const std::string& path);

void save_physics_json(const std::string& path, const TrainPhysics& phys);
void save_env_config_json(const std::string& path, const EnvConfig& cfg);
void save_ppo_config_json(const std::string& path, const PpoConfig& cfg);

/// In-memory JSON text forms (used by the snapshot writer and the savers).
std::string physics_to_json_text(const TrainPhysics& phys);
std::string env_config_to_json_text(const EnvConfig& cfg);
std::string ppo_config_to_json_text(const PpoConfig& cfg);

/// Paths a command resolved its inputs from, plus the output directory.
/// Loaded from a single --config file; command-line flags override fields.
struct RunConfig {
    std::string line_file;     ///< empty -> $METROSIM_DATA_DIR/xiamen_line1.csv
    std::string physics_file;  ///< empty -> TrainPhysics::defaults()
    std::string env_file;      ///< empty -> EnvConfig{}
    std::string ppo_file;      ///< empty -> PpoConfig{}
    std::string out_dir = "out";
};

/// Parse a RunConfig JSON file (all keys optional, unknown keys rejected).
/// Relative file paths are resolved against the config file's directory.
RunConfig load_run_config_json(const std::string& path);

/// Materialized inputs of one command, ready to build environments from.
struct ResolvedRun {
    RunConfig paths;
    LineDataset line;
    TrainPhysics physics;
    EnvConfig env_cfg;
    PpoConfig ppo_cfg;

    MetroEnv make_env() const { return MetroEnv(line, physics, env_cfg); }
};

/// Load every input the RunConfig names (or the defaults it leaves blank).
ResolvedRun resolve_run(const RunConfig& rc);

/// Fingerprint covering line data + physics + env config (seedless), the
/// hash cmd_compare matches reports on.  PPO hyperparameters are excluded:
/// rows compared in one table legitimately differ in training recipe but
/// must share the simulated world.
std::uint64_t world_fingerprint(const LineDataset& line,
                                const TrainPhysics& phys,
                                const EnvConfig& cfg);

/// Full reproducibility snapshot of one command: resolved paths, the three
/// embedded configs, the world fingerprint, and the command line extras
/// (seeds etc.) the caller passes through.  Written next to every command's
/// outputs as config_snapshot.json.
void write_run_snapshot(const std::string& path, const ResolvedRun& run,
                        const std::string& command,
                        const std::string& extras_json);

}  // namespace metrosim
