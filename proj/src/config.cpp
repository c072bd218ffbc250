#include "metrosim/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "metrosim/checkpoint.hpp"
#include "metrosim/errors.hpp"

namespace metrosim {
namespace {

using nlohmann::json;

json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open config file: " + path);
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

/// Reject keys outside the allowed set; config typos should not pass
/// silently as defaults.
void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& path, const std::string& scope) {
    if (!obj.is_object()) {
        throw ValidationError(path + ": " + scope + " must be a JSON object");
    }
    for (const auto& item : obj.items()) {
        if (allowed.find(item.key()) == allowed.end()) {
            throw ValidationError(path + ": unknown key '" + item.key() +
                                  "' in " + scope);
        }
    }
}

template <typename T>
void read_into(const json& obj, const char* key, T& out,
               const std::string& path) {
    if (!obj.contains(key)) return;
    try {
        obj.at(key).get_to(out);
    } catch (const json::exception& e) {
        throw ValidationError(path + ": field '" + std::string(key) +
                              "': " + e.what());
    }
}

json physics_to_json(const TrainPhysics& p) {
    // q1/q2 are derived from the plateau/corner values on load, so they are
    // not serialized.
    return json{
        {"mass_kg", p.mass_kg},
        {"traction",
         {{"p1_kn", p.traction.p1_kn},
          {"p2_mps", p.traction.p2_mps},
          {"v1_mps", p.traction.v1_mps}}},
        {"braking",
         {{"p3_kn", p.braking.p3_kn},
          {"p4_mps", p.braking.p4_mps},
          {"v2_mps", p.braking.v2_mps}}},
        {"resistance",
         {{"lambda1", p.resistance.lambda1},
          {"lambda2", p.resistance.lambda2},
          {"lambda3", p.resistance.lambda3}}},
        {"beta1", p.beta1},
        {"beta2", p.beta2},
        {"beta3", p.beta3},
        {"gravity_component_kn", p.gravity_component_kn},
    };
}

TrainPhysics physics_from_json(const json& j, const std::string& path) {
    TrainPhysics p = TrainPhysics::defaults();
    check_keys(j,
               {"mass_kg", "traction", "braking", "resistance", "beta1",
                "beta2", "beta3", "gravity_component_kn"},
               path, "physics config");
    read_into(j, "mass_kg", p.mass_kg, path);
    if (j.contains("traction")) {
        const json& t = j.at("traction");
        check_keys(t, {"p1_kn", "p2_mps", "v1_mps"}, path, "traction");
        read_into(t, "p1_kn", p.traction.p1_kn, path);
        read_into(t, "p2_mps", p.traction.p2_mps, path);
        read_into(t, "v1_mps", p.traction.v1_mps, path);
    }
    if (j.contains("braking")) {
        const json& b = j.at("braking");
        check_keys(b, {"p3_kn", "p4_mps", "v2_mps"}, path, "braking");
        read_into(b, "p3_kn", p.braking.p3_kn, path);
        read_into(b, "p4_mps", p.braking.p4_mps, path);
        read_into(b, "v2_mps", p.braking.v2_mps, path);
    }
    if (j.contains("resistance")) {
        const json& r = j.at("resistance");
        check_keys(r, {"lambda1", "lambda2", "lambda3"}, path, "resistance");
        read_into(r, "lambda1", p.resistance.lambda1, path);
        read_into(r, "lambda2", p.resistance.lambda2, path);
        read_into(r, "lambda3", p.resistance.lambda3, path);
    }
    read_into(j, "beta1", p.beta1, path);
    read_into(j, "beta2", p.beta2, path);
    read_into(j, "beta3", p.beta3, path);
    read_into(j, "gravity_component_kn", p.gravity_component_kn, path);
    try {
        p.normalize_and_validate();
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return p;
}

json env_to_json(const EnvConfig& c) {
    return json{
        {"fleet",
         {{"num_trains", c.fleet.num_trains},
          {"headway_s", c.fleet.headway_s},
          {"trains_up", c.fleet.trains_up},
          {"trains_down", c.fleet.trains_down}}},
        {"disturbance",
         {{"probability_per_stop", c.disturbance.probability_per_stop},
          {"max_extra_dwell_s", c.disturbance.max_extra_dwell_s},
          {"distribution", c.disturbance.distribution ==
                                   DisturbanceKind::truncated_exponential
                               ? "truncated_exponential"
                               : "uniform"},
          {"seed", c.disturbance.seed}}},
        {"bounds",
         {{"cruise_min_kmh", c.bounds.cruise_min_kmh},
          {"cruise_max_kmh", c.bounds.cruise_max_kmh},
          {"dwell_min_s", c.bounds.dwell_min_s},
          {"dwell_max_s", c.bounds.dwell_max_s}}},
        {"reward_scale_steps", c.reward_scale_steps},
        {"dt_s", c.dt_s},
        {"obs_horizon_s", c.obs_horizon_s},
        {"overtake_policy",
         c.overtake_policy == OvertakePolicy::reject ? "reject" : "count"},
    };
}

EnvConfig env_from_json(const json& j, const std::string& path) {
    EnvConfig c;
    check_keys(j,
               {"fleet", "disturbance", "bounds", "reward_scale_steps",
                "dt_s", "obs_horizon_s", "overtake_policy"},
               path, "env config");
    if (j.contains("fleet")) {
        const json& f = j.at("fleet");
        check_keys(f, {"num_trains", "headway_s", "trains_up", "trains_down"},
                   path, "fleet");
        read_into(f, "num_trains", c.fleet.num_trains, path);
        read_into(f, "headway_s", c.fleet.headway_s, path);
        read_into(f, "trains_up", c.fleet.trains_up, path);
        read_into(f, "trains_down", c.fleet.trains_down, path);
    }
    if (j.contains("disturbance")) {
        const json& d = j.at("disturbance");
        check_keys(d,
                   {"probability_per_stop", "max_extra_dwell_s",
                    "distribution", "seed"},
                   path, "disturbance");
        read_into(d, "probability_per_stop",
                  c.disturbance.probability_per_stop, path);
        read_into(d, "max_extra_dwell_s", c.disturbance.max_extra_dwell_s,
                  path);
        if (d.contains("distribution")) {
            std::string kind;
            read_into(d, "distribution", kind, path);
            if (kind == "uniform") {
                c.disturbance.distribution = DisturbanceKind::uniform;
            } else if (kind == "truncated_exponential") {
                c.disturbance.distribution =
                    DisturbanceKind::truncated_exponential;
            } else {
                throw ValidationError(
                    path + ": disturbance.distribution must be 'uniform' or "
                           "'truncated_exponential', got '" + kind + "'");
            }
        }
        read_into(d, "seed", c.disturbance.seed, path);
    }
    if (j.contains("bounds")) {
        const json& b = j.at("bounds");
        check_keys(b,
                   {"cruise_min_kmh", "cruise_max_kmh", "dwell_min_s",
                    "dwell_max_s"},
                   path, "bounds");
        read_into(b, "cruise_min_kmh", c.bounds.cruise_min_kmh, path);
        read_into(b, "cruise_max_kmh", c.bounds.cruise_max_kmh, path);
        read_into(b, "dwell_min_s", c.bounds.dwell_min_s, path);
        read_into(b, "dwell_max_s", c.bounds.dwell_max_s, path);
    }
    read_into(j, "reward_scale_steps", c.reward_scale_steps, path);
    read_into(j, "dt_s", c.dt_s, path);
    read_into(j, "obs_horizon_s", c.obs_horizon_s, path);
    if (j.contains("overtake_policy")) {
        std::string policy;
        read_into(j, "overtake_policy", policy, path);
        if (policy == "count") {
            c.overtake_policy = OvertakePolicy::count;
        } else if (policy == "reject") {
            c.overtake_policy = OvertakePolicy::reject;
        } else {
            throw ValidationError(path +
                                  ": overtake_policy must be 'count' or "
                                  "'reject', got '" + policy + "'");
        }
    }
    try {
        c.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return c;
}

json ppo_to_json(const PpoConfig& c) {
    return json{
        {"n_steps", c.n_steps},
        {"batch_size", c.batch_size},
        {"gamma", c.gamma},
        {"clip_range", c.clip_range},
        {"vf_coef", c.vf_coef},
        {"ent_coef", c.ent_coef},
        {"learning_rate", c.learning_rate},
        {"epochs_per_update", c.epochs_per_update},
        {"total_iterations", c.total_iterations},
        {"hidden_size", c.hidden_size},
        {"seed", c.seed},
    };
}

PpoConfig ppo_from_json(const json& j, const std::string& path) {
    PpoConfig c;
    check_keys(j,
               {"n_steps", "batch_size", "gamma", "clip_range", "vf_coef",
                "ent_coef", "learning_rate", "epochs_per_update",
                "total_iterations", "hidden_size", "seed"},
               path, "ppo config");
    read_into(j, "n_steps", c.n_steps, path);
    read_into(j, "batch_size", c.batch_size, path);
    read_into(j, "gamma", c.gamma, path);
    read_into(j, "clip_range", c.clip_range, path);
    read_into(j, "vf_coef", c.vf_coef, path);
    read_into(j, "ent_coef", c.ent_coef, path);
    read_into(j, "learning_rate", c.learning_rate, path);
    read_into(j, "epochs_per_update", c.epochs_per_update, path);
    read_into(j, "total_iterations", c.total_iterations, path);
    read_into(j, "hidden_size", c.hidden_size, path);
    read_into(j, "seed", c.seed, path);
    try {
        c.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return c;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) {
        throw ValidationError("cannot write file: " + path);
    }
    out << text;
    if (!out) {
        throw ValidationError("failed writing file: " + path);
    }
}

std::string default_line_file() {
    const char* dir = std::getenv("METROSIM_DATA_DIR");
    const std::string base = dir != nullptr ? dir : "data";
    return base + "/xiamen_line1.csv";
}

}  // namespace

TrainPhysics load_physics_json(const std::string& path) {
    return physics_from_json(parse_file(path), path);
}

EnvConfig load_env_config_json(const std::string& path) {
    return env_from_json(parse_file(path), path);
}

PpoConfig load_ppo_config_json(const std::string& path) {
    return ppo_from_json(parse_file(path), path);
}

std::string physics_to_json_text(const TrainPhysics& phys) {
    return physics_to_json(phys).dump(2) + "\n";
}

std::string env_config_to_json_text(const EnvConfig& cfg) {
    return env_to_json(cfg).dump(2) + "\n";
}

std::string ppo_config_to_json_text(const PpoConfig& cfg) {
    return ppo_to_json(cfg).dump(2) + "\n";
}

void save_physics_json(const std::string& path, const TrainPhysics& phys) {
    write_text_file(path, physics_to_json_text(phys));
}

void save_env_config_json(const std::string& path, const EnvConfig& cfg) {
    write_text_file(path, env_config_to_json_text(cfg));
}

void save_ppo_config_json(const std::string& path, const PpoConfig& cfg) {
    write_text_file(path, ppo_config_to_json_text(cfg));
}

RunConfig load_run_config_json(const std::string& path) {
    const json j = parse_file(path);
    check_keys(j,
               {"line_file", "physics_file", "env_file", "ppo_file",
                "out_dir"},
               path, "run config");
    RunConfig rc;
    read_into(j, "line_file", rc.line_file, path);
    read_into(j, "physics_file", rc.physics_file, path);
    read_into(j, "env_file", rc.env_file, path);
    read_into(j, "ppo_file", rc.ppo_file, path);
    read_into(j, "out_dir", rc.out_dir, path);

    // Relative paths in the file mean "next to the file".
    const std::filesystem::path base =
        std::filesystem::path(path).parent_path();
    auto resolve = [&base](std::string& p) {
        if (!p.empty() && std::filesystem::path(p).is_relative()) {
            p = (base / p).string();
        }
    };
    resolve(rc.line_file);
    resolve(rc.physics_file);
    resolve(rc.env_file);
    resolve(rc.ppo_file);
    return rc;
}

ResolvedRun resolve_run(const RunConfig& rc) {
    RunConfig paths = rc;
    if (paths.line_file.empty()) paths.line_file = default_line_file();
    return ResolvedRun{
        paths,
        LineDataset::load_file(paths.line_file),
        rc.physics_file.empty() ? TrainPhysics::defaults()
                                : load_physics_json(rc.physics_file),
        rc.env_file.empty() ? EnvConfig{} : load_env_config_json(rc.env_file),
        rc.ppo_file.empty() ? PpoConfig{} : load_ppo_config_json(rc.ppo_file)};
}

std::uint64_t world_fingerprint(const LineDataset& line,
                                const TrainPhysics& phys,
                                const EnvConfig& cfg) {
    // Seed-independent: the disturbance seed is an episode input, not part
    // of the world.  Canonical text keeps the hash platform-stable.
    EnvConfig seedless = cfg;
    seedless.disturbance.seed = 0;
    std::ostringstream text;
    text << line.serialize() << '\n'
         << physics_to_json(phys).dump() << '\n'
         << env_to_json(seedless).dump();
    return fnv1a64(text.str());
}

void write_run_snapshot(const std::string& path, const ResolvedRun& run,
                        const std::string& command,
                        const std::string& extras_json) {
    json snapshot{
        {"command", command},
        {"line_file", run.paths.line_file},
        {"physics_file", run.paths.physics_file},
        {"env_file", run.paths.env_file},
        {"ppo_file", run.paths.ppo_file},
        {"out_dir", run.paths.out_dir},
        {"world_fingerprint",
         world_fingerprint(run.line, run.physics, run.env_cfg)},
        {"physics", physics_to_json(run.physics)},
        {"env", env_to_json(run.env_cfg)},
        {"ppo", ppo_to_json(run.ppo_cfg)},
    };
    if (!extras_json.empty()) {
        try {
            snapshot["extras"] = json::parse(extras_json);
        } catch (const json::exception& e) {
            throw ValidationError(std::string("snapshot extras: ") + e.what());
        }
    }
    write_text_file(path, snapshot.dump(2) + "\n");
}

}  // namespace metrosim
