// Operator entry point: baselines, training, evaluation, comparisons, and
// input validation for the metro-line energy simulator.
//
// Exit codes: 0 success, 1 runtime failure (training blow-up, I/O mid-run),
// 2 configuration or validation failure (bad flags, bad files, mismatched
// reports).

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "metrosim/checkpoint.hpp"
#include "metrosim/config.hpp"
#include "metrosim/errors.hpp"
#include "metrosim/mlp.hpp"
#include "metrosim/ppo.hpp"
#include "metrosim/reports.hpp"

namespace {

using namespace metrosim;

struct CommonOpts {
    std::string config;
    std::string line;
    std::string physics;
    std::string env;
    std::string ppo;
    std::string out;
};

void add_common_options(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config,
                    "run-config JSON naming the input files and out_dir");
    cmd->add_option("--line", o.line, "line CSV (overrides --config)");
    cmd->add_option("--physics", o.physics,
                    "train physics JSON (overrides --config)");
    cmd->add_option("--env", o.env,
                    "environment config JSON (overrides --config)");
    cmd->add_option("--ppo", o.ppo,
                    "PPO hyperparameter JSON (overrides --config)");
    cmd->add_option("--out", o.out, "output directory (overrides --config)");
}

ResolvedRun resolve(const CommonOpts& o) {
    RunConfig rc;
    if (!o.config.empty()) rc = load_run_config_json(o.config);
    if (!o.line.empty()) rc.line_file = o.line;
    if (!o.physics.empty()) rc.physics_file = o.physics;
    if (!o.env.empty()) rc.env_file = o.env;
    if (!o.ppo.empty()) rc.ppo_file = o.ppo;
    if (!o.out.empty()) rc.out_dir = o.out;
    ResolvedRun run = resolve_run(rc);
    std::filesystem::create_directories(run.paths.out_dir);
    return run;
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

void print_report_line(const std::string& label, const EvalReport& rep) {
    std::cout << label << ": n=" << rep.seeds.size()
              << " E_T=" << rep.e_traction_kwh.mean << " kWh"
              << " E_R=" << rep.e_regen_kwh.mean << " kWh"
              << " E_total=" << rep.e_total_kwh.mean << " kWh"
              << " overlap=" << rep.overlap_seconds.mean << " s"
              << " time=" << rep.total_time_s.mean << " s\n";
}

/// One policy-mean episode with the per-step power trace streamed to path.
void write_policy_trace(const ResolvedRun& run, ActorCritic& nets,
                        std::uint64_t seed, const std::string& path) {
    std::ofstream trace(path);
    if (!trace) throw ValidationError("cannot write file: " + path);
    MetroEnv env = run.make_env();
    env.set_trace_stream(&trace);
    Observation obs = env.reset(seed);
    while (!env.done()) {
        const std::vector<double>& mean = nets.policy.forward(obs.features.data());
        const std::array<double, 2> action{mean[0], mean[1]};
        StepResult r = env.step(action);
        obs = r.observation;
    }
}

int cmd_baseline(const CommonOpts& common, std::uint64_t seed_base,
                 int n_seeds, bool trace) {
    const ResolvedRun run = resolve(common);
    const std::string& out = run.paths.out_dir;

    if (trace) {
        std::ofstream tf(join_path(out, "baseline_trace.csv"));
        if (!tf) {
            throw ValidationError("cannot write file: " +
                                  join_path(out, "baseline_trace.csv"));
        }
        MetroEnv tenv = run.make_env();
        tenv.set_trace_stream(&tf);
        tenv.run_baseline(seed_base);
    }

    MetroEnv env = run.make_env();
    const EvalReport rep = evaluate_baseline(env, seed_base, n_seeds);
    const std::uint64_t fp =
        world_fingerprint(run.line, run.physics, run.env_cfg);

    write_eval_report_json(join_path(out, "baseline_report.json"),
                           "no-action", rep, fp, 0);
    write_episodes_csv(join_path(out, "baseline_episodes.csv"), rep);
    std::ostringstream extras;
    extras << "{\"seed_base\":" << seed_base << ",\"n_seeds\":" << n_seeds
           << ",\"trace\":" << (trace ? "true" : "false") << "}";
    write_run_snapshot(join_path(out, "baseline_snapshot.json"), run,
                       "baseline", extras.str());

    print_report_line("no-action", rep);
    std::cout << "wrote " << join_path(out, "baseline_report.json") << '\n';
    return 0;
}

int cmd_train(const CommonOpts& common, std::uint64_t seed, bool seed_set,
              int iterations, const std::string& resume, int log_every) {
    ResolvedRun run = resolve(common);
    if (seed_set) run.ppo_cfg.seed = seed;
    if (iterations >= 0) run.ppo_cfg.total_iterations = iterations;
    run.ppo_cfg.validate();
    const std::string& out = run.paths.out_dir;

    PpoTrainer trainer(run.make_env(), run.ppo_cfg);
    if (!resume.empty()) {
        trainer.restore(load_checkpoint(resume));
        std::cout << "resumed from " << resume << " at iteration "
                  << trainer.iterations_done() << '\n';
    }

    while (trainer.iterations_done() < run.ppo_cfg.total_iterations) {
        const IterationLog row = trainer.run_iteration();
        if (log_every > 0 &&
            (row.iteration % log_every == 0 ||
             row.iteration == run.ppo_cfg.total_iterations)) {
            std::cout << "iter " << row.iteration << " mean_ep_reward "
                      << row.mean_ep_reward << " pg " << row.pg_loss << " vf "
                      << row.value_loss << " ent " << row.entropy_loss
                      << " steps/s " << row.steps_per_sec << '\n';
        }
    }

    write_train_log_csv(join_path(out, "train_log.csv"), trainer.logs());
    write_train_timing_csv(join_path(out, "train_timing.csv"),
                           trainer.logs());
    save_checkpoint(join_path(out, "checkpoint.bin"),
                    trainer.make_checkpoint());
    std::ostringstream extras;
    extras << "{\"seed\":" << run.ppo_cfg.seed
           << ",\"iterations\":" << run.ppo_cfg.total_iterations;
    if (!resume.empty()) extras << ",\"resumed_from\":\"" << resume << "\"";
    extras << "}";
    write_run_snapshot(join_path(out, "train_snapshot.json"), run, "train",
                       extras.str());

    std::cout << "trained " << trainer.iterations_done() << " iterations, "
              << trainer.env_steps() << " env steps; wrote "
              << join_path(out, "checkpoint.bin") << '\n';
    return 0;
}

int cmd_evaluate(const CommonOpts& common, const std::string& checkpoint,
                 std::uint64_t seed_base, int n_seeds, bool sample,
                 std::uint64_t noise_seed, bool trace) {
    const ResolvedRun run = resolve(common);
    const std::string& out = run.paths.out_dir;

    const CheckpointData ckpt = load_checkpoint(checkpoint);
    ActorCritic nets = nets_from_checkpoint(ckpt);
    MetroEnv env = run.make_env();
    if (env.observation_size() != ckpt.obs_size) {
        std::ostringstream msg;
        msg << "checkpoint expects observation size " << ckpt.obs_size
            << " but this environment produces " << env.observation_size()
            << "; evaluate with the configuration the policy was trained on";
        throw ValidationError(msg.str());
    }

    if (trace) {
        write_policy_trace(run, nets, seed_base,
                           join_path(out, "eval_trace.csv"));
    }

    const EvalReport rep =
        evaluate_policy(env, nets, seed_base, n_seeds, !sample, noise_seed);
    const std::uint64_t fp =
        world_fingerprint(run.line, run.physics, run.env_cfg);

    write_eval_report_json(join_path(out, "eval_report.json"), "ppo-policy",
                           rep, fp, noise_seed);
    write_episodes_csv(join_path(out, "eval_episodes.csv"), rep);
    std::ostringstream extras;
    extras << "{\"checkpoint\":\"" << checkpoint
           << "\",\"seed_base\":" << seed_base << ",\"n_seeds\":" << n_seeds
           << ",\"sample\":" << (sample ? "true" : "false")
           << ",\"noise_seed\":" << noise_seed
           << ",\"trained_iterations\":" << ckpt.iterations_done << "}";
    write_run_snapshot(join_path(out, "evaluate_snapshot.json"), run,
                       "evaluate", extras.str());

    print_report_line("ppo-policy", rep);
    std::cout << "wrote " << join_path(out, "eval_report.json") << '\n';
    return 0;
}

int cmd_compare(const std::string& baseline_path,
                const std::string& method_path, const std::string& out) {
    const ReportRow base = load_report_json(baseline_path);
    const ReportRow ours = load_report_json(method_path);
    const ComparisonReport cr = make_comparison(base, ours);
    std::cout << comparison_to_text(cr);
    if (!out.empty()) {
        std::filesystem::create_directories(out);
        write_comparison_json(join_path(out, "comparison.json"), cr);
        write_comparison_csv(join_path(out, "comparison.csv"), cr);
        std::cout << "wrote " << join_path(out, "comparison.json") << '\n';
    }
    return 0;
}

int cmd_validate_data(const CommonOpts& common) {
    // resolve() already runs every file through its parser + validator;
    // reaching this point means the inputs are sound.
    const ResolvedRun run = resolve(common);
    const LineDataset& line = run.line;
    std::cout << "line: " << line.name() << " (" << run.paths.line_file
              << ")\n"
              << "  segments: " << line.segment_count()
              << "  stations: " << line.stations().size()
              << "  total: " << line.total_distance_km() << " km"
              << "  speed limit: " << line.speed_limit_kmh() << " km/h\n";
    std::cout << "physics: mass " << run.physics.mass_kg / 1000.0
              << " t, beta1 " << run.physics.beta1 << ", beta2 "
              << run.physics.beta2 << ", beta3 " << run.physics.beta3
              << '\n';
    std::cout << "env: " << run.env_cfg.fleet.num_trains << " trains ("
              << run.env_cfg.fleet.trains_up << " up, "
              << run.env_cfg.fleet.trains_down << " down), headway "
              << run.env_cfg.fleet.headway_s << " s, dt "
              << run.env_cfg.dt_s << " s\n";
    std::cout << "ppo: n_steps " << run.ppo_cfg.n_steps << ", batch "
              << run.ppo_cfg.batch_size << ", gamma " << run.ppo_cfg.gamma
              << ", lr " << run.ppo_cfg.learning_rate << ", iterations "
              << run.ppo_cfg.total_iterations << '\n';
    std::cout << "world_fingerprint: "
              << world_fingerprint(run.line, run.physics, run.env_cfg)
              << "\nOK\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "metrosim: metro-line energy simulation and PPO timetable "
        "rescheduling"};
    app.require_subcommand(1);

    // baseline ------------------------------------------------------------
    CommonOpts base_opts;
    std::uint64_t base_seed_base = 0;
    int base_n_seeds = 1;
    bool base_trace = false;
    CLI::App* baseline =
        app.add_subcommand("baseline", "run the no-action baseline fleet");
    add_common_options(baseline, base_opts);
    baseline->add_option("--seed-base", base_seed_base,
                         "first episode seed (episodes use base..base+n-1)");
    baseline->add_option("--seeds", base_n_seeds, "number of episode seeds")
        ->check(CLI::PositiveNumber);
    baseline->add_flag("--trace", base_trace,
                       "also write per-step power trace of the first seed");

    // train ---------------------------------------------------------------
    CommonOpts train_opts;
    std::uint64_t train_seed = 0;
    int train_iterations = -1;
    int train_log_every = 10;
    std::string train_resume;
    CLI::App* train =
        app.add_subcommand("train", "train the PPO rescheduling policy");
    add_common_options(train, train_opts);
    CLI::Option* train_seed_opt =
        train->add_option("--seed", train_seed, "training seed");
    train->add_option("--iterations", train_iterations,
                      "override total_iterations");
    train->add_option("--resume", train_resume,
                      "checkpoint to continue training from");
    train->add_option("--log-every", train_log_every,
                      "stdout progress period in iterations (0 = silent)");

    // evaluate ------------------------------------------------------------
    CommonOpts eval_opts;
    std::string eval_checkpoint;
    std::uint64_t eval_seed_base = 10000;
    int eval_n_seeds = 20;
    bool eval_sample = false;
    std::uint64_t eval_noise_seed = 0;
    bool eval_trace = false;
    CLI::App* evaluate =
        app.add_subcommand("evaluate", "roll a trained policy over episodes");
    add_common_options(evaluate, eval_opts);
    evaluate->add_option("--checkpoint", eval_checkpoint, "checkpoint file")
        ->required();
    evaluate->add_option("--seed-base", eval_seed_base,
                         "first episode seed (episodes use base..base+n-1)");
    evaluate->add_option("--seeds", eval_n_seeds, "number of episode seeds")
        ->check(CLI::PositiveNumber);
    evaluate->add_flag(
        "--sample", eval_sample,
        "sample actions from the policy instead of taking the mean");
    evaluate->add_option("--noise-seed", eval_noise_seed,
                         "action-noise seed used with --sample");
    evaluate->add_flag(
        "--trace", eval_trace,
        "also write per-step power trace of one policy-mean episode");

    // compare -------------------------------------------------------------
    std::string cmp_baseline;
    std::string cmp_method;
    std::string cmp_out;
    CLI::App* compare = app.add_subcommand(
        "compare", "tabulate a policy report against a baseline report");
    compare->add_option("--baseline", cmp_baseline, "baseline report JSON")
        ->required();
    compare->add_option("--method", cmp_method, "policy report JSON")
        ->required();
    compare->add_option("--out", cmp_out,
                        "directory for comparison.json/.csv (optional)");

    // validate-data -------------------------------------------------------
    CommonOpts val_opts;
    CLI::App* validate = app.add_subcommand(
        "validate-data", "parse and validate every configured input file");
    add_common_options(validate, val_opts);

    try {
        app.parse(argc, argv);
        if (baseline->parsed()) {
            return cmd_baseline(base_opts, base_seed_base, base_n_seeds,
                                base_trace);
        }
        if (train->parsed()) {
            return cmd_train(train_opts, train_seed,
                             train_seed_opt->count() > 0, train_iterations,
                             train_resume, train_log_every);
        }
        if (evaluate->parsed()) {
            return cmd_evaluate(eval_opts, eval_checkpoint, eval_seed_base,
                                eval_n_seeds, eval_sample, eval_noise_seed,
                                eval_trace);
        }
        if (compare->parsed()) {
            return cmd_compare(cmp_baseline, cmp_method, cmp_out);
        }
        if (validate->parsed()) {
            return cmd_validate_data(val_opts);
        }
        return 2;  // unreachable: require_subcommand(1)
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
