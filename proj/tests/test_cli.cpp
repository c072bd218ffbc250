// End-to-end tests of the metrosim binary: every subcommand is driven
// through a real process so flag parsing, exit codes, and on-disk artifacts
// are exercised exactly as an operator would hit them.
//
// The test runner provides METROSIM_BIN (path to the built binary) and
// METROSIM_DATA_DIR (the shipped dataset).

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "metrosim/config.hpp"

namespace fs = std::filesystem;

namespace {

std::string bin_path() {
    const char* p = std::getenv("METROSIM_BIN");
    REQUIRE_MESSAGE(p != nullptr, "METROSIM_BIN must point at the binary");
    return p;
}

std::string data_dir() {
    const char* p = std::getenv("METROSIM_DATA_DIR");
    REQUIRE_MESSAGE(p != nullptr, "METROSIM_DATA_DIR must be set");
    return p;
}

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Fresh scratch directory per test case, under the test's own CWD.
fs::path work_dir(const std::string& name) {
    fs::path dir = fs::path("cli_work") / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunResult run_cli(const std::string& args, const fs::path& dir) {
    const fs::path out_file = dir / "stdout.txt";
    const fs::path err_file = dir / "stderr.txt";
    const std::string cmd = bin_path() + " " + args + " > " +
                            out_file.string() + " 2> " + err_file.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

std::string line_arg() {
    return " --line " + (fs::path(data_dir()) / "xiamen_line1.csv").string();
}

/// A small training recipe so process-level tests stay fast; the learning
/// behaviour itself is covered in test_ppo.
std::string write_tiny_ppo(const fs::path& dir) {
    const fs::path p = dir / "tiny_ppo.json";
    std::ofstream f(p);
    f << "{\"n_steps\": 96, \"batch_size\": 32, \"hidden_size\": 32,\n"
      << " \"epochs_per_update\": 4, \"total_iterations\": 2}\n";
    return p.string();
}

void write_fixture_report(const fs::path& p, const std::string& label,
                          double e_traction, double overlap) {
    std::ofstream f(p);
    f << "{\n"
      << "  \"label\": \"" << label << "\",\n"
      << "  \"n_seeds\": 1,\n"
      << "  \"deterministic\": true,\n"
      << "  \"world_fingerprint\": 42,\n"
      << "  \"metrics\": {\n"
      << "    \"e_traction_kwh\": {\"mean\": " << e_traction
      << ", \"std\": 0},\n"
      << "    \"e_regen_kwh\": {\"mean\": 1, \"std\": 0},\n"
      << "    \"e_total_kwh\": {\"mean\": " << e_traction
      << ", \"std\": 0},\n"
      << "    \"overlap_seconds\": {\"mean\": " << overlap
      << ", \"std\": 0},\n"
      << "    \"total_time_s\": {\"mean\": 1, \"std\": 0}\n"
      << "  }\n"
      << "}\n";
}

}  // namespace

TEST_CASE("validate-data accepts the shipped dataset") {
    const fs::path dir = work_dir("validate");
    const RunResult r = run_cli("validate-data" + line_arg(), dir);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("OK") != std::string::npos);
    CHECK(r.out.find("world_fingerprint") != std::string::npos);
    CHECK(r.out.find("segments: 23") != std::string::npos);
}

TEST_CASE("a missing line file exits 2 and names the path") {
    const fs::path dir = work_dir("missing_line");
    const RunResult r =
        run_cli("validate-data --line " + (dir / "nope.csv").string(), dir);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("nope.csv") != std::string::npos);
}

TEST_CASE("an unknown flag exits 2") {
    const fs::path dir = work_dir("bad_flag");
    CHECK(run_cli("train --bogus-flag", dir).exit_code == 2);
    CHECK(run_cli("", dir).exit_code == 2);  // a subcommand is required
}

TEST_CASE("shipped default config files load to the built-in defaults") {
    using namespace metrosim;
    const fs::path d = data_dir();
    const TrainPhysics phys =
        load_physics_json((d / "default_physics.json").string());
    CHECK(physics_to_json_text(phys) ==
          physics_to_json_text(TrainPhysics::defaults()));
    const EnvConfig env = load_env_config_json((d / "default_env.json").string());
    CHECK(env_config_to_json_text(env) == env_config_to_json_text(EnvConfig{}));
    const PpoConfig ppo = load_ppo_config_json((d / "default_ppo.json").string());
    CHECK(ppo_config_to_json_text(ppo) == ppo_config_to_json_text(PpoConfig{}));
}

TEST_CASE("train is byte-identical across runs with the same seed") {
    const fs::path dir = work_dir("train_determinism");
    const std::string ppo = write_tiny_ppo(dir);
    const std::string common =
        "train --seed 7 --ppo " + ppo + " --log-every 0" + line_arg();
    const RunResult a =
        run_cli(common + " --out " + (dir / "a").string(), dir);
    const RunResult b =
        run_cli(common + " --out " + (dir / "b").string(), dir);
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    const std::string log_a = slurp(dir / "a" / "train_log.csv");
    CHECK(log_a == slurp(dir / "b" / "train_log.csv"));
    CHECK(log_a.find("iter,mean_ep_reward,") == 0);
    CHECK(slurp(dir / "a" / "checkpoint.bin") ==
          slurp(dir / "b" / "checkpoint.bin"));
}

TEST_CASE("resume continues the iteration counter under the same recipe") {
    const fs::path dir = work_dir("resume");
    const std::string ppo = write_tiny_ppo(dir);
    const std::string first = "train --seed 3 --ppo " + ppo +
                              " --log-every 0 --out " +
                              (dir / "first").string() + line_arg();
    REQUIRE(run_cli(first, dir).exit_code == 0);

    const std::string second =
        "train --seed 3 --ppo " + ppo + " --iterations 4 --resume " +
        (dir / "first" / "checkpoint.bin").string() + " --out " +
        (dir / "second").string() + line_arg();
    const RunResult r = run_cli(second, dir);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("resumed from") != std::string::npos);
    // the continued run logs iterations 3 and 4 only
    const std::string log = slurp(dir / "second" / "train_log.csv");
    CHECK(log.find("\n3,") != std::string::npos);
    CHECK(log.find("\n1,") == std::string::npos);

    // resuming under a different recipe is refused
    const fs::path other = dir / "other_ppo.json";
    {
        std::ofstream f(other);
        f << "{\"n_steps\": 96, \"batch_size\": 32, \"hidden_size\": 32,\n"
          << " \"epochs_per_update\": 4, \"gamma\": 0.5}\n";
    }
    const RunResult bad = run_cli(
        "train --seed 3 --ppo " + other.string() + " --resume " +
            (dir / "first" / "checkpoint.bin").string() + " --out " +
            (dir / "refused").string() + line_arg(),
        dir);
    CHECK(bad.exit_code == 2);
    CHECK(bad.err.find("different configuration") != std::string::npos);
}

TEST_CASE("baseline, evaluate, and compare chain into one another") {
    const fs::path dir = work_dir("pipeline");
    const std::string ppo = write_tiny_ppo(dir);

    REQUIRE(run_cli("train --seed 5 --ppo " + ppo + " --log-every 0 --out " +
                        (dir / "train").string() + line_arg(),
                    dir)
                .exit_code == 0);

    const RunResult base =
        run_cli("baseline --seeds 2 --seed-base 100 --out " +
                    (dir / "base").string() + line_arg(),
                dir);
    REQUIRE(base.exit_code == 0);
    CHECK(base.out.find("no-action") != std::string::npos);

    const RunResult ev = run_cli(
        "evaluate --checkpoint " + (dir / "train" / "checkpoint.bin").string() +
            " --seeds 2 --seed-base 100 --out " + (dir / "eval").string() +
            line_arg(),
        dir);
    REQUIRE(ev.exit_code == 0);
    CHECK(fs::exists(dir / "eval" / "eval_episodes.csv"));

    const RunResult cmp = run_cli(
        "compare --baseline " + (dir / "base" / "baseline_report.json").string() +
            " --method " + (dir / "eval" / "eval_report.json").string() +
            " --out " + (dir / "cmp").string(),
        dir);
    CHECK(cmp.exit_code == 0);
    CHECK(cmp.out.find("traction_reduction_pct") != std::string::npos);
    CHECK(fs::exists(dir / "cmp" / "comparison.json"));
    CHECK(fs::exists(dir / "cmp" / "comparison.csv"));
}

TEST_CASE("evaluate refuses a checkpoint trained on a different fleet") {
    const fs::path dir = work_dir("wrong_fleet");
    const std::string ppo = write_tiny_ppo(dir);
    REQUIRE(run_cli("train --seed 2 --ppo " + ppo + " --log-every 0 --out " +
                        (dir / "train").string() + line_arg(),
                    dir)
                .exit_code == 0);
    const fs::path env = dir / "small_env.json";
    {
        std::ofstream f(env);
        f << "{\"fleet\": {\"num_trains\": 4, \"trains_up\": 2, "
          << "\"trains_down\": 2}}\n";
    }
    const RunResult r = run_cli(
        "evaluate --checkpoint " + (dir / "train" / "checkpoint.bin").string() +
            " --env " + env.string() + " --out " + (dir / "x").string() +
            line_arg(),
        dir);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("observation size") != std::string::npos);
}

TEST_CASE("compare refuses reports from different worlds") {
    const fs::path dir = work_dir("cross_world");
    write_fixture_report(dir / "a.json", "no-action", 100.0, 10.0);
    write_fixture_report(dir / "b.json", "ppo-policy", 90.0, 12.0);
    // same fingerprint: accepted
    CHECK(run_cli("compare --baseline " + (dir / "a.json").string() +
                      " --method " + (dir / "b.json").string(),
                  dir)
              .exit_code == 0);
    // perturb the method fingerprint: refused
    std::string text = slurp(dir / "b.json");
    const auto pos = text.find("\"world_fingerprint\": 42");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 23, "\"world_fingerprint\": 43");
    std::ofstream(dir / "b.json") << text;
    const RunResult r =
        run_cli("compare --baseline " + (dir / "a.json").string() +
                    " --method " + (dir / "b.json").string(),
                dir);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("different worlds") != std::string::npos);
}

TEST_CASE("compare reports the published reduction figures for the "
          "published energies and overlap times") {
    const fs::path dir = work_dir("published_figures");
    write_fixture_report(dir / "base.json", "no-action", 378862.9, 4734.1);
    write_fixture_report(dir / "ppo.json", "ppo-policy", 337342.6, 7006.2);
    const RunResult r =
        run_cli("compare --baseline " + (dir / "base.json").string() +
                    " --method " + (dir / "ppo.json").string(),
                dir);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("traction_reduction_pct,10.9") != std::string::npos);
    CHECK(r.out.find("overlap_increase_pct,47.9") != std::string::npos);
}
