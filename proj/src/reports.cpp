#include "metrosim/reports.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "metrosim/errors.hpp"

namespace metrosim {
namespace {

using nlohmann::json;

/// Shortest round-trip text for a double: CSV rows reload to the exact
/// same values, and equal-seed runs emit byte-identical files.
std::string format_number(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ValidationError("cannot write file: " + path);
    }
    return out;
}

void finish_out(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) {
        throw ValidationError("failed writing file: " + path);
    }
}

double median_of(std::vector<double> xs) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

json stats_to_json(const MetricStats& s, const std::vector<double>& samples) {
    return json{{"mean", s.mean},
                {"std", s.stdev},
                {"median", median_of(samples)}};
}

MetricStats stats_from_json(const json& j, const std::string& path,
                            const char* key) {
    if (!j.contains(key)) {
        throw ValidationError(path + ": report is missing metric '" +
                              std::string(key) + "'");
    }
    MetricStats s;
    try {
        const json& m = j.at(key);
        m.at("mean").get_to(s.mean);
        m.at("std").get_to(s.stdev);
    } catch (const json::exception& e) {
        throw ValidationError(path + ": metric '" + std::string(key) +
                              "': " + e.what());
    }
    return s;
}

}  // namespace

void write_train_log_csv(const std::string& path,
                         const std::vector<IterationLog>& logs) {
    std::ofstream out = open_out(path);
    out << "iter,mean_ep_reward,pg_loss,value_loss,entropy_loss\n";
    for (const IterationLog& row : logs) {
        out << row.iteration << ',' << format_number(row.mean_ep_reward)
            << ',' << format_number(row.pg_loss) << ','
            << format_number(row.value_loss) << ','
            << format_number(row.entropy_loss) << '\n';
    }
    finish_out(out, path);
}

void write_train_timing_csv(const std::string& path,
                            const std::vector<IterationLog>& logs) {
    std::ofstream out = open_out(path);
    out << "iter,steps_per_sec\n";
    for (const IterationLog& row : logs) {
        out << row.iteration << ',' << format_number(row.steps_per_sec)
            << '\n';
    }
    finish_out(out, path);
}

void write_eval_report_json(const std::string& path, const std::string& label,
                            const EvalReport& report,
                            std::uint64_t world_fingerprint,
                            std::uint64_t noise_seed) {
    std::vector<double> et, er, etot, ov, tt;
    json episodes = json::array();
    for (std::size_t i = 0; i < report.episodes.size(); ++i) {
        const EpisodeSummary& ep = report.episodes[i];
        et.push_back(ep.ledger.e_traction_kwh);
        er.push_back(ep.ledger.e_regen_kwh);
        etot.push_back(ep.ledger.e_total_kwh());
        ov.push_back(ep.ledger.overlap_seconds());
        tt.push_back(ep.total_time_s);
        episodes.push_back(json{
            {"seed", report.seeds[i]},
            {"e_traction_kwh", ep.ledger.e_traction_kwh},
            {"e_regen_kwh", ep.ledger.e_regen_kwh},
            {"e_total_kwh", ep.ledger.e_total_kwh()},
            {"overlap_seconds", ep.ledger.overlap_seconds()},
            {"total_time_s", ep.total_time_s},
            {"decisions", ep.decisions},
            {"overtake_events", ep.overtake_events},
            {"reward_sum", ep.reward_sum},
        });
    }
    json doc{
        {"label", label},
        {"world_fingerprint", world_fingerprint},
        {"deterministic", report.deterministic},
        {"n_seeds", static_cast<int>(report.seeds.size())},
        {"seeds", report.seeds},
        {"metrics",
         {{"e_traction_kwh", stats_to_json(report.e_traction_kwh, et)},
          {"e_regen_kwh", stats_to_json(report.e_regen_kwh, er)},
          {"e_total_kwh", stats_to_json(report.e_total_kwh, etot)},
          {"overlap_seconds", stats_to_json(report.overlap_seconds, ov)},
          {"total_time_s", stats_to_json(report.total_time_s, tt)}}},
        {"episodes", episodes},
    };
    if (!report.deterministic) {
        doc["noise_seed"] = noise_seed;
    }
    std::ofstream out = open_out(path);
    out << doc.dump(2) << '\n';
    finish_out(out, path);
}

void write_episodes_csv(const std::string& path, const EvalReport& report) {
    std::ofstream out = open_out(path);
    out << "seed,e_traction_kwh,e_regen_kwh,e_total_kwh,overlap_seconds,"
           "total_time_s,decisions,overtake_events,reward_sum\n";
    for (std::size_t i = 0; i < report.episodes.size(); ++i) {
        const EpisodeSummary& ep = report.episodes[i];
        out << report.seeds[i] << ','
            << format_number(ep.ledger.e_traction_kwh) << ','
            << format_number(ep.ledger.e_regen_kwh) << ','
            << format_number(ep.ledger.e_total_kwh()) << ','
            << format_number(ep.ledger.overlap_seconds()) << ','
            << format_number(ep.total_time_s) << ',' << ep.decisions << ','
            << ep.overtake_events << ',' << format_number(ep.reward_sum)
            << '\n';
    }
    finish_out(out, path);
}

ReportRow report_row_from(const std::string& label, const EvalReport& report,
                          std::uint64_t world_fingerprint) {
    ReportRow row;
    row.label = label;
    row.n_seeds = static_cast<int>(report.seeds.size());
    row.deterministic = report.deterministic;
    row.world_fingerprint = world_fingerprint;
    row.e_traction_kwh = report.e_traction_kwh;
    row.e_regen_kwh = report.e_regen_kwh;
    row.e_total_kwh = report.e_total_kwh;
    row.overlap_seconds = report.overlap_seconds;
    row.total_time_s = report.total_time_s;
    return row;
}

ReportRow load_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open report: " + path);
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
    ReportRow row;
    try {
        doc.at("label").get_to(row.label);
        doc.at("n_seeds").get_to(row.n_seeds);
        doc.at("deterministic").get_to(row.deterministic);
        doc.at("world_fingerprint").get_to(row.world_fingerprint);
    } catch (const json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
    if (!doc.contains("metrics")) {
        throw ValidationError(path + ": report has no 'metrics' object");
    }
    const json& m = doc.at("metrics");
    row.e_traction_kwh = stats_from_json(m, path, "e_traction_kwh");
    row.e_regen_kwh = stats_from_json(m, path, "e_regen_kwh");
    row.e_total_kwh = stats_from_json(m, path, "e_total_kwh");
    row.overlap_seconds = stats_from_json(m, path, "overlap_seconds");
    row.total_time_s = stats_from_json(m, path, "total_time_s");
    return row;
}

double truncate_pct_1dp(double pct) {
    return std::trunc(pct * 10.0) / 10.0;
}

ComparisonReport make_comparison(const ReportRow& baseline,
                                 const ReportRow& method) {
    if (baseline.world_fingerprint != method.world_fingerprint) {
        std::ostringstream msg;
        msg << "comparison refused: reports come from different worlds "
               "(fingerprint "
            << baseline.world_fingerprint << " vs "
            << method.world_fingerprint
            << "); rerun both with identical line/physics/env configs";
        throw ValidationError(msg.str());
    }
    if (baseline.e_traction_kwh.mean <= 0.0 ||
        baseline.overlap_seconds.mean <= 0.0) {
        throw ValidationError(
            "comparison refused: baseline traction energy and overlap must "
            "be positive");
    }
    ComparisonReport cr;
    cr.baseline = baseline;
    cr.method = method;
    cr.traction_reduction_pct =
        (baseline.e_traction_kwh.mean - method.e_traction_kwh.mean) /
        baseline.e_traction_kwh.mean * 100.0;
    cr.overlap_increase_pct =
        (method.overlap_seconds.mean - baseline.overlap_seconds.mean) /
        baseline.overlap_seconds.mean * 100.0;
    return cr;
}

namespace {

void append_row_text(std::ostringstream& out, const ReportRow& r) {
    out << r.label << "," << format_number(r.e_traction_kwh.mean) << ","
        << format_number(r.e_regen_kwh.mean) << ","
        << format_number(r.e_total_kwh.mean) << ","
        << format_number(r.overlap_seconds.mean) << ","
        << format_number(r.total_time_s.mean) << "," << r.n_seeds << ","
        << format_number(r.e_total_kwh.stdev) << ","
        << format_number(r.overlap_seconds.stdev) << '\n';
}

json row_to_json(const ReportRow& r) {
    return json{
        {"label", r.label},
        {"n_seeds", r.n_seeds},
        {"deterministic", r.deterministic},
        {"world_fingerprint", r.world_fingerprint},
        {"e_traction_kwh", {{"mean", r.e_traction_kwh.mean},
                            {"std", r.e_traction_kwh.stdev}}},
        {"e_regen_kwh", {{"mean", r.e_regen_kwh.mean},
                         {"std", r.e_regen_kwh.stdev}}},
        {"e_total_kwh", {{"mean", r.e_total_kwh.mean},
                         {"std", r.e_total_kwh.stdev}}},
        {"overlap_seconds", {{"mean", r.overlap_seconds.mean},
                             {"std", r.overlap_seconds.stdev}}},
        {"total_time_s", {{"mean", r.total_time_s.mean},
                          {"std", r.total_time_s.stdev}}},
    };
}

std::string pct_text(double truncated) {
    // One forced decimal: 10.9 -> "10.9", 48 -> "48.0".
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(1);
    out << truncated;
    return out.str();
}

}  // namespace

std::string comparison_to_text(const ComparisonReport& cr) {
    std::ostringstream out;
    out << "label,E_T_kwh,E_R_kwh,E_total_kwh,overlap_s,total_time_s,"
           "n_seeds,E_total_std,overlap_std\n";
    append_row_text(out, cr.baseline);
    append_row_text(out, cr.method);
    out << "traction_reduction_pct,"
        << pct_text(truncate_pct_1dp(cr.traction_reduction_pct)) << '\n';
    out << "overlap_increase_pct,"
        << pct_text(truncate_pct_1dp(cr.overlap_increase_pct)) << '\n';
    return out.str();
}

void write_comparison_json(const std::string& path,
                           const ComparisonReport& cr) {
    const json doc{
        {"baseline", row_to_json(cr.baseline)},
        {"method", row_to_json(cr.method)},
        {"traction_reduction_pct_raw", cr.traction_reduction_pct},
        {"traction_reduction_pct",
         truncate_pct_1dp(cr.traction_reduction_pct)},
        {"overlap_increase_pct_raw", cr.overlap_increase_pct},
        {"overlap_increase_pct", truncate_pct_1dp(cr.overlap_increase_pct)},
    };
    std::ofstream out = open_out(path);
    out << doc.dump(2) << '\n';
    finish_out(out, path);
}

void write_comparison_csv(const std::string& path,
                          const ComparisonReport& cr) {
    std::ofstream out = open_out(path);
    out << comparison_to_text(cr);
    finish_out(out, path);
}

}  // namespace metrosim
