#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metrosim/ppo.hpp"

namespace metrosim {

/// Deterministic training curve: iter, mean_ep_reward, pg/value/entropy
/// losses.  Wall-clock throughput goes to the separate timing CSV so this
/// file is bit-identical across equal-seed runs.
void write_train_log_csv(const std::string& path,
                         const std::vector<IterationLog>& logs);
void write_train_timing_csv(const std::string& path,
                            const std::vector<IterationLog>& logs);

/// One evaluation (or no-action baseline) campaign, aggregates plus the
/// per-episode rows.  noise_seed is recorded only for sampled-action runs.
void write_eval_report_json(const std::string& path, const std::string& label,
                            const EvalReport& report,
                            std::uint64_t world_fingerprint,
                            std::uint64_t noise_seed);
void write_episodes_csv(const std::string& path, const EvalReport& report);

/// One row of the comparison table, as persisted in a report JSON.
struct ReportRow {
    std::string label;
    int n_seeds = 0;
    bool deterministic = true;
    std::uint64_t world_fingerprint = 0;
    MetricStats e_traction_kwh;
    MetricStats e_regen_kwh;
    MetricStats e_total_kwh;
    MetricStats overlap_seconds;
    MetricStats total_time_s;
};

ReportRow report_row_from(const std::string& label, const EvalReport& report,
                          std::uint64_t world_fingerprint);

/// Read back the aggregate row of a report written by
/// write_eval_report_json.  Throws ValidationError on malformed files.
ReportRow load_report_json(const std::string& path);

/**
 * @brief Two-row comparison with the derived percentage deltas.
 *
 * reduction = (base − ours)/base on traction energy; increase =
 * (ours − base)/base on overlap seconds.  Display values are truncated —
 * not rounded — to one decimal, matching the convention of the reference
 * table the formulas are verified against.
 */
struct ComparisonReport {
    ReportRow baseline;
    ReportRow method;
    double traction_reduction_pct = 0.0;  ///< raw, untruncated
    double overlap_increase_pct = 0.0;    ///< raw, untruncated
};

/// Truncate a percentage toward zero at one decimal (10.959 -> 10.9).
double truncate_pct_1dp(double pct);

/// Build the comparison; refuses rows from different simulated worlds.
ComparisonReport make_comparison(const ReportRow& baseline,
                                 const ReportRow& method);

std::string comparison_to_text(const ComparisonReport& cr);
void write_comparison_json(const std::string& path,
                           const ComparisonReport& cr);
void write_comparison_csv(const std::string& path, const ComparisonReport& cr);

}  // namespace metrosim
