#pragma once

// Success rate, success-weighted relative path length and optimality rates
// over task episodes, plus a bounded concurrent suite runner.

#include "unidomain/oracle.hpp"
#include "unidomain/task_plan.hpp"

#include <atomic>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace unidomain::eval {

struct Episode {
    std::string task_id;
    std::string domain;
    bool success = false;
    std::size_t cost = 0;                // 0 when failed
    std::optional<std::size_t> optimal;  // unknown when the ground truth could not be solved
    double thinking_time = 0.0;
    std::size_t llm_calls = 0;
    bool satisficing_fallback = false;
    std::string error;

    /// Throws Error when success/cost disagree or cost beats a known optimum.
    void validate() const;
    nlohmann::json to_json() const;
};

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0; // sample std / sqrt(N); 0 for a single value
};

MeanStderr mean_stderr(const std::vector<double> &values);

// All three throw Error("no episodes") on an empty list. Episodes with an
// unknown optimum contribute 0 to spl and or_k.
double success_rate(const std::vector<Episode> &episodes);
double spl(const std::vector<Episode> &episodes);
double or_k(const std::vector<Episode> &episodes, std::size_t K);

struct Summary {
    std::size_t n = 0;
    double sr = 0.0;
    double spl = 0.0;
    double or2 = 0.0;
    double or1 = 0.0;
    double or0 = 0.0;
    std::size_t unknown_optimal = 0;
};

Summary summarize(const std::vector<Episode> &episodes);

struct Report {
    std::string label; // ablation tag, "full" by default
    Summary overall;
    MeanStderr thinking_time;
    MeanStderr llm_calls;
    std::vector<std::pair<std::string, Summary>> per_domain; // sorted by domain name
    std::vector<Episode> episodes;

    nlohmann::json to_json() const;
};

Report make_report(std::vector<Episode> episodes, std::string label = "full");

enum class ReportFormat { json, csv, markdown };
ReportFormat parse_report_format(const std::string &text);

/// CSV has one row per episode with the columns
/// task_id,domain,success,cost,optimal_cost,thinking_time,llm_calls,satisficing_fallback,error.
/// Markdown has one row for the whole suite and one per domain.
std::string emit_report(const Report &report, ReportFormat format);

/// JSON list of task objects; relative paths resolve against the file's directory.
std::vector<task::TaskSpec> load_suite(const std::filesystem::path &path);

struct SuiteConfig {
    task::PlanConfig plan;
    std::size_t parallelism = 4;
    std::string label = "full";
    /// Judges tasks without a ground-truth problem; such tasks fail when unset.
    std::function<bool(const task::TaskSpec &, const pddl::Plan &)> validator;
    /// Tasks not yet started when this turns true are skipped.
    const std::atomic<bool> *cancel = nullptr;
};

std::string ablation_label(const task::PlanConfig &cfg);

struct SuiteResult {
    std::vector<Episode> episodes;     // completed tasks, in suite order
    std::vector<task::PlanTrace> traces;
    bool cancelled = false;

    Report report(const std::string &label) const { return make_report(episodes, label); }
};

/// Runs every task under its own oracle session. A failing task becomes a
/// failed episode; the suite itself never throws for per-task errors.
SuiteResult run_suite(oracle::OracleClient &client, const pddl::Domain &fused,
                      const std::vector<task::TaskSpec> &tasks, const SuiteConfig &cfg);

/// Scores one finished trace against its ground truth.
Episode score_episode(const pddl::Domain &fused, const task::TaskSpec &spec, const task::PlanTrace &trace,
                      const SuiteConfig &cfg);

} // namespace unidomain::eval
