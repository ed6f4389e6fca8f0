#include "unidomain/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace unidomain::eval {

namespace {

void require_episodes(const std::vector<Episode> &episodes) {
    if (episodes.empty())
        throw Error("no episodes");
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string csv_field(const std::string &s) {
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s)
        out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

nlohmann::json summary_json(const Summary &s) {
    return {{"n", s.n},     {"SR", s.sr},       {"SPL", s.spl},
            {"OR(2)", s.or2}, {"OR(1)", s.or1}, {"OR(0)", s.or0},
            {"unknown_optimal", s.unknown_optimal}};
}

std::string markdown_row(const std::string &name, const Summary &s) {
    return "| " + name + " | " + std::to_string(s.n) + " | " + fixed(s.sr) + " | " + fixed(s.spl) + " | " +
           fixed(s.or2) + " | " + fixed(s.or1) + " | " + fixed(s.or0) + " |";
}

} // namespace

void Episode::validate() const {
    if (!success && cost != 0)
        throw Error("episode " + task_id + ": failed episodes carry cost 0");
    if (success && optimal && cost < *optimal)
        throw Error("episode " + task_id + ": cost below the optimum");
}

nlohmann::json Episode::to_json() const {
    return {{"task_id", task_id},
            {"domain", domain},
            {"success", success},
            {"cost", cost},
            {"optimal_cost", optimal ? nlohmann::json(*optimal) : nlohmann::json()},
            {"thinking_time", thinking_time},
            {"llm_calls", llm_calls},
            {"satisficing_fallback", satisficing_fallback},
            {"error", error}};
}

MeanStderr mean_stderr(const std::vector<double> &values) {
    MeanStderr out;
    if (values.empty())
        return out;
    double sum = 0.0;
    for (double v : values)
        sum += v;
    out.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values)
            ss += (v - out.mean) * (v - out.mean);
        double n = static_cast<double>(values.size());
        out.stderr_ = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    return out;
}

double success_rate(const std::vector<Episode> &episodes) {
    require_episodes(episodes);
    double hits = 0.0;
    for (const auto &e : episodes)
        hits += e.success ? 1.0 : 0.0;
    return hits / static_cast<double>(episodes.size());
}

double spl(const std::vector<Episode> &episodes) {
    require_episodes(episodes);
    double sum = 0.0;
    for (const auto &e : episodes) {
        if (!e.success || !e.optimal)
            continue;
        // A goal that already holds has c = c* = 0 and counts as a perfect path.
        sum += e.cost == 0 ? 1.0 : static_cast<double>(*e.optimal) / static_cast<double>(e.cost);
    }
    return sum / static_cast<double>(episodes.size());
}

double or_k(const std::vector<Episode> &episodes, std::size_t K) {
    require_episodes(episodes);
    double hits = 0.0;
    for (const auto &e : episodes)
        if (e.success && e.optimal && e.cost > 0 && e.cost <= *e.optimal + K)
            hits += 1.0;
    return hits / static_cast<double>(episodes.size());
}

Summary summarize(const std::vector<Episode> &episodes) {
    Summary s;
    s.n = episodes.size();
    s.sr = success_rate(episodes);
    s.spl = spl(episodes);
    s.or2 = or_k(episodes, 2);
    s.or1 = or_k(episodes, 1);
    s.or0 = or_k(episodes, 0);
    for (const auto &e : episodes)
        s.unknown_optimal += e.optimal ? 0 : 1;
    return s;
}

Report make_report(std::vector<Episode> episodes, std::string label) {
    require_episodes(episodes);
    Report r;
    r.label = std::move(label);
    r.overall = summarize(episodes);
    std::vector<double> times, calls;
    std::map<std::string, std::vector<Episode>> by_domain;
    for (const auto &e : episodes) {
        times.push_back(e.thinking_time);
        calls.push_back(static_cast<double>(e.llm_calls));
        by_domain[e.domain].push_back(e);
    }
    r.thinking_time = mean_stderr(times);
    r.llm_calls = mean_stderr(calls);
    for (const auto &[domain, eps] : by_domain)
        r.per_domain.emplace_back(domain, summarize(eps));
    r.episodes = std::move(episodes);
    return r;
}

nlohmann::json Report::to_json() const {
    nlohmann::json j;
    j["label"] = label;
    j["overall"] = summary_json(overall);
    j["thinking_time"] = {{"mean", thinking_time.mean}, {"stderr", thinking_time.stderr_}};
    j["llm_calls"] = {{"mean", llm_calls.mean}, {"stderr", llm_calls.stderr_}};
    j["per_domain"] = nlohmann::json::object();
    for (const auto &[domain, s] : per_domain)
        j["per_domain"][domain] = summary_json(s);
    j["episodes"] = nlohmann::json::array();
    for (const auto &e : episodes)
        j["episodes"].push_back(e.to_json());
    return j;
}

ReportFormat parse_report_format(const std::string &text) {
    if (text == "json")
        return ReportFormat::json;
    if (text == "csv")
        return ReportFormat::csv;
    if (text == "markdown" || text == "md")
        return ReportFormat::markdown;
    throw Error("unknown report format '" + text + "' (json, csv, markdown)");
}

std::string emit_report(const Report &report, ReportFormat format) {
    require_episodes(report.episodes);
    std::ostringstream out;
    switch (format) {
    case ReportFormat::json:
        out << report.to_json().dump(2) << "\n";
        break;
    case ReportFormat::csv:
        out << "task_id,domain,success,cost,optimal_cost,thinking_time,llm_calls,satisficing_fallback,error\n";
        for (const auto &e : report.episodes)
            out << csv_field(e.task_id) << "," << csv_field(e.domain) << "," << (e.success ? 1 : 0) << ","
                << e.cost << "," << (e.optimal ? std::to_string(*e.optimal) : "") << "," << fixed(e.thinking_time, 6)
                << "," << e.llm_calls << "," << (e.satisficing_fallback ? 1 : 0) << "," << csv_field(e.error)
                << "\n";
        break;
    case ReportFormat::markdown:
        out << "| " << report.label << " | N | SR | SPL | OR(2) | OR(1) | OR(0) |\n";
        out << "|---|---|---|---|---|---|---|\n";
        out << markdown_row("all", report.overall) << "\n";
        for (const auto &[domain, s] : report.per_domain)
            out << markdown_row(domain, s) << "\n";
        out << "\nthinking time " << fixed(report.thinking_time.mean, 3) << " ± "
            << fixed(report.thinking_time.stderr_, 3) << " s, LLM calls " << fixed(report.llm_calls.mean, 2)
            << " ± " << fixed(report.llm_calls.stderr_, 2) << "\n";
        break;
    }
    return out.str();
}

std::vector<task::TaskSpec> load_suite(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open suite " + path.string());
    auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_array())
        throw Error(path.string() + ": expected a JSON list of tasks");
    std::vector<task::TaskSpec> tasks;
    for (const auto &item : doc)
        tasks.push_back(task::TaskSpec::from_json(item, path.parent_path()));
    if (tasks.empty())
        throw Error(path.string() + ": no tasks");
    return tasks;
}

std::string ablation_label(const task::PlanConfig &cfg) {
    if (cfg.grouping && cfg.filtering)
        return "full";
    std::string label;
    if (!cfg.grouping)
        label += "no-grouping";
    if (!cfg.filtering)
        label += std::string(label.empty() ? "" : "+") + "no-filtering";
    return label;
}

Episode score_episode(const pddl::Domain &fused, const task::TaskSpec &spec, const task::PlanTrace &trace,
                      const SuiteConfig &cfg) {
    Episode e;
    e.task_id = spec.id;
    e.domain = fused.name;
    e.thinking_time = trace.usage.thinking_time;
    e.llm_calls = trace.usage.n_calls;
    e.satisficing_fallback = trace.satisficing_fallback;
    e.error = trace.error;
    std::optional<pddl::Problem> gt;
    if (spec.gt_problem) {
        std::ifstream in(*spec.gt_problem);
        if (!in) {
            e.error = "cannot open ground truth " + spec.gt_problem->string();
            return e;
        }
        std::stringstream ss;
        ss << in.rdbuf();
        try {
            gt = pddl::parse_problem(ss.str(), fused);
        } catch (const std::exception &ex) {
            e.error = std::string("ground truth: ") + ex.what();
            return e;
        }
        auto best = planner::optimal_cost(fused, *gt, cfg.plan.limits, cfg.plan.ground_limit);
        if (best.known())
            e.optimal = best.cost;
    }
    if (!trace.plan) {
        if (e.error.empty())
            e.error = std::string("planner: ") + planner::to_string(trace.outcome);
        return e;
    }
    bool ok = false;
    if (gt) {
        try {
            ok = planner::validate_plan(fused, *gt, *trace.plan).valid;
        } catch (const std::exception &ex) {
            e.error = ex.what();
        }
    } else if (cfg.validator) {
        ok = cfg.validator(spec, *trace.plan);
    } else {
        e.error = "no ground truth for " + spec.id;
    }
    if (ok) {
        e.success = true;
        e.cost = trace.plan->cost();
        if (e.optimal && e.cost < *e.optimal)
            e.optimal.reset(); // the ground truth disagrees with a validated plan; do not trust it
    } else if (e.error.empty()) {
        e.error = "plan does not reach the ground-truth goal";
    }
    return e;
}

SuiteResult run_suite(oracle::OracleClient &client, const pddl::Domain &fused,
                      const std::vector<task::TaskSpec> &tasks, const SuiteConfig &cfg) {
    std::vector<std::optional<Episode>> episodes(tasks.size());
    std::vector<std::optional<task::PlanTrace>> traces(tasks.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> skipped{false};

    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            if (cfg.cancel && cfg.cancel->load()) {
                skipped = true;
                continue;
            }
            oracle::OracleSession session(client);
            task::PlanTrace trace;
            try {
                trace = task::plan_task(session, fused, nullptr, tasks[i], cfg.plan, &trace);
            } catch (const std::exception &ex) {
                // plan_task fills the partial trace before rethrowing.
                if (trace.error.empty())
                    trace.error = ex.what();
                trace.task_id = tasks[i].id;
            }
            episodes[i] = score_episode(fused, tasks[i], trace, cfg);
            traces[i] = std::move(trace);
        }
    };
    std::size_t n_threads = std::clamp<std::size_t>(cfg.parallelism, 1, std::max<std::size_t>(tasks.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t)
        pool.emplace_back(worker);
    for (auto &th : pool)
        th.join();

    SuiteResult result;
    result.cancelled = skipped;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (!episodes[i])
            continue;
        result.episodes.push_back(std::move(*episodes[i]));
        result.traces.push_back(std::move(*traces[i]));
    }
    return result;
}

} // namespace unidomain::eval
