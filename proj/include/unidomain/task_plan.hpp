#pragma once

// Online planning for one task: group the fused domain's predicates, ask for
// an initial problem from the scene image and instruction, keep only the
// operators that touch the predicates it mentions, ask again with that compact
// domain, then solve the refined problem against the full fused domain.

#include "unidomain/oracle.hpp"
#include "unidomain/pddl.hpp"
#include "unidomain/planner.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace unidomain::task {

struct PredicateGroups {
    std::vector<std::string> object_category;
    std::vector<std::string> state_attribute; // also the default bucket
    std::vector<std::string> spatial_relation;
    std::vector<std::string> affordance;
    std::vector<std::string> warnings;

    static const std::vector<std::string> &keys();
    std::vector<std::string> &group(const std::string &key);
    const std::vector<std::string> &group(const std::string &key) const;
    std::size_t size() const;

    nlohmann::json to_json() const;
    static PredicateGroups from_json(const nlohmann::json &doc);
};

/// Repairs a raw assignment into a partition of `predicates`: unknown names
/// are dropped, duplicates keep their first group, missing names go to
/// state_attribute. Every repair adds a warning.
PredicateGroups partition(const nlohmann::json &raw, const std::vector<std::string> &predicates);

struct TaskSpec {
    std::string id;
    std::string instruction;
    std::filesystem::path image;
    std::optional<std::filesystem::path> gt_problem;

    /// Paths are resolved relative to `base` when relative.
    static TaskSpec from_json(const nlohmann::json &doc, const std::filesystem::path &base = {});
    static TaskSpec load(const std::filesystem::path &path);
    void validate() const;
};

struct FilterResult {
    std::set<std::string> p0;
    std::set<std::string> o_pre;
    std::set<std::string> o_eff;
    std::set<std::string> o_reduced;
    pddl::Domain compact;
};

struct PlanConfig {
    std::size_t R_parse = 3;
    bool grouping = true;  // w/o-grouping lists predicates flat
    bool filtering = true; // w/o-filtering uses the initial problem directly
    planner::SearchLimit limits{1'000'000, 60.0, planner::HeuristicKind::hmax};
    planner::GroundLimit ground_limit;
};

PredicateGroups group_predicates(oracle::OracleSession &session, const pddl::Domain &dom, std::size_t R_parse = 3);

/// `groups` may be null, in which case the prompt lists predicates without grouping.
pddl::Problem gen_initial_problem(oracle::OracleSession &session, const pddl::Domain &dom,
                                  const PredicateGroups *groups, const TaskSpec &task, std::size_t R_parse = 3);

FilterResult filter_domain(const pddl::Domain &dom, const pddl::Problem &p0);

/// The reply must parse against `compact` and validate against `full`.
pddl::Problem gen_refined_problem(oracle::OracleSession &session, const pddl::Domain &compact,
                                  const pddl::Domain &full, const TaskSpec &task, std::size_t R_parse = 3);

struct PlanTrace {
    std::string task_id;
    std::optional<PredicateGroups> groups;
    std::optional<pddl::Problem> initial_problem;
    std::optional<FilterResult> filter;
    std::optional<pddl::Problem> refined_problem;
    planner::SolveOutcome outcome = planner::SolveOutcome::unsolvable;
    bool satisficing_fallback = false;
    std::size_t expanded = 0;
    std::optional<pddl::Plan> plan;
    oracle::UsageCounters usage;
    std::vector<oracle::TraceEntry> calls;
    std::string error; // stage-tagged message when the pipeline stopped early

    /// Deterministic under replay, where latencies come from the transcript.
    nlohmann::json to_json() const;
};

/// Runs the pipeline. `groups` is computed when null and grouping is enabled.
/// Upstream failures propagate as StageError after the partial trace, if
/// requested, is filled in. The trace has no plan when the planner finds none.
PlanTrace plan_task(oracle::OracleSession &session, const pddl::Domain &fused, const PredicateGroups *groups,
                    const TaskSpec &task, const PlanConfig &cfg, PlanTrace *partial = nullptr);

} // namespace unidomain::task
