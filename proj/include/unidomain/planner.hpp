#pragma once

#include "unidomain/pddl.hpp"

#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace unidomain::planner {

using AtomId = std::uint32_t;

class GroundingExplosion : public Error {
public:
    explicit GroundingExplosion(std::size_t limit)
        : Error("grounding exceeded " + std::to_string(limit) + " actions"), limit_(limit) {}
    std::size_t limit() const { return limit_; }

private:
    std::size_t limit_;
};

class UnknownOperator : public Error {
public:
    explicit UnknownOperator(const std::string &name) : Error("unknown operator '" + name + "'"), name_(name) {}
    const std::string &name() const { return name_; }

private:
    std::string name_;
};

struct GroundLimit {
    std::size_t max_actions = 200'000;
    /// When false every type-respecting substitution is kept (used to check
    /// that reachability pruning never changes search outcomes).
    bool prune_unreachable = true;
};

struct GroundedAction {
    std::string name;
    std::vector<std::string> args;
    std::vector<AtomId> pre;
    std::vector<AtomId> neg_pre;
    std::vector<AtomId> add;
    std::vector<AtomId> del;

    std::string str() const;
};

struct GroundedTask {
    std::vector<pddl::Atom> atoms;
    /// Atoms with index >= num_reachable are goal atoms outside the
    /// delete-relaxation reachable set.
    std::size_t num_reachable = 0;
    std::vector<GroundedAction> actions;
    std::vector<AtomId> init;
    std::vector<AtomId> goal_pos;
    std::vector<AtomId> goal_neg;

    std::optional<AtomId> find_atom(const pddl::Atom &atom) const;
    /// Goal atoms outside the relaxed-reachable set.
    std::vector<pddl::Atom> unreachable_goal_atoms() const;
};

GroundedTask ground(const pddl::Domain &domain, const pddl::Problem &problem, const GroundLimit &limits = {});

enum class SearchMode { optimal, satisficing };
enum class HeuristicKind { hmax, hadd, blind };

struct SearchLimit {
    std::size_t max_expansions = 1'000'000;
    double max_seconds = 60.0;
    /// Optimal mode only; `blind` is the fallback when h_max is unwanted.
    HeuristicKind optimal_heuristic = HeuristicKind::hmax;
};

enum class SolveOutcome { solved, unsolvable, resource_limit };

const char *to_string(SolveOutcome outcome);

struct SolveResult {
    SolveOutcome outcome = SolveOutcome::unsolvable;
    pddl::Plan plan;
    std::size_t expanded = 0;
    double elapsed_seconds = 0.0;

    bool solved() const { return outcome == SolveOutcome::solved; }
};

SolveResult solve(const GroundedTask &task, SearchMode mode, const SearchLimit &limits = {});

/// Relaxed-plan heuristics over a packed state; returns nullopt for dead ends.
/// Exposed for admissibility testing.
std::optional<int> h_max(const GroundedTask &task, const std::vector<AtomId> &state_atoms);
std::optional<int> h_add(const GroundedTask &task, const std::vector<AtomId> &state_atoms);

struct PlanValidation {
    bool valid = false;
    /// First failing step; equals plan length when the goal is not reached.
    std::size_t step = 0;
    std::optional<pddl::Literal> unmet;
    std::string reason;

    static PlanValidation ok() { return {true, 0, std::nullopt, {}}; }
};

/// Lifted simulation; throws UnknownOperator for steps naming no schema.
PlanValidation validate_plan(const pddl::Domain &domain, const pddl::Problem &problem, const pddl::Plan &plan);

struct OptimalCost {
    enum class Status { known, unknown, unsolvable };
    Status status = Status::unknown;
    std::size_t cost = 0;

    bool known() const { return status == Status::known; }
};

OptimalCost optimal_cost(const pddl::Domain &domain, const pddl::Problem &problem, const SearchLimit &limits = {},
                         const GroundLimit &ground_limits = {});

/// Convenience: ground then solve.
SolveResult plan(const pddl::Domain &domain, const pddl::Problem &problem, SearchMode mode,
                 const SearchLimit &limits = {}, const GroundLimit &ground_limits = {});

} // namespace unidomain::planner
