#include "oracles/blocksworld.hpp"
#include "oracles/lifted_bfs.hpp"
#include "test_support.hpp"

#include "unidomain/planner.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace unidomain;
using namespace unidomain::planner;
using unidomain::testing::read_data;

namespace {

pddl::Domain blocksworld() { return pddl::parse_domain(read_data("corpus/blocksworld.pddl")); }

const char *kSwap = R"((define (problem swap) (:domain blocksworld) (:objects a b - block)
  (:init (on a b) (ontable b) (clear a) (handempty)) (:goal (on b a))))";

// Brute force: every type-respecting substitution, then the relaxed
// reachability fixpoint over instantiated positive preconditions.
std::size_t brute_force_reachable_actions(const pddl::Domain &d, const pddl::Problem &p) {
    struct Candidate {
        std::set<pddl::Atom> pre, add;
    };
    std::vector<Candidate> candidates;
    for (const auto &op : d.operators) {
        oracles::for_each_substitution(d, p, op, [&](const std::vector<std::string> &args) {
            Candidate c;
            for (const auto &l : op.preconditions)
                if (l.positive)
                    c.pre.insert(oracles::bind(op, args, l).atom());
            for (const auto &l : op.effects)
                if (l.positive)
                    c.add.insert(oracles::bind(op, args, l).atom());
            candidates.push_back(c);
        });
    }
    std::set<pddl::Atom> reached = p.init;
    std::vector<bool> fired(candidates.size(), false);
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (fired[i])
                continue;
            bool ok = std::all_of(candidates[i].pre.begin(), candidates[i].pre.end(),
                                  [&](const pddl::Atom &a) { return reached.count(a) > 0; });
            if (!ok)
                continue;
            fired[i] = true;
            changed = true;
            reached.insert(candidates[i].add.begin(), candidates[i].add.end());
        }
    }
    return static_cast<std::size_t>(std::count(fired.begin(), fired.end(), true));
}

} // namespace

TEST(Ground, TwoBlocksMatchesBruteForce) {
    auto d = blocksworld();
    auto p = pddl::parse_problem(kSwap, d);
    GroundedTask t = ground(d, p);
    std::size_t expected = brute_force_reachable_actions(d, p);
    // 2 pickup + 2 putdown + 4 stack + 4 unstack candidates before pruning.
    GroundedTask unpruned = ground(d, p, {200'000, false});
    EXPECT_EQ(unpruned.actions.size(), 12u);
    EXPECT_EQ(t.actions.size(), expected);
    // Relaxed reachability keeps self-stacking: (stack a a) adds (on a a),
    // which in turn enables (unstack a a).
    EXPECT_EQ(expected, 12u);
    for (const auto &a : t.actions) {
        std::vector<AtomId> both;
        std::set_intersection(a.add.begin(), a.add.end(), a.del.begin(), a.del.end(), std::back_inserter(both));
        EXPECT_TRUE(both.empty()) << a.str();
    }
}

TEST(Ground, UnreachableGoalAtomIsKeptOutsideReachableSet) {
    auto d = pddl::parse_domain("(define (domain g) (:predicates (p) (q)) "
                                "(:action a :parameters () :precondition (p) :effect (p)))");
    auto p = pddl::parse_problem("(define (problem x) (:domain g) (:init (p)) (:goal (q)))", d);
    GroundedTask t = ground(d, p);
    ASSERT_EQ(t.goal_pos.size(), 1u);
    EXPECT_GE(t.goal_pos[0], t.num_reachable);
    ASSERT_EQ(t.unreachable_goal_atoms().size(), 1u);
    EXPECT_EQ(t.unreachable_goal_atoms()[0].predicate, "q");
    EXPECT_EQ(solve(t, SearchMode::optimal).outcome, SolveOutcome::unsolvable);
}

TEST(Ground, NoObjectsNoActions) {
    auto d = pddl::parse_domain("(define (domain g) (:predicates (p ?x) (done)) "
                                "(:action a :parameters (?x) :precondition () :effect (p ?x)))");
    auto p = pddl::parse_problem("(define (problem x) (:domain g) (:init) (:goal (done)))", d);
    EXPECT_TRUE(ground(d, p).actions.empty());
    EXPECT_TRUE(ground(d, p, {200'000, false}).actions.empty());
}

TEST(Ground, ExplosionLimit) {
    auto d = blocksworld();
    auto p = pddl::parse_problem(kSwap, d);
    EXPECT_THROW(ground(d, p, {5, true}), GroundingExplosion);
    EXPECT_THROW(ground(d, p, {5, false}), GroundingExplosion);
}

TEST(Ground, StaticNegativePreconditionPrunes) {
    auto d = pddl::parse_domain("(define (domain g) (:requirements :negative-preconditions) (:predicates (broken ?x) (used ?x)) "
                                "(:action use :parameters (?x) :precondition (not (broken ?x)) :effect (used ?x)))");
    auto p = pddl::parse_problem("(define (problem x) (:domain g) (:objects a b) (:init (broken a)) (:goal (used b)))", d);
    GroundedTask t = ground(d, p);
    ASSERT_EQ(t.actions.size(), 1u);
    EXPECT_EQ(t.actions[0].str(), "(use b)");
}

TEST(Solve, TwoBlockSwapOptimal) {
    auto d = blocksworld();
    auto p = pddl::parse_problem(kSwap, d);
    SolveResult r = plan(d, p, SearchMode::optimal);
    ASSERT_TRUE(r.solved());
    EXPECT_EQ(pddl::print_plan(r.plan), "(unstack a b)\n(putdown a)\n(pickup b)\n(stack b a)\n");
    EXPECT_EQ(oracles::bfs_shortest(d, p), std::optional<std::size_t>(4));
    EXPECT_TRUE(validate_plan(d, p, r.plan).valid);
}

TEST(Solve, GoalAlreadyTrue) {
    auto d = blocksworld();
    auto p = pddl::parse_problem("(define (problem x) (:domain blocksworld) (:objects a - block) "
                                 "(:init (ontable a) (clear a) (handempty)) (:goal (ontable a)))",
                                 d);
    for (auto mode : {SearchMode::optimal, SearchMode::satisficing}) {
        SolveResult r = plan(d, p, mode);
        ASSERT_TRUE(r.solved());
        EXPECT_EQ(r.plan.cost(), 0u);
    }
}

TEST(Solve, CyclicGoalUnsolvable) {
    auto d = blocksworld();
    auto p = pddl::parse_problem("(define (problem x) (:domain blocksworld) (:objects a b - block) "
                                 "(:init (ontable a) (ontable b) (clear a) (clear b) (handempty)) "
                                 "(:goal (and (on a b) (on b a))))",
                                 d);
    EXPECT_EQ(oracles::bfs_shortest(d, p), std::nullopt);
    EXPECT_EQ(plan(d, p, SearchMode::optimal).outcome, SolveOutcome::unsolvable);
    EXPECT_EQ(plan(d, p, SearchMode::satisficing).outcome, SolveOutcome::unsolvable);
    EXPECT_EQ(optimal_cost(d, p).status, OptimalCost::Status::unsolvable);
}

TEST(Solve, ResourceLimit) {
    auto d = blocksworld();
    auto p = pddl::parse_problem(read_data("corpus/bw-p03.pddl"), d);
    SearchLimit tight;
    tight.max_expansions = 2;
    EXPECT_EQ(plan(d, p, SearchMode::optimal, tight).outcome, SolveOutcome::resource_limit);
    EXPECT_EQ(optimal_cost(d, p, tight).status, OptimalCost::Status::unknown);
}

TEST(Solve, BlindFallbackIsOptimal) {
    auto d = blocksworld();
    auto p = pddl::parse_problem(read_data("corpus/bw-p03.pddl"), d);
    SearchLimit blind;
    blind.optimal_heuristic = HeuristicKind::blind;
    SolveResult a = plan(d, p, SearchMode::optimal);
    SolveResult b = plan(d, p, SearchMode::optimal, blind);
    ASSERT_TRUE(a.solved() && b.solved());
    EXPECT_EQ(a.plan.cost(), b.plan.cost());
    EXPECT_GE(b.expanded, a.expanded);
}

TEST(Solve, NegativePreconditionsNative) {
    auto d = pddl::parse_domain(R"((define (domain door) (:requirements :strips :negative-preconditions)
      (:predicates (open) (inside))
      (:action open-door :parameters () :precondition (not (open)) :effect (open))
      (:action enter :parameters () :precondition (open) :effect (inside))
      (:action close-door :parameters () :precondition (open) :effect (not (open)))))");
    auto p = pddl::parse_problem("(define (problem x) (:domain door) (:init) (:goal (and (inside) (not (open)))))", d);
    SolveResult r = plan(d, p, SearchMode::optimal);
    ASSERT_TRUE(r.solved());
    EXPECT_EQ(pddl::print_plan(r.plan), "(open-door)\n(enter)\n(close-door)\n");
    EXPECT_EQ(oracles::bfs_shortest(d, p), std::optional<std::size_t>(3));
}

TEST(OptimalCost, Values) {
    auto d = blocksworld();
    EXPECT_EQ(optimal_cost(d, pddl::parse_problem(kSwap, d)).cost, 4u);
    auto trivial = pddl::parse_problem("(define (problem x) (:domain blocksworld) (:objects a - block) "
                                       "(:init (ontable a)) (:goal (ontable a)))",
                                       d);
    OptimalCost c = optimal_cost(d, trivial);
    EXPECT_TRUE(c.known());
    EXPECT_EQ(c.cost, 0u);
}

TEST(ValidatePlan, AcceptsAndRejects) {
    auto d = blocksworld();
    auto p = pddl::parse_problem(kSwap, d);
    pddl::Plan good = pddl::parse_plan("(unstack a b)\n(putdown a)\n(pickup b)\n(stack b a)\n");
    EXPECT_TRUE(validate_plan(d, p, good).valid);

    pddl::Plan swapped = good;
    std::swap(swapped.steps[0], swapped.steps[1]);
    PlanValidation v = validate_plan(d, p, swapped);
    EXPECT_FALSE(v.valid);
    EXPECT_EQ(v.step, 0u);
    ASSERT_TRUE(v.unmet.has_value());
    EXPECT_EQ(v.unmet->str(), "(holding a)");

    pddl::Plan short_plan = good;
    short_plan.steps.pop_back();
    v = validate_plan(d, p, short_plan);
    EXPECT_FALSE(v.valid);
    EXPECT_EQ(v.step, 3u);
    EXPECT_EQ(v.unmet->str(), "(on b a)");

    pddl::Plan bogus = pddl::parse_plan("(fly a)");
    EXPECT_THROW(validate_plan(d, p, bogus), UnknownOperator);
}

TEST(ValidatePlan, EmptyPlanOnSatisfiedGoal) {
    auto d = blocksworld();
    auto p = pddl::parse_problem("(define (problem x) (:domain blocksworld) (:objects a - block) "
                                 "(:init (ontable a)) (:goal (ontable a)))",
                                 d);
    EXPECT_TRUE(validate_plan(d, p, {}).valid);
}

TEST(Properties, OptimalMatchesBlocksOracle) {
    auto d = blocksworld();
    std::mt19937 rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        int n = 2 + trial % 3;
        auto init = oracles::random_towers(n, rng);
        auto goal = oracles::random_goal(n, rng);
        auto p = pddl::parse_problem(oracles::blocks_problem_pddl("r", init, goal), d);
        auto expected = oracles::blocks_bfs(init, goal);
        SolveResult r = plan(d, p, SearchMode::optimal);
        ASSERT_TRUE(expected.has_value());
        ASSERT_TRUE(r.solved());
        EXPECT_EQ(r.plan.cost(), *expected) << oracles::blocks_problem_pddl("r", init, goal);
        EXPECT_TRUE(validate_plan(d, p, r.plan).valid);
        SolveResult s = plan(d, p, SearchMode::satisficing);
        ASSERT_TRUE(s.solved());
        EXPECT_TRUE(oracles::simulate_valid(d, p, s.plan));
        EXPECT_GE(s.plan.cost(), *expected);
    }
}

TEST(Properties, HmaxAdmissibleOnAllStates) {
    auto d = blocksworld();
    std::mt19937 rng(11);
    for (int trial = 0; trial < 6; ++trial) {
        int n = 2 + trial % 2;
        auto init = oracles::random_towers(n, rng);
        auto goal = oracles::random_goal(n, rng);
        auto p = pddl::parse_problem(oracles::blocks_problem_pddl("r", init, goal), d);
        GroundedTask t = ground(d, p);
        // Enumerate every reachable state with the lifted oracle.
        std::set<oracles::State> seen{p.init};
        std::vector<oracles::State> frontier{p.init};
        while (!frontier.empty()) {
            oracles::State s = frontier.back();
            frontier.pop_back();
            for (const auto &op : d.operators)
                oracles::for_each_substitution(d, p, op, [&](const std::vector<std::string> &args) {
                    auto next = oracles::apply_step(s, op, args);
                    if (next && seen.insert(*next).second)
                        frontier.push_back(*next);
                });
        }
        for (const auto &s : seen) {
            pddl::Problem from = p;
            from.init = s;
            auto truth = oracles::bfs_shortest(d, from);
            std::vector<AtomId> ids;
            for (const auto &a : s)
                ids.push_back(*t.find_atom(a));
            auto h = h_max(t, ids);
            if (!truth) {
                continue; // any value is admissible for dead ends
            }
            ASSERT_TRUE(h.has_value());
            EXPECT_LE(static_cast<std::size_t>(*h), *truth);
        }
    }
}

TEST(Properties, PruningPreservesOutcome) {
    auto d = blocksworld();
    std::mt19937 rng(3);
    for (int trial = 0; trial < 15; ++trial) {
        int n = 2 + trial % 2;
        auto init = oracles::random_towers(n, rng);
        auto goal = oracles::random_goal(n, rng);
        auto p = pddl::parse_problem(oracles::blocks_problem_pddl("r", init, goal), d);
        SolveResult pruned = solve(ground(d, p), SearchMode::optimal);
        SolveResult full = solve(ground(d, p, {200'000, false}), SearchMode::optimal);
        EXPECT_EQ(pruned.outcome, full.outcome);
        EXPECT_EQ(pruned.plan.cost(), full.plan.cost());
    }
}
