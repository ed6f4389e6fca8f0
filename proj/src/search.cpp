#include "unidomain/planner.hpp"

#include <algorithm>
#include <queue>
#include <unordered_map>

namespace unidomain::planner {

const char *to_string(SolveOutcome outcome) {
    switch (outcome) {
    case SolveOutcome::solved: return "solved";
    case SolveOutcome::unsolvable: return "unsolvable";
    case SolveOutcome::resource_limit: return "resource_limit";
    }
    return "unsolvable";
}

namespace {

using Words = std::vector<std::uint64_t>;

struct WordsHash {
    std::size_t operator()(const Words &w) const {
        std::uint64_t h = 1469598103934665603ULL;
        for (std::uint64_t x : w) {
            h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
            h *= 1099511628211ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

bool test(const Words &s, AtomId a) { return (s[a >> 6] >> (a & 63)) & 1ULL; }
void set_bit(Words &s, AtomId a) { s[a >> 6] |= 1ULL << (a & 63); }
void clear_bit(Words &s, AtomId a) { s[a >> 6] &= ~(1ULL << (a & 63)); }

constexpr int kInfinity = std::numeric_limits<int>::max();

// Unit-cost delete relaxation; combine = max (h_max) or sum (h_add).
class Relaxation {
public:
    explicit Relaxation(const GroundedTask &task) : task_(task) {
        precondition_of_.resize(task.atoms.size());
        for (std::size_t i = 0; i < task.actions.size(); ++i)
            for (AtomId p : task.actions[i].pre)
                precondition_of_[p].push_back(static_cast<std::uint32_t>(i));
        cost_.resize(task.atoms.size());
        unsatisfied_.resize(task.actions.size());
        accumulated_.resize(task.actions.size());
    }

    int evaluate(const Words &state, bool additive) {
        std::fill(cost_.begin(), cost_.end(), kInfinity);
        using Entry = std::pair<int, AtomId>;
        std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
        for (AtomId a = 0; a < task_.atoms.size(); ++a) {
            if (test(state, a)) {
                cost_[a] = 0;
                queue.push({0, a});
            }
        }
        auto fire = [&](std::size_t action, int pre_cost) {
            int c = pre_cost + 1;
            for (AtomId e : task_.actions[action].add) {
                if (c < cost_[e]) {
                    cost_[e] = c;
                    queue.push({c, e});
                }
            }
        };
        for (std::size_t i = 0; i < task_.actions.size(); ++i) {
            unsatisfied_[i] = static_cast<int>(task_.actions[i].pre.size());
            accumulated_[i] = 0;
            if (unsatisfied_[i] == 0)
                fire(i, 0);
        }
        while (!queue.empty()) {
            auto [c, atom] = queue.top();
            queue.pop();
            if (c > cost_[atom])
                continue;
            for (std::uint32_t action : precondition_of_[atom]) {
                accumulated_[action] = additive ? accumulated_[action] + c : std::max(accumulated_[action], c);
                if (--unsatisfied_[action] == 0)
                    fire(action, accumulated_[action]);
            }
        }
        int total = 0;
        for (AtomId g : task_.goal_pos) {
            if (cost_[g] == kInfinity)
                return kInfinity;
            total = additive ? total + cost_[g] : std::max(total, cost_[g]);
        }
        return total;
    }

private:
    const GroundedTask &task_;
    std::vector<std::vector<std::uint32_t>> precondition_of_;
    std::vector<int> cost_;
    std::vector<int> unsatisfied_;
    std::vector<int> accumulated_;
};

Words pack(const GroundedTask &task, const std::vector<AtomId> &atoms) {
    Words w((task.atoms.size() + 63) / 64, 0);
    for (AtomId a : atoms)
        set_bit(w, a);
    return w;
}

bool is_goal(const GroundedTask &task, const Words &s) {
    for (AtomId g : task.goal_pos)
        if (!test(s, g))
            return false;
    for (AtomId g : task.goal_neg)
        if (test(s, g))
            return false;
    return true;
}

bool applicable(const GroundedAction &a, const Words &s) {
    for (AtomId p : a.pre)
        if (!test(s, p))
            return false;
    for (AtomId p : a.neg_pre)
        if (test(s, p))
            return false;
    return true;
}

Words apply(const GroundedAction &a, Words s) {
    for (AtomId d : a.del)
        clear_bit(s, d);
    for (AtomId e : a.add)
        set_bit(s, e);
    return s;
}

struct SearchNode {
    std::size_t state;
    std::size_t parent;
    std::uint32_t action;
    int g;
};

constexpr std::size_t kNoParent = static_cast<std::size_t>(-1);

class Search {
public:
    Search(const GroundedTask &task, SearchMode mode, const SearchLimit &limits)
        : task_(task), mode_(mode), limits_(limits), relaxation_(task) {}

    SolveResult run() {
        auto start = std::chrono::steady_clock::now();
        SolveResult result = mode_ == SearchMode::optimal ? astar(start) : gbfs(start);
        result.elapsed_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return result;
    }

private:
    int heuristic(const Words &s) {
        if (mode_ == SearchMode::satisficing)
            return relaxation_.evaluate(s, true);
        switch (limits_.optimal_heuristic) {
        case HeuristicKind::hmax: return relaxation_.evaluate(s, false);
        case HeuristicKind::hadd: return relaxation_.evaluate(s, true);
        case HeuristicKind::blind: return is_goal(task_, s) ? 0 : (task_.unreachable_goal_atoms().empty() ? 1 : kInfinity);
        }
        return 0;
    }

    std::size_t intern(Words s, bool &fresh) {
        auto [it, inserted] = registry_.emplace(std::move(s), states_.size());
        fresh = inserted;
        if (inserted)
            states_.push_back(&it->first);
        return it->second;
    }

    pddl::Plan extract(std::size_t node) const {
        pddl::Plan plan;
        for (std::size_t n = node; nodes_[n].parent != kNoParent; n = nodes_[n].parent) {
            const GroundedAction &a = task_.actions[nodes_[n].action];
            plan.steps.push_back({a.name, a.args});
        }
        std::reverse(plan.steps.begin(), plan.steps.end());
        return plan;
    }

    bool out_of_budget(std::size_t expanded, std::chrono::steady_clock::time_point start) const {
        if (expanded >= limits_.max_expansions)
            return true;
        if ((expanded & 255) == 0) {
            double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            return elapsed > limits_.max_seconds;
        }
        return false;
    }

    // Open list ordered by f, then lower g, then insertion order.
    SolveResult astar(std::chrono::steady_clock::time_point start) {
        SolveResult result;
        using Key = std::tuple<int, int, std::size_t>; // f, g, node (node ids grow with insertion)
        std::priority_queue<Key, std::vector<Key>, std::greater<>> open;
        std::vector<int> best_g;
        std::vector<int> h_cache;

        bool fresh = false;
        std::size_t init = intern(pack(task_, task_.init), fresh);
        int h0 = heuristic(*states_[init]);
        if (h0 == kInfinity) {
            result.outcome = SolveOutcome::unsolvable;
            return result;
        }
        best_g.push_back(0);
        h_cache.push_back(h0);
        nodes_.push_back({init, kNoParent, 0, 0});
        open.push({h0, 0, 0});

        while (!open.empty()) {
            auto [f, g, node_id] = open.top();
            open.pop();
            SearchNode node = nodes_[node_id];
            if (g > best_g[node.state])
                continue;
            const Words state = *states_[node.state];
            if (is_goal(task_, state)) {
                result.outcome = SolveOutcome::solved;
                result.plan = extract(node_id);
                return result;
            }
            if (out_of_budget(result.expanded, start)) {
                result.outcome = SolveOutcome::resource_limit;
                return result;
            }
            ++result.expanded;
            for (std::uint32_t i = 0; i < task_.actions.size(); ++i) {
                const GroundedAction &a = task_.actions[i];
                if (!applicable(a, state))
                    continue;
                std::size_t succ = intern(apply(a, state), fresh);
                int succ_g = g + 1;
                if (fresh) {
                    best_g.push_back(succ_g);
                    h_cache.push_back(heuristic(*states_[succ]));
                } else if (succ_g >= best_g[succ]) {
                    continue;
                } else {
                    best_g[succ] = succ_g;
                }
                if (h_cache[succ] == kInfinity)
                    continue;
                nodes_.push_back({succ, node_id, i, succ_g});
                open.push({succ_g + h_cache[succ], succ_g, nodes_.size() - 1});
            }
        }
        result.outcome = SolveOutcome::unsolvable;
        return result;
    }

    SolveResult gbfs(std::chrono::steady_clock::time_point start) {
        SolveResult result;
        using Key = std::pair<int, std::size_t>;
        std::priority_queue<Key, std::vector<Key>, std::greater<>> open;

        bool fresh = false;
        std::size_t init = intern(pack(task_, task_.init), fresh);
        int h0 = heuristic(*states_[init]);
        if (h0 == kInfinity) {
            result.outcome = SolveOutcome::unsolvable;
            return result;
        }
        nodes_.push_back({init, kNoParent, 0, 0});
        open.push({h0, 0});
        while (!open.empty()) {
            auto [h, node_id] = open.top();
            open.pop();
            SearchNode node = nodes_[node_id];
            const Words state = *states_[node.state];
            if (is_goal(task_, state)) {
                result.outcome = SolveOutcome::solved;
                result.plan = extract(node_id);
                return result;
            }
            if (out_of_budget(result.expanded, start)) {
                result.outcome = SolveOutcome::resource_limit;
                return result;
            }
            ++result.expanded;
            for (std::uint32_t i = 0; i < task_.actions.size(); ++i) {
                const GroundedAction &a = task_.actions[i];
                if (!applicable(a, state))
                    continue;
                std::size_t succ = intern(apply(a, state), fresh);
                if (!fresh)
                    continue;
                int hs = heuristic(*states_[succ]);
                if (hs == kInfinity)
                    continue;
                nodes_.push_back({succ, node_id, i, node.g + 1});
                open.push({hs, nodes_.size() - 1});
            }
        }
        result.outcome = SolveOutcome::unsolvable;
        return result;
    }

    const GroundedTask &task_;
    SearchMode mode_;
    SearchLimit limits_;
    Relaxation relaxation_;
    std::unordered_map<Words, std::size_t, WordsHash> registry_;
    std::vector<const Words *> states_;
    std::vector<SearchNode> nodes_;
};

std::optional<int> relaxed(const GroundedTask &task, const std::vector<AtomId> &state_atoms, bool additive) {
    Relaxation r(task);
    int v = r.evaluate(pack(task, state_atoms), additive);
    if (v == kInfinity)
        return std::nullopt;
    return v;
}

} // namespace

std::optional<int> h_max(const GroundedTask &task, const std::vector<AtomId> &state_atoms) {
    return relaxed(task, state_atoms, false);
}

std::optional<int> h_add(const GroundedTask &task, const std::vector<AtomId> &state_atoms) {
    return relaxed(task, state_atoms, true);
}

SolveResult solve(const GroundedTask &task, SearchMode mode, const SearchLimit &limits) {
    return Search(task, mode, limits).run();
}

SolveResult plan(const pddl::Domain &domain, const pddl::Problem &problem, SearchMode mode,
                 const SearchLimit &limits, const GroundLimit &ground_limits) {
    GroundedTask task = ground(domain, problem, ground_limits);
    return solve(task, mode, limits);
}

OptimalCost optimal_cost(const pddl::Domain &domain, const pddl::Problem &problem, const SearchLimit &limits,
                         const GroundLimit &ground_limits) {
    SolveResult r;
    try {
        r = plan(domain, problem, SearchMode::optimal, limits, ground_limits);
    } catch (const GroundingExplosion &) {
        return {OptimalCost::Status::unknown, 0};
    }
    switch (r.outcome) {
    case SolveOutcome::solved: return {OptimalCost::Status::known, r.plan.cost()};
    case SolveOutcome::unsolvable: return {OptimalCost::Status::unsolvable, 0};
    case SolveOutcome::resource_limit: return {OptimalCost::Status::unknown, 0};
    }
    return {};
}

// ---------------------------------------------------------------------------

PlanValidation validate_plan(const pddl::Domain &domain, const pddl::Problem &problem, const pddl::Plan &plan) {
    std::set<pddl::Atom> state = problem.init;
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        const pddl::GroundAction &step = plan.steps[i];
        const pddl::OperatorSchema *op = domain.find_operator(step.name);
        if (!op)
            throw UnknownOperator(step.name);
        if (op->params.size() != step.args.size())
            return {false, i, std::nullopt,
                    "step " + step.str() + " has " + std::to_string(step.args.size()) + " arguments, expected " +
                        std::to_string(op->params.size())};
        std::unordered_map<std::string, std::string> binding;
        for (std::size_t k = 0; k < step.args.size(); ++k) {
            const pddl::TypedObject *obj = problem.find_object(step.args[k]);
            if (!obj)
                return {false, i, std::nullopt, "step " + step.str() + " uses unknown object '" + step.args[k] + "'"};
            if (!domain.is_subtype(obj->type, op->params[k].type))
                return {false, i, std::nullopt,
                        "step " + step.str() + ": '" + step.args[k] + "' is not a " + op->params[k].type};
            binding[op->params[k].name] = step.args[k];
        }
        auto ground = [&](const pddl::Literal &l) {
            pddl::Literal g{l.predicate, {}, l.positive};
            for (const auto &v : l.args)
                g.args.push_back(binding.at(v));
            return g;
        };
        for (const auto &l : op->preconditions) {
            pddl::Literal g = ground(l);
            if (state.count(g.atom()) != (g.positive ? 1u : 0u))
                return {false, i, g, "precondition " + g.str() + " of " + step.str() + " does not hold"};
        }
        std::vector<pddl::Atom> adds;
        for (const auto &l : op->effects) {
            pddl::Literal g = ground(l);
            if (g.positive)
                adds.push_back(g.atom());
            else
                state.erase(g.atom());
        }
        state.insert(adds.begin(), adds.end());
    }
    for (const auto &l : problem.goal) {
        if (state.count(l.atom()) != (l.positive ? 1u : 0u))
            return {false, plan.steps.size(), l, "goal " + l.str() + " not satisfied"};
    }
    return PlanValidation::ok();
}

} // namespace unidomain::planner
