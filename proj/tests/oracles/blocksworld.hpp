#pragma once

// Native blocksworld model: each block sits on another block or the table,
// and the hand holds at most one block. Used as an independent BFS oracle and
// as a random instance generator.

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace unidomain::oracles {

struct BlocksState {
    static constexpr int kTable = -1;
    static constexpr int kHand = -2;
    std::vector<int> below; // below[i]: block index, kTable, or kHand

    auto operator<=>(const BlocksState &) const = default;

    bool clear(int b) const {
        if (below[b] == kHand)
            return false;
        for (int x : below)
            if (x == b)
                return false;
        return true;
    }
    bool hand_empty() const {
        for (int x : below)
            if (x == kHand)
                return false;
        return true;
    }
};

inline std::string block_name(int i) { return "b" + std::to_string(i); }

inline std::vector<BlocksState> blocks_successors(const BlocksState &s) {
    std::vector<BlocksState> out;
    int n = static_cast<int>(s.below.size());
    int held = -1;
    for (int i = 0; i < n; ++i)
        if (s.below[i] == BlocksState::kHand)
            held = i;
    if (held < 0) {
        for (int i = 0; i < n; ++i) {
            if (!s.clear(i))
                continue;
            BlocksState t = s;
            t.below[i] = BlocksState::kHand; // pickup or unstack
            out.push_back(t);
        }
    } else {
        BlocksState t = s;
        t.below[held] = BlocksState::kTable;
        out.push_back(t);
        for (int j = 0; j < n; ++j) {
            if (j == held || !s.clear(j))
                continue;
            BlocksState u = s;
            u.below[held] = j;
            out.push_back(u);
        }
    }
    return out;
}

/// Goal: a partial assignment `below` with kNone for unconstrained blocks.
struct BlocksGoal {
    static constexpr int kNone = -3;
    std::vector<int> below;

    bool met(const BlocksState &s) const {
        for (std::size_t i = 0; i < below.size(); ++i)
            if (below[i] != kNone && s.below[i] != below[i])
                return false;
        return true;
    }
};

inline std::optional<std::size_t> blocks_bfs(const BlocksState &init, const BlocksGoal &goal) {
    if (goal.met(init))
        return 0;
    std::map<BlocksState, std::size_t> depth{{init, 0}};
    std::deque<BlocksState> queue{init};
    while (!queue.empty()) {
        BlocksState s = queue.front();
        queue.pop_front();
        for (const auto &t : blocks_successors(s)) {
            if (depth.count(t))
                continue;
            depth[t] = depth[s] + 1;
            if (goal.met(t))
                return depth[t];
            queue.push_back(t);
        }
    }
    return std::nullopt;
}

/// Random tower configuration over n blocks, hand empty.
inline BlocksState random_towers(int n, std::mt19937 &rng) {
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i)
        order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    BlocksState s;
    s.below.assign(n, BlocksState::kTable);
    std::bernoulli_distribution new_tower(0.4);
    for (int k = 1; k < n; ++k)
        if (!new_tower(rng))
            s.below[order[k]] = order[k - 1];
    return s;
}

inline std::string blocks_problem_pddl(const std::string &name, const BlocksState &init, const BlocksGoal &goal) {
    int n = static_cast<int>(init.below.size());
    std::string out = "(define (problem " + name + ")\n  (:domain blocksworld)\n  (:objects";
    for (int i = 0; i < n; ++i)
        out += " " + block_name(i);
    out += " - block)\n  (:init (handempty)";
    for (int i = 0; i < n; ++i) {
        if (init.below[i] == BlocksState::kTable)
            out += " (ontable " + block_name(i) + ")";
        else
            out += " (on " + block_name(i) + " " + block_name(init.below[i]) + ")";
        if (init.clear(i))
            out += " (clear " + block_name(i) + ")";
    }
    out += ")\n  (:goal (and";
    for (int i = 0; i < n; ++i) {
        if (goal.below[i] == BlocksGoal::kNone)
            continue;
        if (goal.below[i] == BlocksState::kTable)
            out += " (ontable " + block_name(i) + ")";
        else
            out += " (on " + block_name(i) + " " + block_name(goal.below[i]) + ")";
    }
    out += ")))\n";
    return out;
}

/// Goal drawn from a random tower configuration, keeping each constraint
/// with probability 0.7 (at least one kept).
inline BlocksGoal random_goal(int n, std::mt19937 &rng) {
    BlocksState target = random_towers(n, rng);
    BlocksGoal g;
    g.below.assign(n, BlocksGoal::kNone);
    std::bernoulli_distribution keep(0.7);
    bool any = false;
    for (int i = 0; i < n; ++i) {
        if (keep(rng)) {
            g.below[i] = target.below[i];
            any = true;
        }
    }
    if (!any)
        g.below[0] = target.below[0];
    return g;
}

} // namespace unidomain::oracles
