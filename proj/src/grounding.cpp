#include "unidomain/planner.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>
#include <unordered_set>

namespace unidomain::planner {

using pddl::Atom;
using pddl::Literal;

std::string GroundedAction::str() const {
    std::string out = "(" + name;
    for (const auto &a : args)
        out += " " + a;
    return out + ")";
}

std::optional<AtomId> GroundedTask::find_atom(const Atom &atom) const {
    auto it = std::lower_bound(atoms.begin(), atoms.begin() + static_cast<std::ptrdiff_t>(num_reachable), atom);
    if (it != atoms.begin() + static_cast<std::ptrdiff_t>(num_reachable) && *it == atom)
        return static_cast<AtomId>(it - atoms.begin());
    for (std::size_t i = num_reachable; i < atoms.size(); ++i)
        if (atoms[i] == atom)
            return static_cast<AtomId>(i);
    return std::nullopt;
}

std::vector<Atom> GroundedTask::unreachable_goal_atoms() const {
    std::vector<Atom> out;
    for (AtomId g : goal_pos)
        if (g >= num_reachable)
            out.push_back(atoms[g]);
    return out;
}

namespace {

using Binding = std::vector<std::string>; // indexed by parameter position; empty = unbound

struct OperatorInfo {
    const pddl::OperatorSchema *schema = nullptr;
    std::unordered_map<std::string, std::size_t> var_index;
    std::vector<const Literal *> positive_pre;
};

Atom instantiate(const Literal &lit, const OperatorInfo &info, const Binding &binding) {
    Atom atom{lit.predicate, {}};
    atom.args.reserve(lit.args.size());
    for (const auto &v : lit.args)
        atom.args.push_back(binding[info.var_index.at(v)]);
    return atom;
}

class Grounder {
public:
    Grounder(const pddl::Domain &domain, const pddl::Problem &problem, const GroundLimit &limits)
        : domain_(domain), problem_(problem), limits_(limits) {
        for (const auto &op : domain.operators) {
            OperatorInfo info;
            info.schema = &op;
            for (std::size_t i = 0; i < op.params.size(); ++i)
                info.var_index.emplace(op.params[i].name, i);
            for (const auto &l : op.preconditions)
                if (l.positive)
                    info.positive_pre.push_back(&l);
            ops_.push_back(std::move(info));
            for (const auto &l : op.effects)
                if (!l.positive)
                    fluent_deleted_.insert(l.predicate);
        }
    }

    GroundedTask run() {
        std::vector<std::pair<std::size_t, Binding>> actions;
        std::set<Atom> atoms;
        if (limits_.prune_unreachable)
            reachable_actions(actions, atoms);
        else
            all_actions(actions, atoms);
        return build(actions, atoms);
    }

private:
    const std::vector<std::string> &objects_of(const std::string &type) {
        auto it = objects_by_type_.find(type);
        if (it != objects_by_type_.end())
            return it->second;
        std::vector<std::string> names;
        for (const auto &o : problem_.objects)
            if (domain_.is_subtype(o.type, type))
                names.push_back(o.name);
        std::sort(names.begin(), names.end());
        return objects_by_type_.emplace(type, std::move(names)).first->second;
    }

    bool type_ok(const std::string &object, const std::string &type) {
        const pddl::TypedObject *obj = problem_.find_object(object);
        return obj && domain_.is_subtype(obj->type, type);
    }

    // A negative precondition on a never-deleted atom that holds initially
    // can never be satisfied.
    bool statically_blocked(const OperatorInfo &info, const Binding &binding) const {
        for (const auto &l : info.schema->preconditions) {
            if (l.positive || fluent_deleted_.count(l.predicate))
                continue;
            if (problem_.init.count(instantiate(l, info, binding)))
                return true;
        }
        return false;
    }

    void note_action(std::size_t op_index, const Binding &binding,
                     std::vector<std::pair<std::size_t, Binding>> &actions) {
        std::string key = std::to_string(op_index);
        for (const auto &b : binding)
            key += " " + b;
        if (!action_keys_.insert(key).second)
            return;
        if (action_keys_.size() > limits_.max_actions)
            throw GroundingExplosion(limits_.max_actions);
        actions.emplace_back(op_index, binding);
    }

    void complete_free(const OperatorInfo &info, std::size_t op_index, Binding &binding, std::size_t param,
                       std::vector<std::pair<std::size_t, Binding>> &out, bool prune) {
        const auto &params = info.schema->params;
        while (param < params.size() && !binding[param].empty())
            ++param;
        if (param == params.size()) {
            if (!prune || !statically_blocked(info, binding))
                note_action(op_index, binding, out);
            return;
        }
        for (const auto &obj : objects_of(params[param].type)) {
            binding[param] = obj;
            complete_free(info, op_index, binding, param + 1, out, prune);
        }
        binding[param].clear();
    }

    void match_positive(const OperatorInfo &info, std::size_t op_index, Binding &binding, std::size_t lit_index,
                        std::vector<std::pair<std::size_t, Binding>> &out) {
        if (lit_index == info.positive_pre.size()) {
            complete_free(info, op_index, binding, 0, out, true);
            return;
        }
        const Literal &lit = *info.positive_pre[lit_index];
        auto it = reached_.find(lit.predicate);
        if (it == reached_.end())
            return;
        const auto &params = info.schema->params;
        for (const auto &tuple : it->second) {
            std::vector<std::size_t> newly_bound;
            bool ok = true;
            for (std::size_t k = 0; k < lit.args.size() && ok; ++k) {
                std::size_t var = info.var_index.at(lit.args[k]);
                if (binding[var].empty()) {
                    if (!type_ok(tuple[k], params[var].type)) {
                        ok = false;
                        break;
                    }
                    binding[var] = tuple[k];
                    newly_bound.push_back(var);
                } else if (binding[var] != tuple[k]) {
                    ok = false;
                }
            }
            if (ok)
                match_positive(info, op_index, binding, lit_index + 1, out);
            for (std::size_t var : newly_bound)
                binding[var].clear();
        }
    }

    void reachable_actions(std::vector<std::pair<std::size_t, Binding>> &actions, std::set<Atom> &atoms) {
        for (const auto &a : problem_.init) {
            atoms.insert(a);
            reached_[a.predicate].insert(a.args);
        }
        std::size_t processed = 0;
        for (;;) {
            std::size_t before_actions = actions.size();
            for (std::size_t i = 0; i < ops_.size(); ++i) {
                Binding binding(ops_[i].schema->params.size());
                match_positive(ops_[i], i, binding, 0, actions);
            }
            bool grew = false;
            for (std::size_t k = processed; k < actions.size(); ++k) {
                const auto &[op_index, binding] = actions[k];
                for (const auto &l : ops_[op_index].schema->effects) {
                    if (!l.positive)
                        continue;
                    Atom a = instantiate(l, ops_[op_index], binding);
                    if (atoms.insert(a).second) {
                        reached_[a.predicate].insert(a.args);
                        grew = true;
                    }
                }
            }
            processed = actions.size();
            if (!grew && actions.size() == before_actions)
                break;
            if (!grew)
                break;
        }
    }

    void all_actions(std::vector<std::pair<std::size_t, Binding>> &actions, std::set<Atom> &atoms) {
        std::size_t total = 0;
        for (const auto &info : ops_) {
            std::size_t count = 1;
            for (const auto &p : info.schema->params) {
                count *= objects_of(p.type).size();
                if (count > limits_.max_actions)
                    break;
            }
            total += count;
            if (total > limits_.max_actions)
                throw GroundingExplosion(limits_.max_actions);
        }
        for (std::size_t i = 0; i < ops_.size(); ++i) {
            Binding binding(ops_[i].schema->params.size());
            complete_free(ops_[i], i, binding, 0, actions, false);
        }
        atoms.insert(problem_.init.begin(), problem_.init.end());
        for (const auto &[op_index, binding] : actions) {
            for (const auto &l : ops_[op_index].schema->preconditions)
                atoms.insert(instantiate(l, ops_[op_index], binding));
            for (const auto &l : ops_[op_index].schema->effects)
                atoms.insert(instantiate(l, ops_[op_index], binding));
        }
    }

    GroundedTask build(std::vector<std::pair<std::size_t, Binding>> &actions, const std::set<Atom> &atoms) {
        GroundedTask task;
        task.atoms.assign(atoms.begin(), atoms.end());
        task.num_reachable = task.atoms.size();
        std::map<Atom, AtomId> index;
        for (std::size_t i = 0; i < task.atoms.size(); ++i)
            index.emplace(task.atoms[i], static_cast<AtomId>(i));

        auto lookup = [&](const Atom &a) -> std::optional<AtomId> {
            auto it = index.find(a);
            if (it == index.end())
                return std::nullopt;
            return it->second;
        };

        std::sort(actions.begin(), actions.end(), [&](const auto &a, const auto &b) {
            const auto &na = ops_[a.first].schema->name;
            const auto &nb = ops_[b.first].schema->name;
            return na != nb ? na < nb : a.second < b.second;
        });

        for (const auto &[op_index, binding] : actions) {
            const OperatorInfo &info = ops_[op_index];
            GroundedAction ga;
            ga.name = info.schema->name;
            ga.args = binding;
            for (const auto &l : info.schema->preconditions) {
                auto id = lookup(instantiate(l, info, binding));
                if (l.positive)
                    ga.pre.push_back(*id); // every positive precondition was reached
                else if (id)
                    ga.neg_pre.push_back(*id);
            }
            for (const auto &l : info.schema->effects) {
                Atom a = instantiate(l, info, binding);
                if (l.positive)
                    ga.add.push_back(*lookup(a));
                else if (auto id = lookup(a))
                    ga.del.push_back(*id);
            }
            for (auto *v : {&ga.pre, &ga.neg_pre, &ga.add, &ga.del}) {
                std::sort(v->begin(), v->end());
                v->erase(std::unique(v->begin(), v->end()), v->end());
            }
            // Add wins over delete for the same ground atom.
            std::vector<AtomId> del;
            std::set_difference(ga.del.begin(), ga.del.end(), ga.add.begin(), ga.add.end(), std::back_inserter(del));
            ga.del = std::move(del);
            task.actions.push_back(std::move(ga));
        }

        for (const auto &a : problem_.init)
            task.init.push_back(*lookup(a));
        std::sort(task.init.begin(), task.init.end());

        for (const auto &l : problem_.goal) {
            Atom a = l.atom();
            auto id = lookup(a);
            if (l.positive) {
                if (!id) {
                    task.atoms.push_back(a);
                    id = static_cast<AtomId>(task.atoms.size() - 1);
                    index.emplace(a, *id);
                }
                task.goal_pos.push_back(*id);
            } else if (id) {
                task.goal_neg.push_back(*id);
            }
        }
        std::sort(task.goal_pos.begin(), task.goal_pos.end());
        std::sort(task.goal_neg.begin(), task.goal_neg.end());
        return task;
    }

    const pddl::Domain &domain_;
    const pddl::Problem &problem_;
    GroundLimit limits_;
    std::vector<OperatorInfo> ops_;
    std::unordered_set<std::string> fluent_deleted_;
    std::unordered_map<std::string, std::vector<std::string>> objects_by_type_;
    std::unordered_map<std::string, std::set<std::vector<std::string>>> reached_;
    std::unordered_set<std::string> action_keys_;
};

} // namespace

GroundedTask ground(const pddl::Domain &domain, const pddl::Problem &problem, const GroundLimit &limits) {
    return Grounder(domain, problem, limits).run();
}

} // namespace unidomain::planner
