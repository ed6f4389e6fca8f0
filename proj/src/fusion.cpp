#include "unidomain/fusion.hpp"

#include "unidomain/domain_learn.hpp"

#include "llm_common.hpp"
#include "unidomain/prompts.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <future>
#include <numeric>
#include <set>
#include <sstream>

namespace unidomain::fusion {

using detail::join;

namespace {

std::vector<std::string> format_all(const std::vector<Diagnostic> &diags) {
    std::vector<std::string> out;
    for (const auto &d : diags)
        if (d.severity == Severity::error)
            out.push_back(d.format("fused"));
    return out;
}

/// Closest common supertype; `object` when the hierarchy is unknown.
std::string common_supertype(const std::string &a, const std::string &b, const pddl::Domain *scope) {
    if (a == b)
        return a;
    if (!scope)
        return std::string(pddl::kRootType);
    std::string current = a;
    for (std::size_t step = 0; step <= scope->types.size() + 1; ++step) {
        if (scope->is_subtype(b, current))
            return current;
        auto it = std::find_if(scope->types.begin(), scope->types.end(),
                               [&](const pddl::TypeDecl &t) { return t.name == current; });
        if (it == scope->types.end())
            break;
        current = it->parent;
    }
    return std::string(pddl::kRootType);
}

/// The more specific of two comparable types, or nothing.
std::optional<std::string> meet(const std::string &a, const std::string &b, const pddl::Domain *scope) {
    if (a == b)
        return a;
    if (!scope)
        return std::nullopt;
    if (scope->is_subtype(a, b))
        return a;
    if (scope->is_subtype(b, a))
        return b;
    return std::nullopt;
}

/// First token of a reply after stripping markdown, uppercased.
std::optional<bool> parse_yes_no(const std::string &reply) {
    std::string word;
    for (char c : reply) {
        if (std::isalpha(static_cast<unsigned char>(c)))
            word += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        else if (!word.empty())
            break;
        else if (std::string("*_#>`\"' \t\r\n").find(c) == std::string::npos)
            return std::nullopt;
    }
    if (word == "YES")
        return true;
    if (word == "NO")
        return false;
    return std::nullopt;
}

bool ask_equivalent(oracle::OracleSession &session, const std::string &tmpl, const std::string &a, const std::string &b,
                    const FusionConfig &cfg) {
    oracle::ChatRequest req = detail::base_request(session);
    req.messages.push_back(oracle::Message::text("user", prompts::render(tmpl, {{"a", a}, {"b", b}})));
    std::optional<bool> verdict;
    learn::ask_with_repair(session, req, cfg.R_parse, "answer (YES or NO)", [&](const std::string &reply) {
        verdict = parse_yes_no(reply);
        return verdict ? std::string() : std::string("the answer must start with YES or NO");
    });
    return *verdict;
}

struct Candidate {
    std::size_t i, j;
    double similarity;
};

/// Cross pairs of equal arity scoring at least `tau`, best first, ties by name pair.
template <typename T>
std::vector<Candidate> rank(oracle::OracleSession &session, const std::vector<T> &a, const std::vector<T> &b,
                            const std::vector<std::string> &text_a, const std::vector<std::string> &text_b,
                            const std::set<std::size_t> &skip_b, double tau,
                            const std::function<std::size_t(const T &)> &arity) {
    std::vector<Candidate> out;
    if (a.empty() || b.size() == skip_b.size())
        return out;
    std::vector<std::string> texts = text_a;
    texts.insert(texts.end(), text_b.begin(), text_b.end());
    auto vectors = session.embed(texts);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (skip_b.count(j) || arity(a[i]) != arity(b[j]))
                continue;
            double phi = oracle::cosine(vectors[i], vectors[a.size() + j]);
            if (phi >= tau)
                out.push_back({i, j, phi});
        }
    std::stable_sort(out.begin(), out.end(), [&](const Candidate &x, const Candidate &y) {
        if (x.similarity != y.similarity)
            return x.similarity > y.similarity;
        return std::tie(a[x.i].name, b[x.j].name) < std::tie(a[y.i].name, b[y.j].name);
    });
    return out;
}

std::string fresh_name(const std::string &base, const std::set<std::string> &taken) {
    for (int k = 2;; ++k) {
        std::string name = base + "_" + std::to_string(k);
        if (!taken.count(name))
            return name;
    }
}

/// Unions `b` into `a` with `b`'s parameters mapped positionally onto `a`'s.
/// Returns nothing when the parameter types are incomparable or the effects contradict.
std::optional<pddl::OperatorSchema> union_bodies(const pddl::OperatorSchema &a, const pddl::OperatorSchema &b,
                                                 const pddl::Domain *scope) {
    if (a.params.size() != b.params.size())
        return std::nullopt;
    pddl::OperatorSchema out = a;
    std::map<std::string, std::string> vars;
    for (std::size_t k = 0; k < a.params.size(); ++k) {
        auto type = meet(a.params[k].type, b.params[k].type, scope);
        if (!type)
            return std::nullopt;
        out.params[k].type = *type;
        vars[b.params[k].name] = a.params[k].name;
    }
    auto map_literal = [&](pddl::Literal l) {
        for (auto &arg : l.args)
            if (auto it = vars.find(arg); it != vars.end())
                arg = it->second;
        return l;
    };
    for (const auto &l : b.preconditions)
        out.preconditions.insert(map_literal(l));
    for (const auto &l : b.effects)
        out.effects.insert(map_literal(l));
    for (const auto &l : out.effects)
        if (out.effects.count(l.negated()))
            return std::nullopt;
    return out;
}

void merge_types(pddl::Domain &out, const pddl::Domain &d2, std::vector<std::string> &conflicts) {
    for (const auto &t : d2.types) {
        auto it = std::find_if(out.types.begin(), out.types.end(),
                               [&](const pddl::TypeDecl &x) { return x.name == t.name; });
        if (it == out.types.end())
            out.types.push_back(t);
        else if (it->parent != t.parent)
            conflicts.push_back("type `" + t.name + "` has parent `" + it->parent + "` in `" + out.name + "` but `" +
                                t.parent + "` in `" + d2.name + "`");
    }
}

} // namespace

FusionValidationFailed::FusionValidationFailed(std::vector<std::string> diagnostics)
    : StageError("fusion", "fused domain is invalid:\n" + join(diagnostics, "\n")),
      diagnostics_(std::move(diagnostics)) {}

const char *to_string(EquivalenceMode mode) { return mode == EquivalenceMode::llm ? "llm" : "exact-name"; }

EquivalenceMode parse_equivalence_mode(const std::string &text) {
    if (text == "llm")
        return EquivalenceMode::llm;
    if (text == "exact-name" || text == "exact_name")
        return EquivalenceMode::exact_name;
    throw Error("unknown equivalence mode `" + text + "` (expected llm or exact-name)");
}

void FusionConfig::validate() const {
    if (!(tau_p >= -1.0 && tau_p <= 1.0) || !(tau_o >= -1.0 && tau_o <= 1.0))
        throw Error("fusion thresholds must lie in [-1, 1]");
}

std::size_t FusionTree::merge_count() const {
    std::size_t n = 0;
    for (const auto &level : levels)
        for (const auto &task : level)
            n += task.right ? 1 : 0;
    return n;
}

FusionTree build_fusion_tree(std::size_t leaves) {
    if (leaves == 0)
        throw Error("fusion needs at least one domain");
    FusionTree tree{leaves, {}};
    for (std::size_t width = leaves; width > 1; width = (width + 1) / 2) {
        std::vector<MergeTask> level;
        for (std::size_t i = 0; i < width; i += 2)
            level.push_back(i + 1 < width ? MergeTask{i, i + 1} : MergeTask{i, std::nullopt});
        tree.levels.push_back(std::move(level));
    }
    return tree;
}

bool MergeLog::empty() const {
    for (const auto &r : records)
        if (!r.predicates.empty() || !r.operators.empty())
            return false;
    return true;
}

nlohmann::json MergeLog::to_json() const {
    auto pairs = [](const std::vector<PairMerge> &v) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto &m : v)
            out.push_back({{"kept", m.kept}, {"absorbed", m.absorbed}, {"similarity", m.similarity}});
        return out;
    };
    nlohmann::json j;
    j["predicate_renames"] = predicate_renames;
    j["leaf_renames"] = leaf_renames;
    j["operator_merges"] = nlohmann::json::array();
    for (const auto &[kept, absorbed] : operator_merges)
        j["operator_merges"].push_back({{"kept", kept}, {"absorbed", absorbed}});
    j["records"] = nlohmann::json::array();
    for (const auto &r : records)
        j["records"].push_back({{"level", r.level},
                                {"left", r.left},
                                {"right", r.right},
                                {"predicates", pairs(r.predicates)},
                                {"operators", pairs(r.operators)},
                                {"rejected", pairs(r.rejected)},
                                {"operator_renames", r.operator_renames}});
    return j;
}

PredicateMergeResult merge_predicates(oracle::OracleSession &session, const std::vector<pddl::PredicateSchema> &p1,
                                      const std::vector<pddl::PredicateSchema> &p2, const FusionConfig &cfg,
                                      const pddl::Domain *scope) {
    PredicateMergeResult out;
    out.merged = p1;
    std::map<std::string, std::size_t> index1;
    for (std::size_t i = 0; i < p1.size(); ++i)
        index1[p1[i].name] = i;

    // A shared name is one symbol in both vocabularies.
    std::set<std::size_t> absorbed;
    auto absorb = [&](std::size_t i, std::size_t j, double phi) {
        auto &kept = out.merged[i];
        for (std::size_t k = 0; k < kept.params.size(); ++k)
            kept.params[k].type = common_supertype(kept.params[k].type, p2[j].params[k].type, scope);
        absorbed.insert(j);
        if (p2[j].name != kept.name)
            out.renames[p2[j].name] = kept.name;
        out.merges.push_back({kept.name, p2[j].name, phi});
    };
    for (std::size_t j = 0; j < p2.size(); ++j)
        if (auto it = index1.find(p2[j].name); it != index1.end()) {
            if (p1[it->second].arity() != p2[j].arity())
                throw FusionValidationFailed({"predicate `" + p2[j].name + "` is declared with arity " +
                                              std::to_string(p1[it->second].arity()) + " and " +
                                              std::to_string(p2[j].arity())});
            absorb(it->second, j, 1.0);
        }

    if (cfg.mode == EquivalenceMode::llm) {
        std::vector<std::string> t1, t2;
        for (const auto &p : p1)
            t1.push_back(pddl::render_predicate(p));
        for (const auto &p : p2)
            t2.push_back(pddl::render_predicate(p));
        auto candidates = rank<pddl::PredicateSchema>(session, p1, p2, t1, t2, absorbed, cfg.tau_p,
                                                      [](const pddl::PredicateSchema &p) { return p.arity(); });
        for (const auto &c : candidates) {
            if (absorbed.count(c.j))
                continue;
            if (ask_equivalent(session, "predicate_equivalence", t1[c.i], t2[c.j], cfg))
                absorb(c.i, c.j, c.similarity);
        }
    }
    for (std::size_t j = 0; j < p2.size(); ++j)
        if (!absorbed.count(j))
            out.merged.push_back(p2[j]);
    std::sort(out.merged.begin(), out.merged.end(),
              [](const auto &a, const auto &b) { return a.name < b.name; });
    return out;
}

std::string describe_operator(const pddl::OperatorSchema &op) {
    std::vector<std::string> pre, eff;
    for (const auto &l : op.preconditions)
        pre.push_back(l.str());
    for (const auto &l : op.effects)
        eff.push_back(l.str());
    return op.signature() + " pre: " + join(pre, " ") + " eff: " + join(eff, " ");
}

pddl::OperatorSchema rename_predicates(pddl::OperatorSchema op, const std::map<std::string, std::string> &renames) {
    auto apply = [&](const std::set<pddl::Literal> &in) {
        std::set<pddl::Literal> result;
        for (auto l : in) {
            if (auto it = renames.find(l.predicate); it != renames.end())
                l.predicate = it->second;
            result.insert(std::move(l));
        }
        return result;
    };
    op.preconditions = apply(op.preconditions);
    op.effects = apply(op.effects);
    return op;
}

OperatorMergeResult merge_operators(oracle::OracleSession &session, const std::vector<pddl::OperatorSchema> &o1,
                                    const std::vector<pddl::OperatorSchema> &o2, const FusionConfig &cfg,
                                    const pddl::Domain *scope) {
    OperatorMergeResult out;
    out.merged = o1;
    std::set<std::size_t> used1, used2;
    std::vector<std::size_t> keep2; // right-side operators that survive as their own schema

    auto try_merge = [&](std::size_t i, std::size_t j, double phi) {
        if (auto merged = union_bodies(out.merged[i], o2[j], scope)) {
            out.merged[i] = std::move(*merged);
            used1.insert(i);
            used2.insert(j);
            out.merges.push_back({o1[i].name, o2[j].name, phi});
            return true;
        }
        out.rejected.push_back({o1[i].name, o2[j].name, phi});
        return false;
    };

    std::map<std::string, std::size_t> index1;
    for (std::size_t i = 0; i < o1.size(); ++i)
        index1[o1[i].name] = i;
    for (std::size_t j = 0; j < o2.size(); ++j) {
        auto it = index1.find(o2[j].name);
        if (it == index1.end())
            continue;
        std::size_t i = it->second;
        if (o1[i] == o2[j]) {
            used1.insert(i);
            used2.insert(j);
            out.merges.push_back({o1[i].name, o2[j].name, 1.0});
            continue;
        }
        bool same = cfg.mode == EquivalenceMode::exact_name ||
                    ask_equivalent(session, "operator_equivalence", describe_operator(o1[i]), describe_operator(o2[j]),
                                   cfg);
        if (!same || !try_merge(i, j, 1.0))
            used2.insert(j), keep2.push_back(j); // kept under a fresh name below
    }

    if (cfg.mode == EquivalenceMode::llm) {
        std::vector<std::string> n1, n2;
        for (const auto &o : o1)
            n1.push_back(o.name);
        for (const auto &o : o2)
            n2.push_back(o.name);
        auto candidates = rank<pddl::OperatorSchema>(session, o1, o2, n1, n2, used2, cfg.tau_o,
                                                     [](const pddl::OperatorSchema &o) { return o.params.size(); });
        for (const auto &c : candidates) {
            if (used1.count(c.i) || used2.count(c.j))
                continue;
            if (ask_equivalent(session, "operator_equivalence", describe_operator(out.merged[c.i]),
                               describe_operator(o2[c.j]), cfg))
                try_merge(c.i, c.j, c.similarity);
        }
    }

    std::set<std::string> taken;
    for (const auto &o : out.merged)
        taken.insert(o.name);
    for (std::size_t j = 0; j < o2.size(); ++j)
        if (!used2.count(j))
            keep2.push_back(j);
    std::sort(keep2.begin(), keep2.end());
    for (std::size_t j : keep2)
        taken.insert(o2[j].name);
    for (std::size_t j : keep2) {
        pddl::OperatorSchema op = o2[j];
        if (index1.count(op.name)) {
            op.name = fresh_name(op.name, taken);
            taken.insert(op.name);
            out.renames[o2[j].name] = op.name;
        }
        out.merged.push_back(std::move(op));
    }
    std::sort(out.merged.begin(), out.merged.end(), [](const auto &a, const auto &b) { return a.name < b.name; });
    return out;
}

FuseResult fuse(oracle::OracleSession &session, const pddl::Domain &d1, const pddl::Domain &d2,
                const FusionConfig &cfg) {
    cfg.validate();
    FuseResult out;
    pddl::Domain &d = out.domain;
    d.name = d1.name;
    d.types = d1.types;
    std::vector<std::string> conflicts;
    merge_types(d, d2, conflicts);
    if (!conflicts.empty())
        throw FusionValidationFailed(conflicts);

    std::string saved_stage = session.stage();
    session.set_stage("fusion.predicates");
    auto preds = merge_predicates(session, d1.predicates, d2.predicates, cfg, &d);
    d.predicates = preds.merged;

    std::vector<pddl::OperatorSchema> o2;
    for (const auto &op : d2.operators)
        o2.push_back(rename_predicates(op, preds.renames));
    session.set_stage("fusion.operators");
    auto ops = merge_operators(session, d1.operators, o2, cfg, &d);
    d.operators = ops.merged;
    session.set_stage(saved_stage);
    d.canonicalize();

    auto errors = format_all(pddl::validate_domain(d));
    if (!errors.empty())
        throw FusionValidationFailed(errors);

    MergeRecord record{1, d1.name, d2.name, preds.merges, ops.merges, ops.rejected, ops.renames};
    out.log.predicate_renames = preds.renames;
    out.log.leaf_renames = {{}, preds.renames};
    for (const auto &m : ops.merges)
        out.log.operator_merges.emplace_back(m.kept, m.absorbed);
    out.log.records.push_back(std::move(record));
    return out;
}

FuseAllResult fuse_all(oracle::OracleSession &session, const std::vector<pddl::Domain> &domains,
                       const FusionConfig &cfg, const std::string &name) {
    cfg.validate();
    FusionTree tree = build_fusion_tree(domains.size());
    FuseAllResult out;
    out.log.leaf_renames.assign(domains.size(), {});

    struct Node {
        pddl::Domain domain;
        std::vector<std::size_t> leaves;
    };
    std::vector<Node> current;
    for (std::size_t i = 0; i < domains.size(); ++i)
        current.push_back({domains[i], {i}});

    for (std::size_t level = 0; level < tree.levels.size(); ++level) {
        const auto &tasks = tree.levels[level];
        std::vector<std::unique_ptr<oracle::OracleSession>> sessions;
        std::vector<std::future<FuseResult>> futures;
        for (const auto &task : tasks) {
            if (!task.right) {
                futures.emplace_back();
                sessions.emplace_back();
                continue;
            }
            sessions.push_back(std::make_unique<oracle::OracleSession>(session.client()));
            sessions.back()->set_stage(session.stage());
            auto run = [&, s = sessions.back().get(), l = task.left, r = *task.right] {
                return fuse(*s, current[l].domain, current[r].domain, cfg);
            };
            futures.push_back(std::async(cfg.parallel ? std::launch::async : std::launch::deferred, run));
        }

        std::vector<Node> next;
        std::exception_ptr failure;
        std::vector<std::optional<FuseResult>> results(tasks.size());
        for (std::size_t t = 0; t < tasks.size(); ++t) {
            if (!tasks[t].right)
                continue;
            try {
                results[t] = futures[t].get();
            } catch (...) {
                if (!failure)
                    failure = std::current_exception();
            }
            session.absorb(*sessions[t]);
        }
        if (failure)
            std::rethrow_exception(failure);

        for (std::size_t t = 0; t < tasks.size(); ++t) {
            const auto &task = tasks[t];
            if (!task.right) {
                next.push_back(std::move(current[task.left]));
                continue;
            }
            FuseResult &r = *results[t];
            MergeRecord record = r.log.records.front();
            record.level = level + 1;
            out.log.records.push_back(record);
            for (const auto &m : record.operators)
                out.log.operator_merges.emplace_back(m.kept, m.absorbed);
            const auto &renames = r.log.predicate_renames;
            Node merged{std::move(r.domain), current[task.left].leaves};
            for (std::size_t leaf : current[*task.right].leaves) {
                merged.leaves.push_back(leaf);
                auto &map = out.log.leaf_renames[leaf];
                for (const auto &p : domains[leaf].predicates) {
                    std::string now = map.count(p.name) ? map[p.name] : p.name;
                    if (auto it = renames.find(now); it != renames.end())
                        map[p.name] = it->second;
                }
            }
            next.push_back(std::move(merged));
        }
        current = std::move(next);
        std::vector<pddl::Domain> snapshot;
        for (const auto &n : current)
            snapshot.push_back(n.domain);
        out.levels.push_back(std::move(snapshot));
    }

    for (const auto &map : out.log.leaf_renames)
        for (const auto &[old, canonical] : map)
            out.log.predicate_renames.emplace(old, canonical);
    out.domain = std::move(current.front().domain);
    if (!name.empty())
        out.domain.name = name;
    return out;
}

std::vector<std::filesystem::path> read_domain_list(const std::filesystem::path &list) {
    std::istringstream in(pddl::read_text(list));
    std::vector<std::filesystem::path> paths;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos)
            continue;
        std::filesystem::path p(line.substr(first, line.find_last_not_of(" \t\r") - first + 1));
        paths.push_back(p.is_absolute() ? p : list.parent_path() / p);
    }
    if (paths.empty())
        throw Error(list.string() + ": no domains listed");
    return paths;
}

std::vector<pddl::Domain> load_domain_list(const std::filesystem::path &list) {
    std::vector<pddl::Domain> out;
    for (const auto &p : read_domain_list(list)) {
        try {
            out.push_back(pddl::load_domain(p));
        } catch (const pddl::PddlError &e) {
            throw Error(e.diagnostic().format(p.string()));
        }
    }
    return out;
}

void write_fusion(const FuseAllResult &result, const std::filesystem::path &dir, bool intermediates) {
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "fused.pddl") << pddl::print_domain(result.domain);
    std::ofstream(dir / "merge_log.json") << result.log.to_json().dump(2) << "\n";
    if (!intermediates)
        return;
    std::filesystem::create_directories(dir / "levels");
    for (std::size_t l = 0; l < result.levels.size(); ++l)
        for (std::size_t i = 0; i < result.levels[l].size(); ++i)
            std::ofstream(dir / "levels" / ("level_" + std::to_string(l + 1) + "_" + std::to_string(i) + ".pddl"))
                << pddl::print_domain(result.levels[l][i]);
}

} // namespace unidomain::fusion
