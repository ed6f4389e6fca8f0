#include "unidomain/task_plan.hpp"

#include "llm_common.hpp"

#include "unidomain/domain_graph.hpp"
#include "unidomain/domain_learn.hpp"
#include "unidomain/keyframes.hpp"

#include <algorithm>
#include <fstream>

namespace unidomain::task {

using namespace detail;

namespace {

std::string schema_text(const pddl::PredicateSchema &p) {
    std::string out = "(" + p.name;
    for (const auto &param : p.params)
        out += " " + param.name + (param.type == pddl::kRootType ? "" : " - " + param.type);
    return out + ")";
}

std::string group_listing(const pddl::Domain &dom, const PredicateGroups *groups) {
    auto render = [&](const std::vector<std::string> &names) {
        std::vector<std::string> items;
        for (const auto &n : names)
            if (const auto *p = dom.find_predicate(n))
                items.push_back(schema_text(*p));
        return items.empty() ? std::string("(none)") : join(items, " ");
    };
    if (!groups) {
        std::vector<std::string> all;
        for (const auto &p : dom.predicates)
            all.push_back(p.name);
        return "all predicates: " + render(all);
    }
    std::vector<std::string> lines;
    for (const auto &key : PredicateGroups::keys())
        lines.push_back(key + ": " + render(groups->group(key)));
    return join(lines, "\n");
}

/// The outermost JSON object in a reply, fences and prose tolerated.
std::optional<nlohmann::json> extract_json_object(const std::string &reply) {
    auto open = reply.find('{');
    auto close = reply.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open)
        return std::nullopt;
    auto doc = nlohmann::json::parse(reply.substr(open, close - open + 1), nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        return std::nullopt;
    return doc;
}

oracle::Message with_image(oracle::Message msg, const std::filesystem::path &image) {
    msg.parts.push_back(oracle::Part::of_image({"image/png", keyframes::load_as_png(image)}));
    return msg;
}

std::function<std::string(const std::string &)> problem_acceptor(pddl::Problem &out, const pddl::Domain &dom,
                                                                  const pddl::Domain *also) {
    return [&out, &dom, also](const std::string &reply) -> std::string {
        try {
            pddl::Problem p = pddl::parse_problem(require_block(reply), dom);
            std::string diags = diagnostics_text(pddl::validate_problem(p, dom));
            if (diags.empty() && also)
                diags = diagnostics_text(pddl::validate_problem(p, *also));
            if (!diags.empty())
                return diags;
            out = std::move(p);
            return {};
        } catch (const std::exception &e) {
            return error_text(e);
        }
    };
}

nlohmann::json calls_json(const std::vector<oracle::TraceEntry> &calls) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto &c : calls)
        out.push_back({{"stage", c.stage}, {"kind", c.kind}, {"digest", c.digest}, {"latency_s", c.latency_s}});
    return out;
}

} // namespace

const std::vector<std::string> &PredicateGroups::keys() {
    static const std::vector<std::string> k{"object_category", "state_attribute", "spatial_relation", "affordance"};
    return k;
}

std::vector<std::string> &PredicateGroups::group(const std::string &key) {
    return const_cast<std::vector<std::string> &>(std::as_const(*this).group(key));
}

const std::vector<std::string> &PredicateGroups::group(const std::string &key) const {
    if (key == "object_category")
        return object_category;
    if (key == "state_attribute")
        return state_attribute;
    if (key == "spatial_relation")
        return spatial_relation;
    if (key == "affordance")
        return affordance;
    throw Error("unknown predicate group `" + key + "`");
}

std::size_t PredicateGroups::size() const {
    return object_category.size() + state_attribute.size() + spatial_relation.size() + affordance.size();
}

nlohmann::json PredicateGroups::to_json() const {
    nlohmann::json j;
    for (const auto &key : keys())
        j[key] = group(key);
    j["warnings"] = warnings;
    return j;
}

PredicateGroups PredicateGroups::from_json(const nlohmann::json &doc) {
    PredicateGroups g;
    for (const auto &key : keys())
        g.group(key) = doc.at(key).get<std::vector<std::string>>();
    if (doc.contains("warnings"))
        g.warnings = doc.at("warnings").get<std::vector<std::string>>();
    return g;
}

PredicateGroups partition(const nlohmann::json &raw, const std::vector<std::string> &predicates) {
    PredicateGroups g;
    std::set<std::string> known(predicates.begin(), predicates.end()), placed;
    for (const auto &key : PredicateGroups::keys()) {
        if (!raw.contains(key) || !raw.at(key).is_array())
            continue;
        for (const auto &item : raw.at(key)) {
            if (!item.is_string())
                continue;
            std::string name = pddl::to_lower(item.get<std::string>());
            if (auto paren = name.find('('); paren != std::string::npos)
                name.erase(paren);
            if (!known.count(name)) {
                g.warnings.push_back("unknown predicate `" + name + "` in group " + key + " ignored");
            } else if (!placed.insert(name).second) {
                g.warnings.push_back("predicate `" + name + "` listed again in group " + key + "; first group kept");
            } else {
                g.group(key).push_back(name);
            }
        }
    }
    for (const auto &name : predicates)
        if (!placed.count(name)) {
            g.state_attribute.push_back(name);
            g.warnings.push_back("predicate `" + name + "` was not grouped; placed in state_attribute");
        }
    return g;
}

TaskSpec TaskSpec::from_json(const nlohmann::json &doc, const std::filesystem::path &base) {
    auto resolve = [&](const std::string &p) {
        std::filesystem::path path(p);
        return path.is_absolute() || base.empty() ? path : base / path;
    };
    TaskSpec t;
    try {
        t.id = doc.at("id").get<std::string>();
        t.instruction = doc.at("instruction").get<std::string>();
        t.image = resolve(doc.at("image").get<std::string>());
        if (doc.contains("gt_problem") && !doc.at("gt_problem").is_null())
            t.gt_problem = resolve(doc.at("gt_problem").get<std::string>());
    } catch (const nlohmann::json::exception &e) {
        throw Error(std::string("task spec: ") + e.what());
    }
    t.validate();
    return t;
}

TaskSpec TaskSpec::load(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open task spec " + path.string());
    auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded())
        throw Error(path.string() + ": not valid JSON");
    return from_json(doc, path.parent_path());
}

void TaskSpec::validate() const {
    if (id.empty())
        throw Error("task spec needs an id");
    if (instruction.empty())
        throw Error("task `" + id + "` has an empty instruction");
}

PredicateGroups group_predicates(oracle::OracleSession &session, const pddl::Domain &dom, std::size_t R_parse) {
    std::vector<std::string> names;
    for (const auto &p : dom.predicates)
        names.push_back(p.name);
    if (names.empty())
        return {};
    std::vector<std::string> lines;
    for (const auto &p : dom.predicates)
        lines.push_back("- " + schema_text(p));
    oracle::ChatRequest req = base_request(session);
    req.messages.push_back(
        oracle::Message::text("user", prompts::render("group_predicates", {{"predicates", join(lines, "\n")}})));
    std::optional<nlohmann::json> raw;
    learn::ask_with_repair(session, req, R_parse, "JSON object", [&](const std::string &reply) -> std::string {
        raw = extract_json_object(reply);
        if (!raw)
            return "the reply contains no JSON object";
        for (const auto &key : PredicateGroups::keys())
            if (raw->contains(key))
                return {};
        return "the JSON object has none of the keys object_category, state_attribute, spatial_relation, affordance";
    });
    return partition(*raw, names);
}

pddl::Problem gen_initial_problem(oracle::OracleSession &session, const pddl::Domain &dom,
                                  const PredicateGroups *groups, const TaskSpec &task, std::size_t R_parse) {
    task.validate();
    oracle::ChatRequest req = base_request(session);
    req.messages.push_back(with_image(
        oracle::Message::text("user", prompts::render("initial_problem", {{"instruction", task.instruction},
                                                                          {"domain", dom.name},
                                                                          {"types", type_listing(dom)},
                                                                          {"groups", group_listing(dom, groups)},
                                                                          {"problem", sanitize(task.id)}})),
        task.image));
    pddl::Problem out;
    learn::ask_with_repair(session, req, R_parse, "PDDL problem", problem_acceptor(out, dom, nullptr));
    return out;
}

FilterResult filter_domain(const pddl::Domain &dom, const pddl::Problem &p0) {
    FilterResult r;
    for (const auto &a : p0.init)
        r.p0.insert(a.predicate);
    for (const auto &l : p0.goal)
        r.p0.insert(l.predicate);

    graph::DomainGraph g = graph::to_graph(dom, dom.name);
    for (const auto &e : g.edges) {
        if (!r.p0.count(e.predicate.name))
            continue;
        (e.kind == graph::EdgeKind::pre ? r.o_pre : r.o_eff).insert(e.op);
    }
    r.o_reduced = r.o_pre;
    r.o_reduced.insert(r.o_eff.begin(), r.o_eff.end());

    r.compact.name = dom.name;
    r.compact.types = dom.types;
    std::set<std::string> keep = r.p0;
    for (const auto &op : dom.operators) {
        if (!r.o_reduced.count(op.name))
            continue;
        r.compact.operators.push_back(op);
        for (const auto &l : op.preconditions)
            keep.insert(l.predicate);
        for (const auto &l : op.effects)
            keep.insert(l.predicate);
    }
    for (const auto &p : dom.predicates)
        if (keep.count(p.name))
            r.compact.predicates.push_back(p);
    r.compact.canonicalize();
    return r;
}

pddl::Problem gen_refined_problem(oracle::OracleSession &session, const pddl::Domain &compact,
                                  const pddl::Domain &full, const TaskSpec &task, std::size_t R_parse) {
    task.validate();
    oracle::ChatRequest req = base_request(session);
    req.messages.push_back(with_image(
        oracle::Message::text("user", prompts::render("refined_problem", {{"instruction", task.instruction},
                                                                          {"domain", pddl::print_domain(compact)},
                                                                          {"problem", sanitize(task.id)},
                                                                          {"domain_name", full.name}})),
        task.image));
    pddl::Problem out;
    learn::ask_with_repair(session, req, R_parse, "PDDL problem", problem_acceptor(out, compact, &full));
    return out;
}

nlohmann::json PlanTrace::to_json() const {
    nlohmann::json j;
    j["task_id"] = task_id;
    j["groups"] = groups ? groups->to_json() : nlohmann::json();
    j["initial_problem"] = initial_problem ? nlohmann::json(pddl::print_problem(*initial_problem)) : nlohmann::json();
    if (filter) {
        j["filter"] = {{"p0", filter->p0},
                       {"o_pre", filter->o_pre},
                       {"o_eff", filter->o_eff},
                       {"o_reduced", filter->o_reduced},
                       {"compact", pddl::print_domain(filter->compact)}};
    } else {
        j["filter"] = nullptr;
    }
    j["refined_problem"] = refined_problem ? nlohmann::json(pddl::print_problem(*refined_problem)) : nlohmann::json();
    j["outcome"] = planner::to_string(outcome);
    j["satisficing_fallback"] = satisficing_fallback;
    j["expanded"] = expanded;
    if (plan) {
        j["plan"] = nlohmann::json::array();
        for (const auto &s : plan->steps)
            j["plan"].push_back(s.str());
    } else {
        j["plan"] = nullptr;
    }
    j["usage"] = {{"n_calls", usage.n_calls}, {"thinking_time", usage.thinking_time}};
    j["calls"] = calls_json(calls);
    j["error"] = error;
    return j;
}

PlanTrace plan_task(oracle::OracleSession &session, const pddl::Domain &fused, const PredicateGroups *groups,
                    const TaskSpec &task, const PlanConfig &cfg, PlanTrace *partial) {
    PlanTrace trace;
    trace.task_id = task.id;
    const std::size_t mark = session.trace().size();
    const oracle::UsageCounters before = session.usage();
    const std::string saved_stage = session.stage();
    auto harvest = [&] {
        trace.calls.assign(session.trace().begin() + static_cast<std::ptrdiff_t>(mark), session.trace().end());
        trace.usage.n_calls = session.usage().n_calls - before.n_calls;
        trace.usage.thinking_time = session.usage().thinking_time - before.thinking_time;
        session.set_stage(saved_stage);
    };

    try {
        const PredicateGroups *use = nullptr;
        if (cfg.grouping) {
            if (!groups) {
                session.set_stage("plan.group");
                trace.groups = group_predicates(session, fused, cfg.R_parse);
            } else {
                trace.groups = *groups;
            }
            use = &*trace.groups;
        }

        session.set_stage("plan.initial_problem");
        trace.initial_problem = gen_initial_problem(session, fused, use, task, cfg.R_parse);
        pddl::Problem target = *trace.initial_problem;
        if (cfg.filtering) {
            trace.filter = filter_domain(fused, target);
            session.set_stage("plan.refined_problem");
            trace.refined_problem = gen_refined_problem(session, trace.filter->compact, fused, task, cfg.R_parse);
            target = *trace.refined_problem;
        }

        session.set_stage("plan.solve");
        planner::SolveResult result;
        try {
            planner::GroundedTask grounded = planner::ground(fused, target, cfg.ground_limit);
            result = planner::solve(grounded, planner::SearchMode::optimal, cfg.limits);
            if (result.outcome == planner::SolveOutcome::resource_limit) {
                trace.satisficing_fallback = true;
                std::size_t spent = result.expanded;
                result = planner::solve(grounded, planner::SearchMode::satisficing, cfg.limits);
                result.expanded += spent;
            }
        } catch (const StageError &) {
            throw;
        } catch (const Error &e) {
            throw StageError("plan.solve", e.what());
        }
        trace.outcome = result.outcome;
        trace.expanded = result.expanded;
        if (result.solved())
            trace.plan = result.plan;
    } catch (const StageError &e) {
        harvest();
        trace.error = e.what();
        if (partial)
            *partial = trace;
        throw;
    } catch (const std::exception &e) {
        // e.g. an unreadable scene image; tag it with the stage that was running
        StageError tagged(session.stage(), e.what());
        harvest();
        trace.error = tagged.what();
        if (partial)
            *partial = trace;
        throw tagged;
    }
    harvest();
    return trace;
}

} // namespace unidomain::task
