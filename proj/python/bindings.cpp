// Python bindings for the main operations. Oracle-backed calls take a
// transcript and a mode so they run offline under replay.

#include "unidomain/domain_graph.hpp"
#include "unidomain/eval.hpp"
#include "unidomain/fusion.hpp"
#include "unidomain/keyframes.hpp"
#include "unidomain/planner.hpp"
#include "unidomain/task_plan.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace unidomain;

namespace {

py::object from_json(const nlohmann::json &doc) { return py::module_::import("json").attr("loads")(doc.dump()); }

std::vector<std::string> diagnostics(const std::vector<Diagnostic> &diags, const std::string &file) {
    std::vector<std::string> out;
    for (const auto &d : diags)
        out.push_back(d.format(file));
    return out;
}

std::unique_ptr<oracle::OracleClient> make_client(const std::string &mode, const std::filesystem::path &transcript,
                                                  const std::string &base_url, const std::string &model,
                                                  int parallelism) {
    oracle::OracleConfig c = oracle::OracleConfig::from_env();
    c.mode = oracle::parse_mode(mode);
    c.transcript = transcript;
    if (!base_url.empty())
        c.http.base_url = base_url;
    c.model = model;
    c.parallelism = parallelism;
    return std::make_unique<oracle::OracleClient>(c);
}

task::PlanConfig plan_config(bool grouping, bool filtering) {
    task::PlanConfig cfg;
    cfg.grouping = grouping;
    cfg.filtering = filtering;
    return cfg;
}

eval::Episode to_episode(const py::dict &d) {
    eval::Episode e;
    e.task_id = d.contains("task_id") ? d["task_id"].cast<std::string>() : "";
    e.domain = d.contains("domain") ? d["domain"].cast<std::string>() : "";
    e.success = d["success"].cast<bool>();
    e.cost = d["cost"].cast<std::size_t>();
    if (d.contains("optimal") && !d["optimal"].is_none())
        e.optimal = d["optimal"].cast<std::size_t>();
    return e;
}

std::vector<eval::Episode> to_episodes(const py::list &items) {
    std::vector<eval::Episode> out;
    for (const auto &item : items)
        out.push_back(to_episode(item.cast<py::dict>()));
    return out;
}

py::dict summary_dict(const eval::Summary &s) {
    py::dict d;
    d["n"] = s.n;
    d["SR"] = s.sr;
    d["SPL"] = s.spl;
    d["OR(2)"] = s.or2;
    d["OR(1)"] = s.or1;
    d["OR(0)"] = s.or0;
    d["unknown_optimal"] = s.unknown_optimal;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "PDDL domain learning, fusion and task planning";

    auto error = py::register_exception<Error>(m, "UnidomainError", PyExc_RuntimeError);
    py::register_exception<pddl::PddlError>(m, "PddlError", error.ptr());

    py::class_<pddl::Domain>(m, "Domain")
        .def_readonly("name", &pddl::Domain::name)
        .def_property_readonly("types",
                               [](const pddl::Domain &d) {
                                   std::vector<std::pair<std::string, std::string>> out;
                                   for (const auto &t : d.types)
                                       out.emplace_back(t.name, t.parent);
                                   return out;
                               })
        .def_property_readonly("predicates",
                               [](const pddl::Domain &d) {
                                   std::vector<std::string> out;
                                   for (const auto &p : d.predicates)
                                       out.push_back(pddl::render_predicate(p));
                                   return out;
                               })
        .def_property_readonly("operators",
                               [](const pddl::Domain &d) {
                                   std::vector<std::string> out;
                                   for (const auto &o : d.operators)
                                       out.push_back(o.name);
                                   return out;
                               })
        .def("validate", [](const pddl::Domain &d) { return diagnostics(pddl::validate_domain(d), d.name); })
        .def("to_pddl", &pddl::print_domain)
        .def("__eq__", [](const pddl::Domain &a, const pddl::Domain &b) { return a == b; })
        .def("__repr__", [](const pddl::Domain &d) {
            return "<Domain " + d.name + ": " + std::to_string(d.predicates.size()) + " predicates, " +
                   std::to_string(d.operators.size()) + " operators>";
        });

    py::class_<pddl::Problem>(m, "Problem")
        .def_readonly("name", &pddl::Problem::name)
        .def_readonly("domain_name", &pddl::Problem::domain_name)
        .def_property_readonly("objects",
                               [](const pddl::Problem &p) {
                                   std::vector<std::pair<std::string, std::string>> out;
                                   for (const auto &o : p.objects)
                                       out.emplace_back(o.name, o.type);
                                   return out;
                               })
        .def_property_readonly("init",
                               [](const pddl::Problem &p) {
                                   std::vector<std::string> out;
                                   for (const auto &a : p.init)
                                       out.push_back(a.str());
                                   return out;
                               })
        .def_property_readonly("goal",
                               [](const pddl::Problem &p) {
                                   std::vector<std::string> out;
                                   for (const auto &l : p.goal)
                                       out.push_back(l.str());
                                   return out;
                               })
        .def("to_pddl", &pddl::print_problem)
        .def("__eq__", [](const pddl::Problem &a, const pddl::Problem &b) { return a == b; });

    py::class_<pddl::Plan>(m, "Plan")
        .def_property_readonly("steps",
                               [](const pddl::Plan &p) {
                                   std::vector<std::string> out;
                                   for (const auto &s : p.steps)
                                       out.push_back(s.str());
                                   return out;
                               })
        .def_property_readonly("cost", &pddl::Plan::cost)
        .def("__len__", &pddl::Plan::cost)
        .def("__str__", &pddl::print_plan)
        .def("__eq__", [](const pddl::Plan &a, const pddl::Plan &b) { return a == b; });

    m.def("parse_domain", [](const std::string &text) { return pddl::parse_domain(text); }, py::arg("text"));
    m.def("load_domain", &pddl::load_domain, py::arg("path"));
    m.def("parse_problem", [](const std::string &text, const pddl::Domain &d) { return pddl::parse_problem(text, d); },
          py::arg("text"), py::arg("domain"));
    m.def("load_problem", &pddl::load_problem, py::arg("path"), py::arg("domain"));
    m.def("parse_plan", [](const std::string &text) { return pddl::parse_plan(text); }, py::arg("text"));

    m.def(
        "plan",
        [](const pddl::Domain &d, const pddl::Problem &p, const std::string &mode, std::size_t max_expansions,
           double max_seconds) {
            planner::SearchLimit limits;
            limits.max_expansions = max_expansions;
            limits.max_seconds = max_seconds;
            auto search = mode == "satisficing" ? planner::SearchMode::satisficing : planner::SearchMode::optimal;
            planner::SolveResult r;
            {
                py::gil_scoped_release release;
                r = planner::plan(d, p, search, limits);
            }
            py::dict out;
            out["outcome"] = planner::to_string(r.outcome);
            out["plan"] = r.solved() ? py::cast(r.plan) : py::none();
            out["expanded"] = r.expanded;
            return out;
        },
        py::arg("domain"), py::arg("problem"), py::arg("mode") = "optimal", py::arg("max_expansions") = 1'000'000,
        py::arg("max_seconds") = 60.0, "Plan with A* (optimal) or greedy best-first search (satisficing).");
    m.def(
        "validate_plan",
        [](const pddl::Domain &d, const pddl::Problem &p, const pddl::Plan &plan) {
            auto v = planner::validate_plan(d, p, plan);
            py::dict out;
            out["valid"] = v.valid;
            out["step"] = v.step;
            out["reason"] = v.reason;
            return out;
        },
        py::arg("domain"), py::arg("problem"), py::arg("plan"));
    m.def(
        "optimal_cost",
        [](const pddl::Domain &d, const pddl::Problem &p) -> std::optional<std::size_t> {
            auto c = planner::optimal_cost(d, p);
            if (c.known())
                return c.cost;
            return std::nullopt;
        },
        py::arg("domain"), py::arg("problem"));

    m.def(
        "extract_keyframes",
        [](const std::vector<std::uint64_t> &energies, std::size_t window) {
            std::vector<std::pair<std::size_t, std::string>> out;
            for (const auto &k : keyframes::extract_keyframes(energies, window))
                out.emplace_back(k.index, keyframes::to_string(k.kind));
            return out;
        },
        py::arg("energies"), py::arg("window") = keyframes::kDefaultWindow,
        "Indices that are window extrema of the energy series, with their kind.");
    m.def(
        "frame_energies",
        [](const std::filesystem::path &dir) {
            std::vector<keyframes::GrayFrame> frames;
            for (const auto &f : keyframes::list_frames(dir))
                frames.push_back(keyframes::read_frame(f));
            return keyframes::frame_energies(frames);
        },
        py::arg("frames_dir"));

    m.def(
        "filter_domain",
        [](const pddl::Domain &d, const pddl::Problem &p) {
            auto r = task::filter_domain(d, p);
            py::dict out;
            out["p0"] = r.p0;
            out["o_pre"] = r.o_pre;
            out["o_eff"] = r.o_eff;
            out["o_reduced"] = r.o_reduced;
            out["compact"] = r.compact;
            return out;
        },
        py::arg("domain"), py::arg("problem"));
    m.def(
        "graph_stats",
        [](const pddl::Domain &d) {
            auto s = graph::stats(graph::to_graph(d, d.name));
            py::dict out;
            out["operators"] = s.n_operators;
            out["predicates"] = s.n_predicates;
            out["edges"] = s.n_edges;
            out["categories"] = s.n_categories;
            return out;
        },
        py::arg("domain"));

    m.def("success_rate", [](const py::list &e) { return eval::success_rate(to_episodes(e)); }, py::arg("episodes"));
    m.def("spl", [](const py::list &e) { return eval::spl(to_episodes(e)); }, py::arg("episodes"));
    m.def("or_k", [](const py::list &e, std::size_t K) { return eval::or_k(to_episodes(e), K); }, py::arg("episodes"),
          py::arg("K"));
    m.def("summarize", [](const py::list &e) { return summary_dict(eval::summarize(to_episodes(e))); },
          py::arg("episodes"), "Episodes are dicts with success, cost and optionally optimal.");

    m.def(
        "fuse",
        [](const std::vector<std::filesystem::path> &paths, const std::filesystem::path &transcript,
           const std::string &name, const std::string &mode, const std::string &base_url, const std::string &model) {
            std::vector<pddl::Domain> domains;
            for (const auto &p : paths)
                domains.push_back(pddl::load_domain(p));
            auto client = make_client(mode, transcript, base_url, model, 4);
            fusion::FuseAllResult r;
            oracle::UsageCounters usage;
            {
                py::gil_scoped_release release;
                oracle::OracleSession session(*client);
                r = fusion::fuse_all(session, domains, {}, name);
                usage = session.usage();
            }
            py::dict out;
            out["domain"] = r.domain;
            out["merge_log"] = from_json(r.log.to_json());
            out["llm_calls"] = usage.n_calls;
            return out;
        },
        py::arg("paths"), py::arg("transcript"), py::arg("name") = "", py::arg("mode") = "replay",
        py::arg("base_url") = "", py::arg("model") = "gpt-4.1", "Fuse atomic domains along the binary tree.");
    m.def(
        "plan_task",
        [](const pddl::Domain &fused, const std::filesystem::path &task_file, const std::filesystem::path &transcript,
           bool grouping, bool filtering, const std::string &mode, const std::string &base_url,
           const std::string &model) {
            auto spec = task::TaskSpec::load(task_file);
            auto client = make_client(mode, transcript, base_url, model, 4);
            task::PlanTrace trace;
            {
                py::gil_scoped_release release;
                oracle::OracleSession session(*client);
                trace = task::plan_task(session, fused, nullptr, spec, plan_config(grouping, filtering));
            }
            py::dict out;
            out["plan"] = trace.plan ? py::cast(*trace.plan) : py::none();
            out["trace"] = from_json(trace.to_json());
            return out;
        },
        py::arg("domain"), py::arg("task"), py::arg("transcript"), py::arg("grouping") = true,
        py::arg("filtering") = true, py::arg("mode") = "replay", py::arg("base_url") = "",
        py::arg("model") = "gpt-4.1");
    m.def(
        "run_suite",
        [](const pddl::Domain &fused, const std::filesystem::path &suite, const std::filesystem::path &transcript,
           const std::string &format, bool grouping, bool filtering, std::size_t parallelism, const std::string &mode,
           const std::string &base_url, const std::string &model) {
            auto tasks = eval::load_suite(suite);
            auto client = make_client(mode, transcript, base_url, model, static_cast<int>(parallelism));
            eval::SuiteConfig cfg;
            cfg.plan = plan_config(grouping, filtering);
            cfg.parallelism = parallelism;
            cfg.label = eval::ablation_label(cfg.plan);
            std::string text;
            {
                py::gil_scoped_release release;
                auto res = eval::run_suite(*client, fused, tasks, cfg);
                text = eval::emit_report(res.report(cfg.label), eval::parse_report_format(format));
            }
            return text;
        },
        py::arg("domain"), py::arg("suite"), py::arg("transcript"), py::arg("format") = "json",
        py::arg("grouping") = true, py::arg("filtering") = true, py::arg("parallelism") = 4,
        py::arg("mode") = "replay", py::arg("base_url") = "", py::arg("model") = "gpt-4.1",
        "Run a task suite and return the report in json, csv or markdown.");
}
