// Command line entry point. One subcommand per pipeline stage; all of them
// share a TOML-style settings file whose keys are the long flag names.
//
// Exit codes: 0 success, 1 operational failure, 2 usage error.

#include "unidomain/domain_graph.hpp"
#include "unidomain/domain_learn.hpp"
#include "unidomain/eval.hpp"
#include "unidomain/fusion.hpp"
#include "unidomain/keyframes.hpp"
#include "unidomain/planner.hpp"
#include "unidomain/task_plan.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <sstream>

namespace {

using namespace unidomain;
namespace fs = std::filesystem;

class UsageError : public Error {
public:
    using Error::Error;
};

std::atomic<bool> g_cancel{false};

extern "C" void on_sigint(int) {
    g_cancel = true;
    std::signal(SIGINT, SIG_DFL); // a second Ctrl-C stops immediately
}

struct Settings {
    fs::path out = "out";
    bool verbose = false;

    std::string oracle_mode = "replay";
    std::string base_url = "http://localhost:8000";
    std::string model = "gpt-4.1";
    std::string embed_model = "stub";
    fs::path transcript;
    int parallelism = 4;
    double http_timeout = 120.0;
    int http_attempts = 3;

    std::size_t k_test = 5;
    double theta = 0.6;
    std::size_t l_max = 5;
    std::size_t r_parse = 3;

    double tau_p = 0.3;
    double tau_o = 0.3;
    std::string equivalence = "llm";

    // Planner limits; unset keeps each stage's own default.
    std::optional<std::size_t> max_expansions;
    std::optional<double> max_seconds;
    std::string heuristic; // hmax or blind
    std::optional<std::size_t> max_ground_actions;
};

void log(const Settings &s, const std::string &message) {
    if (s.verbose)
        std::cerr << "unidomain: " << message << "\n";
}

void write_file(const fs::path &path, const std::string &text) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << text;
}

void apply_limits(const Settings &s, planner::SearchLimit &limits, planner::GroundLimit &ground) {
    if (s.max_expansions)
        limits.max_expansions = *s.max_expansions;
    if (s.max_seconds)
        limits.max_seconds = *s.max_seconds;
    if (!s.heuristic.empty())
        limits.optimal_heuristic = s.heuristic == "blind" ? planner::HeuristicKind::blind : planner::HeuristicKind::hmax;
    if (s.max_ground_actions)
        ground.max_actions = *s.max_ground_actions;
}

std::unique_ptr<oracle::OracleClient> make_client(const Settings &s) {
    oracle::OracleConfig c;
    c.mode = oracle::parse_mode(s.oracle_mode);
    c.http.base_url = s.base_url;
    c.http.timeout_s = s.http_timeout;
    c.http.max_attempts = s.http_attempts;
    if (const char *key = std::getenv("ORACLE_API_KEY"))
        c.http.api_key = key; // secrets come from the environment only
    c.model = s.model;
    c.embed_model = s.embed_model;
    c.transcript = s.transcript;
    c.parallelism = s.parallelism;
    if (c.mode != oracle::Mode::live && c.transcript.empty())
        throw UsageError("--transcript is required in " + oracle::to_string(c.mode) + " mode");
    return std::make_unique<oracle::OracleClient>(c);
}

task::PlanConfig plan_config(const Settings &s, bool no_grouping, bool no_filtering) {
    task::PlanConfig cfg;
    cfg.R_parse = s.r_parse;
    cfg.grouping = !no_grouping;
    cfg.filtering = !no_filtering;
    apply_limits(s, cfg.limits, cfg.ground_limit);
    return cfg;
}

pddl::Domain load_domain(const fs::path &path) {
    try {
        return pddl::load_domain(path);
    } catch (const pddl::PddlError &e) {
        throw StageError("load", e.diagnostic().format(path.string()));
    }
}

std::string usage_line(const oracle::UsageCounters &u) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu LLM calls, %.3f s thinking time", u.n_calls, u.thinking_time);
    return buf;
}

// validate --------------------------------------------------------------------

bool is_problem_text(const std::string &text) {
    return std::regex_search(text, std::regex("\\(\\s*problem\\s", std::regex::icase));
}

int cmd_validate(const std::vector<fs::path> &files, const std::vector<fs::path> &extra_domains) {
    std::size_t errors = 0;
    auto report = [&](const fs::path &file, const std::vector<Diagnostic> &diags) {
        bool clean = true;
        for (const auto &d : diags) {
            std::cout << d.format(file.string()) << "\n";
            if (d.severity == Severity::error) {
                clean = false;
                ++errors;
            }
        }
        if (clean)
            std::cout << file.string() << ": ok\n";
    };

    std::map<std::string, pddl::Domain> domains;
    std::vector<std::pair<fs::path, std::string>> problems;
    auto add_domain = [&](const fs::path &file, const std::string &text, bool print) {
        try {
            pddl::Domain d = pddl::parse_domain(text);
            auto diags = pddl::validate_domain(d);
            if (print)
                report(file, diags);
            domains.emplace(d.name, std::move(d));
        } catch (const pddl::PddlError &e) {
            report(file, {e.diagnostic()});
        }
    };
    for (const auto &f : extra_domains)
        add_domain(f, pddl::read_text(f), false);
    for (const auto &f : files) {
        std::string text = pddl::read_text(f);
        if (is_problem_text(text))
            problems.emplace_back(f, std::move(text));
        else
            add_domain(f, text, true);
    }
    for (const auto &[file, text] : problems) {
        std::smatch m;
        std::string name = std::regex_search(text, m, std::regex("\\(:domain\\s+([^\\s()]+)\\s*\\)", std::regex::icase))
                               ? pddl::to_lower(m[1].str())
                               : "";
        auto it = domains.find(name);
        if (it == domains.end()) {
            report(file, {{Severity::error, {}, "no domain named '" + name + "' among the inputs (see --domain)"}});
            continue;
        }
        try {
            report(file, pddl::validate_problem(pddl::parse_problem(text, it->second), it->second));
        } catch (const pddl::PddlError &e) {
            report(file, {e.diagnostic()});
        }
    }
    std::cerr << files.size() << " file(s), " << errors << " error(s)\n";
    return errors == 0 ? 0 : 1;
}

// keyframes -------------------------------------------------------------------

int cmd_keyframes(const Settings &s, const fs::path &input, std::size_t window) {
    keyframes::EnergySeries energies;
    std::vector<fs::path> frames;
    if (fs::is_regular_file(input)) {
        energies = keyframes::read_energy_csv(input);
    } else if (fs::is_regular_file(input / "energy.csv")) {
        energies = keyframes::read_energy_csv(input / "energy.csv");
    } else {
        frames = keyframes::list_frames(input);
        std::vector<keyframes::GrayFrame> gray;
        for (const auto &f : frames)
            gray.push_back(keyframes::read_frame(f));
        energies = keyframes::frame_energies(gray);
    }
    log(s, std::to_string(energies.size()) + " energies from " + input.string());
    auto kf = keyframes::extract_keyframes(energies, window);
    nlohmann::json doc;
    doc["window"] = window;
    doc["n_frames"] = energies.size();
    doc["indices"] = nlohmann::json::array();
    doc["keyframes"] = nlohmann::json::array();
    for (const auto &k : kf) {
        doc["indices"].push_back(k.index);
        nlohmann::json item = {{"index", k.index}, {"kind", keyframes::to_string(k.kind)}};
        if (!frames.empty())
            item["frame"] = frames[k.index].filename().string();
        doc["keyframes"].push_back(item);
    }
    std::string text = doc.dump(2) + "\n";
    write_file(s.out / "keyframes.json", text);
    std::cout << text;
    return 0;
}

// learn -----------------------------------------------------------------------

int cmd_learn(const Settings &s, const fs::path &manifest_path) {
    auto manifest = learn::DemoManifest::load(manifest_path);
    learn::LearnConfig cfg;
    cfg.K_test = s.k_test;
    cfg.theta = s.theta;
    cfg.L_max = s.l_max;
    cfg.R_parse = s.r_parse;
    apply_limits(s, cfg.limits, cfg.ground_limit);
    cfg.validate();
    auto client = make_client(s);
    oracle::OracleSession session(*client);
    const fs::path dir = s.out / manifest.demo_id;
    try {
        auto record = learn::learn_atomic_domain(session, manifest, cfg);
        learn::write_record(record, dir);
        log(s, "wrote " + dir.string() + "; " + usage_line(session.usage()));
        std::cout << pddl::print_domain(record.domain);
        return 0;
    } catch (const learn::LearnFailed &e) {
        learn::write_record(e.record(), dir); // kept for inspection
        throw;
    }
}

// fuse ------------------------------------------------------------------------

int cmd_fuse(const Settings &s, const fs::path &list, const std::string &name, bool intermediates) {
    std::vector<pddl::Domain> domains;
    try {
        domains = fusion::load_domain_list(list);
    } catch (const Error &e) {
        throw StageError("load", e.what());
    }
    fusion::FusionConfig cfg;
    cfg.tau_p = s.tau_p;
    cfg.tau_o = s.tau_o;
    cfg.mode = fusion::parse_equivalence_mode(s.equivalence);
    cfg.R_parse = s.r_parse;
    cfg.validate();
    auto client = make_client(s);
    oracle::OracleSession session(*client);
    auto result = fusion::fuse_all(session, domains, cfg, name);
    fusion::write_fusion(result, s.out, intermediates);
    log(s, "fused " + std::to_string(domains.size()) + " domains into " + (s.out / "fused.pddl").string() + "; " +
               usage_line(session.usage()));
    std::cout << pddl::print_domain(result.domain);
    return 0;
}

// graph -----------------------------------------------------------------------

int cmd_graph(const std::string &action, const fs::path &input) {
    graph::DomainGraph g = input.extension() == ".json"
                               ? graph::graph_from_json(nlohmann::json::parse(pddl::read_text(input)))
                               : graph::to_graph(load_domain(input), input.stem().string());
    if (action == "dot") {
        std::cout << graph::export_dot(g);
    } else if (action == "json") {
        std::cout << graph::to_json(g).dump(2) << "\n";
    } else {
        auto st = graph::stats(g);
        nlohmann::json doc = {{"operators", st.n_operators},
                              {"predicates", st.n_predicates},
                              {"edges", st.n_edges},
                              {"pre_edges", g.pre_edge_count()},
                              {"eff_edges", g.eff_edge_count()},
                              {"categories", st.n_categories}};
        std::cout << doc.dump(2) << "\n";
    }
    return 0;
}

// plan ------------------------------------------------------------------------

int cmd_plan(const Settings &s, const fs::path &domain_path, const fs::path &task_path, bool no_grouping,
             bool no_filtering) {
    pddl::Domain fused = load_domain(domain_path);
    auto spec = task::TaskSpec::load(task_path);
    auto cfg = plan_config(s, no_grouping, no_filtering);
    auto client = make_client(s);
    oracle::OracleSession session(*client);
    const fs::path dir = s.out / spec.id;
    task::PlanTrace trace;
    try {
        trace = task::plan_task(session, fused, nullptr, spec, cfg, &trace);
    } catch (const StageError &) {
        write_file(dir / "trace.json", trace.to_json().dump(2) + "\n");
        throw;
    }
    write_file(dir / "trace.json", trace.to_json().dump(2) + "\n");
    log(s, usage_line(trace.usage));
    if (!trace.plan) {
        std::cerr << "unidomain: [plan.solve] planner: " << planner::to_string(trace.outcome) << "\n";
        return 1;
    }
    std::string text = pddl::print_plan(*trace.plan);
    write_file(dir / "plan.txt", text);
    std::cout << text;
    return 0;
}

// eval ------------------------------------------------------------------------

int cmd_eval(const Settings &s, const fs::path &domain_path, const fs::path &suite_path, bool no_grouping,
             bool no_filtering, eval::ReportFormat format, double sr_floor) {
    pddl::Domain fused = load_domain(domain_path);
    auto tasks = eval::load_suite(suite_path);
    eval::SuiteConfig cfg;
    cfg.plan = plan_config(s, no_grouping, no_filtering);
    cfg.parallelism = static_cast<std::size_t>(std::max(s.parallelism, 1));
    cfg.label = eval::ablation_label(cfg.plan);
    cfg.cancel = &g_cancel;
    auto client = make_client(s);

    std::signal(SIGINT, on_sigint);
    auto result = eval::run_suite(*client, fused, tasks, cfg);
    std::signal(SIGINT, SIG_DFL);

    if (result.episodes.empty())
        throw StageError("eval", "cancelled before any task finished");
    for (const auto &t : result.traces)
        write_file(s.out / "traces" / (t.task_id + ".json"), t.to_json().dump(2) + "\n");
    auto report = result.report(cfg.label);
    write_file(s.out / "report.json", eval::emit_report(report, eval::ReportFormat::json));
    write_file(s.out / "report.csv", eval::emit_report(report, eval::ReportFormat::csv));
    write_file(s.out / "report.md", eval::emit_report(report, eval::ReportFormat::markdown));
    std::cout << eval::emit_report(report, format);
    for (const auto &e : report.episodes)
        if (!e.error.empty())
            log(s, e.task_id + ": " + e.error);

    if (result.cancelled) {
        std::cerr << "unidomain: cancelled; partial report over " << result.episodes.size() << " of "
                  << tasks.size() << " tasks\n";
        return 1;
    }
    if (report.overall.sr < sr_floor) {
        std::cerr << "unidomain: success rate " << report.overall.sr << " is below the floor " << sr_floor << "\n";
        return 1;
    }
    return 0;
}

/// Every setting with a value, as `key=value` lines that read back unchanged.
std::string settings_text(const CLI::App &app) {
    std::istringstream in(app.config_to_str(true, true));
    std::string out, block, line;
    while (std::getline(in, line)) {
        block += line + "\n";
        if (line.empty() || line.front() == '#')
            continue;
        if (line.size() < 3 || line.compare(line.size() - 3, 3, "=\"\"") != 0)
            out += block; // unset options have no value to write back
        block.clear();
    }
    return out;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Learn, fuse and plan with PDDL domains built from demonstrations."};
    app.require_subcommand(1);
    app.fallthrough();
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.set_config("--config", "", "Settings file; every key is a long flag name, e.g. theta = 0.6")
        ->configurable(false);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    Settings s;
    app.add_option("--out", s.out, "Directory for artifacts")->capture_default_str();
    app.add_flag("-v,--verbose", s.verbose, "Progress messages on stderr");

    app.add_option("--oracle-mode", s.oracle_mode, "live, record or replay")
        ->check(CLI::IsMember({"live", "record", "replay"}))
        ->capture_default_str();
    app.add_option("--base-url", s.base_url, "Chat completions endpoint (API key from ORACLE_API_KEY)")
        ->capture_default_str();
    app.add_option("--model", s.model, "Chat model")->capture_default_str();
    app.add_option("--embed-model", s.embed_model, "Embedding model; stub embeds locally")->capture_default_str();
    app.add_option("--transcript", s.transcript, "Record/replay transcript (JSONL)");
    app.add_option("--parallelism", s.parallelism, "Concurrent oracle calls and suite tasks")
        ->check(CLI::Range(1, 256))
        ->capture_default_str();
    app.add_option("--http-timeout", s.http_timeout, "Seconds per HTTP attempt")->capture_default_str();
    app.add_option("--http-attempts", s.http_attempts, "HTTP attempts before giving up")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    app.add_option("--k-test", s.k_test, "Test problems per solvability check")->capture_default_str();
    app.add_option("--theta", s.theta, "Solvability threshold")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    app.add_option("--l-max", s.l_max, "Refinements per pass")->capture_default_str();
    app.add_option("--r-parse", s.r_parse, "Re-prompts after an unparseable reply")->capture_default_str();

    app.add_option("--tau-p", s.tau_p, "Predicate similarity threshold")->capture_default_str();
    app.add_option("--tau-o", s.tau_o, "Operator similarity threshold")->capture_default_str();
    app.add_option("--equivalence", s.equivalence, "llm or exact_name")
        ->check(CLI::IsMember({"llm", "exact_name"}))
        ->capture_default_str();

    app.add_option("--max-expansions", s.max_expansions, "Search node limit");
    app.add_option("--max-seconds", s.max_seconds, "Search time limit");
    app.add_option("--heuristic", s.heuristic, "Optimal-search heuristic: hmax or blind")
        ->check(CLI::IsMember({"hmax", "blind"}));
    app.add_option("--max-ground-actions", s.max_ground_actions, "Grounding limit");

    auto *validate = app.add_subcommand("validate", "Check PDDL files; exit 0 iff clean");
    std::vector<fs::path> validate_files, validate_domains;
    validate->add_option("files", validate_files, "Domain and problem files")
        ->required()
        ->check(CLI::ExistingFile)
        ->configurable(false);
    validate->add_option("--domain", validate_domains, "Domain used for problems whose domain is not listed")
        ->check(CLI::ExistingFile);

    auto *kf = app.add_subcommand("keyframes", "Select keyframes from a frame directory or energy CSV");
    fs::path kf_input;
    std::size_t window = keyframes::kDefaultWindow;
    kf->add_option("input", kf_input, "Directory of PGM/PPM frames, or index,energy CSV")
        ->required()
        ->check(CLI::ExistingPath)
        ->configurable(false);
    kf->add_option("--window", window, "Half-width K of the extremum window")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    auto *learn_cmd = app.add_subcommand("learn", "Learn an atomic domain from a demonstration manifest");
    fs::path manifest;
    learn_cmd->add_option("manifest", manifest, "manifest.json")->required()->check(CLI::ExistingFile)->configurable(false);

    auto *fuse = app.add_subcommand("fuse", "Fuse the domains listed in a file into one");
    fs::path list;
    std::string fused_name;
    bool intermediates = false;
    fuse->add_option("list", list, "One domain path per line")->required()->check(CLI::ExistingFile)->configurable(false);
    fuse->add_option("--name", fused_name, "Name of the fused domain (default: first leaf's)");
    fuse->add_flag("--intermediates", intermediates, "Also write every level under levels/");

    auto *graph_cmd = app.add_subcommand("graph", "Domain graph statistics or DOT export");
    std::string graph_action;
    fs::path graph_input;
    graph_cmd->add_option("action", graph_action, "stats, dot or json")
        ->required()
        ->check(CLI::IsMember({"stats", "dot", "json"}))
        ->configurable(false);
    graph_cmd->add_option("input", graph_input, "domain.pddl or graph.json")
        ->required()
        ->check(CLI::ExistingFile)
        ->configurable(false);

    bool no_grouping = false, no_filtering = false;
    auto ablations = [&](CLI::App *sub) {
        sub->add_flag("--no-grouping", no_grouping, "List predicates without semantic groups");
        sub->add_flag("--no-filtering", no_filtering, "Use the initial problem without domain filtering");
    };

    auto *plan_cmd = app.add_subcommand("plan", "Plan one task against a fused domain");
    fs::path plan_domain, task_file;
    plan_cmd->add_option("domain", plan_domain, "Fused domain")->required()->check(CLI::ExistingFile)->configurable(false);
    plan_cmd->add_option("task", task_file, "Task JSON")->required()->check(CLI::ExistingFile)->configurable(false);
    ablations(plan_cmd);

    auto *eval_cmd = app.add_subcommand("eval", "Run a task suite and report SR, SPL and OR(K)");
    fs::path eval_domain, suite;
    std::string format = "markdown";
    double sr_floor = 0.0;
    eval_cmd->add_option("domain", eval_domain, "Fused domain")->required()->check(CLI::ExistingFile)->configurable(false);
    eval_cmd->add_option("suite", suite, "Suite JSON")->required()->check(CLI::ExistingFile)->configurable(false);
    ablations(eval_cmd);
    eval_cmd->add_option("--format", format, "Report on stdout: json, csv or markdown")
        ->check(CLI::IsMember({"json", "csv", "markdown", "md"}))
        ->capture_default_str();
    eval_cmd->add_option("--sr-floor", sr_floor, "Exit 1 when the success rate is below this")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();

    auto *config_cmd = app.add_subcommand("config", "Print the effective settings in settings-file form");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*config_cmd) {
            std::cout << settings_text(app);
            return 0;
        }
        if (*validate)
            return cmd_validate(validate_files, validate_domains);
        if (*kf)
            return cmd_keyframes(s, kf_input, window);
        if (*learn_cmd)
            return cmd_learn(s, manifest);
        if (*fuse)
            return cmd_fuse(s, list, fused_name, intermediates);
        if (*graph_cmd)
            return cmd_graph(graph_action, graph_input);
        if (*plan_cmd)
            return cmd_plan(s, plan_domain, task_file, no_grouping, no_filtering);
        if (*eval_cmd)
            return cmd_eval(s, eval_domain, suite, no_grouping, no_filtering, eval::parse_report_format(format), sr_floor);
    } catch (const UsageError &e) {
        std::cerr << "unidomain: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "unidomain: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
