#include "unidomain/domain_learn.hpp"

#include "llm_common.hpp"

#include "unidomain/keyframes.hpp"
#include "unidomain/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>

namespace unidomain::learn {

using namespace detail;

namespace {

/// Merges one proposed fragment into the accumulated domain; returns a
/// diagnostic instead of merging when the fragment conflicts.
std::string merge_fragment(pddl::Domain &acc, const pddl::Domain &fragment) {
    for (const auto &t : fragment.types) {
        auto it = std::find_if(acc.types.begin(), acc.types.end(), [&](const auto &d) { return d.name == t.name; });
        if (it != acc.types.end() && it->parent != t.parent)
            return "type `" + t.name + "` was declared with parent `" + it->parent + "` before, now `" + t.parent + "`";
    }
    for (const auto &p : fragment.predicates) {
        const auto *prev = acc.find_predicate(p.name);
        if (prev && prev->arity() != p.arity())
            return "predicate `" + p.name + "` was declared with " + std::to_string(prev->arity()) +
                   " parameters before, now with " + std::to_string(p.arity()) + "; reuse it or choose a new name";
    }
    if (fragment.operators.empty())
        return "the domain must contain one :action";

    for (const auto &t : fragment.types)
        if (std::none_of(acc.types.begin(), acc.types.end(), [&](const auto &d) { return d.name == t.name; }))
            acc.types.push_back(t);
    for (const auto &p : fragment.predicates)
        if (!acc.find_predicate(p.name))
            acc.predicates.push_back(p);
    for (auto op : fragment.operators) {
        const auto *prev = acc.find_operator(op.name);
        if (prev && prev->params == op.params && prev->preconditions == op.preconditions && prev->effects == op.effects)
            continue;
        if (prev) {
            std::string base = op.name;
            for (int k = 2; acc.find_operator(op.name); ++k)
                op.name = base + "_" + std::to_string(k);
        }
        acc.operators.push_back(std::move(op));
    }
    acc.canonicalize();
    return {};
}

} // namespace

// Errors ----------------------------------------------------------------------

UnparseableAfterRetries::UnparseableAfterRetries(const std::string &stage, std::vector<std::string> diagnostics)
    : StageError(stage, "reply still unusable after repair prompts: " +
                            (diagnostics.empty() ? std::string("(no diagnostics)") : diagnostics.back())),
      diagnostics_(std::move(diagnostics)) {}

UnparseableVerdict::UnparseableVerdict(const std::string &reply)
    : StageError("learn.verify", "no PASS/FAIL verdict in reply: " + reply.substr(0, 200)) {}

LearnFailed::LearnFailed(AtomicDomainRecord last)
    : StageError("learn", "domain for `" + last.demo_id + "` not verified after the loop and one restart"),
      record_(std::move(last)) {}

// Manifest and config ---------------------------------------------------------

DemoManifest DemoManifest::load(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open manifest " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw Error(path.string() + ": " + e.what());
    }
    DemoManifest m;
    try {
        m.demo_id = doc.at("demo_id").get<std::string>();
        m.instruction = doc.at("instruction").get<std::string>();
        for (const auto &k : doc.at("keyframes")) {
            std::filesystem::path p = k.get<std::string>();
            m.keyframes.push_back(p.is_absolute() ? p : path.parent_path() / p);
        }
    } catch (const nlohmann::json::exception &e) {
        throw Error(path.string() + ": " + e.what());
    }
    m.validate();
    return m;
}

void DemoManifest::validate() const {
    if (demo_id.empty())
        throw Error("manifest has an empty demo_id");
    if (keyframes.size() < 2)
        throw Error("manifest `" + demo_id + "` needs at least two keyframes");
}

void LearnConfig::validate() const {
    if (!(theta > 0.0 && theta <= 1.0))
        throw Error("theta must lie in (0, 1]");
    if (K_test < 1)
        throw Error("K_test must be at least 1");
    if (L_max < 1)
        throw Error("L_max must be at least 1");
}

// Oracle exchange with repair -------------------------------------------------

std::string ask_with_repair(oracle::OracleSession &session, oracle::ChatRequest request, std::size_t retries,
                            const std::string &artifact, const std::function<std::string(const std::string &)> &accept) {
    std::vector<std::string> diags;
    std::string reply = session.chat(request);
    for (std::size_t attempt = 0;; ++attempt) {
        std::string diag = accept(reply);
        if (diag.empty())
            return reply;
        diags.push_back(diag);
        if (attempt == retries)
            throw UnparseableAfterRetries(session.stage(), diags);
        request.messages.push_back(oracle::Message::text("assistant", reply));
        request.messages.push_back(
            oracle::Message::text("user", prompts::render("repair", {{"diagnostics", diag}, {"artifact", artifact}})));
        reply = session.chat(request);
    }
}

pddl::Domain parse_domain_reply(const std::string &reply) {
    pddl::Domain d = pddl::parse_domain(require_block(reply));
    std::string diags = diagnostics_text(pddl::validate_domain(d));
    if (!diags.empty())
        throw Error(diags);
    return d;
}

namespace {

/// Accepts a full-domain reply; stores the parsed domain in `out`.
std::function<std::string(const std::string &)> domain_acceptor(pddl::Domain &out) {
    return [&out](const std::string &reply) -> std::string {
        try {
            out = parse_domain_reply(reply);
            return {};
        } catch (const std::exception &e) {
            return error_text(e);
        }
    };
}

} // namespace

// Proposal, revision, refinement ----------------------------------------------

pddl::Domain propose_domain(oracle::OracleSession &session, const DemoManifest &manifest, const LearnConfig &cfg) {
    manifest.validate();
    session.set_stage("learn.propose");
    const std::string name = sanitize(manifest.demo_id);
    pddl::Domain acc;
    acc.name = name;

    std::vector<std::string> images;
    for (const auto &k : manifest.keyframes)
        images.push_back(keyframes::load_as_png(k));

    for (std::size_t i = 0; i + 1 < manifest.keyframes.size(); ++i) {
        oracle::ChatRequest req = base_request(session);
        oracle::Message user = oracle::Message::text(
            "user", prompts::render("propose_transition", {{"instruction", manifest.instruction},
                                                           {"from", std::to_string(i + 1)},
                                                           {"to", std::to_string(i + 2)},
                                                           {"count", std::to_string(manifest.keyframes.size())},
                                                           {"predicates", predicate_listing(acc)},
                                                           {"domain", name}}));
        user.parts.push_back(oracle::Part::of_image({"image/png", images[i]}));
        user.parts.push_back(oracle::Part::of_image({"image/png", images[i + 1]}));
        req.messages.push_back(std::move(user));

        pddl::Domain merged;
        ask_with_repair(session, req, cfg.R_parse, "PDDL domain", [&](const std::string &reply) -> std::string {
            try {
                pddl::Domain fragment = pddl::parse_domain(require_block(reply));
                merged = acc;
                std::string conflict = merge_fragment(merged, fragment);
                if (!conflict.empty())
                    return conflict;
                return diagnostics_text(pddl::validate_domain(merged));
            } catch (const std::exception &e) {
                return error_text(e);
            }
        });
        acc = std::move(merged);
    }
    return acc;
}

pddl::Domain revise_domain(oracle::OracleSession &session, const pddl::Domain &d0, const std::string &instruction,
                           const LearnConfig &cfg) {
    session.set_stage("learn.revise");
    oracle::ChatRequest req = base_request(session);
    req.messages.push_back(oracle::Message::text(
        "user", prompts::render("revise_domain", {{"instruction", instruction}, {"domain", pddl::print_domain(d0)}})));
    pddl::Domain out;
    ask_with_repair(session, req, cfg.R_parse, "PDDL domain", domain_acceptor(out));
    out.name = d0.name;
    return out;
}

pddl::Domain refine_domain(oracle::OracleSession &session, const pddl::Domain &dom, const std::string &instruction,
                           const std::string &feedback, const LearnConfig &cfg) {
    session.set_stage("learn.refine");
    oracle::ChatRequest req = base_request(session);
    req.messages.push_back(oracle::Message::text(
        "user", prompts::render("refine_domain", {{"instruction", instruction},
                                                  {"feedback", feedback},
                                                  {"domain", pddl::print_domain(dom)}})));
    pddl::Domain out;
    ask_with_repair(session, req, cfg.R_parse, "PDDL domain", domain_acceptor(out));
    out.name = dom.name;
    return out;
}

// Test problems -----------------------------------------------------------------

std::string test_problem_prompt(const pddl::Domain &dom, const std::string &instruction, std::size_t index,
                                std::size_t count) {
    return prompts::render("test_problem", {{"instruction", instruction},
                                            {"domain", dom.name},
                                            {"types", type_listing(dom)},
                                            {"predicates", predicate_listing(dom)},
                                            {"index", std::to_string(index)},
                                            {"count", std::to_string(count)},
                                            {"problem", "test_" + std::to_string(index)}});
}

std::vector<pddl::Problem> gen_test_problems(oracle::OracleSession &session, const pddl::Domain &dom,
                                             const std::string &instruction, const LearnConfig &cfg) {
    if (dom.predicates.empty())
        throw StageError("learn.test_problems", "domain has no predicates to build test problems from");
    session.set_stage("learn.test_problems");
    std::vector<pddl::Problem> problems;
    for (std::size_t k = 1; k <= cfg.K_test; ++k) {
        oracle::ChatRequest req = base_request(session);
        req.messages.push_back(oracle::Message::text("user", test_problem_prompt(dom, instruction, k, cfg.K_test)));
        pddl::Problem parsed;
        try {
            ask_with_repair(session, req, cfg.R_parse, "PDDL problem", [&](const std::string &reply) -> std::string {
                try {
                    parsed = pddl::parse_problem(require_block(reply), dom);
                    return diagnostics_text(pddl::validate_problem(parsed, dom));
                } catch (const std::exception &e) {
                    return error_text(e);
                }
            });
        } catch (const UnparseableAfterRetries &e) {
            std::vector<std::string> diags = e.diagnostics();
            diags.push_back("test problem " + std::to_string(k) + " of " + std::to_string(cfg.K_test) +
                            " could not be parsed");
            throw UnparseableAfterRetries("learn.test_problems[" + std::to_string(k) + "]", diags);
        }
        problems.push_back(std::move(parsed));
    }

    // Order by optimal cost where it is computable; others keep their place after those.
    std::vector<std::pair<std::size_t, std::size_t>> keys; // (cost or max, original index)
    for (std::size_t i = 0; i < problems.size(); ++i) {
        std::size_t key = std::numeric_limits<std::size_t>::max();
        try {
            auto c = planner::optimal_cost(dom, problems[i], cfg.limits, cfg.ground_limit);
            if (c.known())
                key = c.cost;
        } catch (const Error &) {
        }
        keys.push_back({key, i});
    }
    std::stable_sort(keys.begin(), keys.end(), [](const auto &a, const auto &b) { return a.first < b.first; });
    std::vector<pddl::Problem> ordered;
    for (const auto &[key, i] : keys)
        ordered.push_back(problems[i]);
    return ordered;
}

// Solvability -------------------------------------------------------------------

SolvabilityReport solvability(const pddl::Domain &dom, const std::vector<pddl::Problem> &problems,
                              const LearnConfig &cfg) {
    SolvabilityReport rep;
    if (problems.empty())
        return rep;
    std::size_t solved = 0;
    std::vector<std::string> notes;
    for (std::size_t i = 0; i < problems.size(); ++i) {
        std::string label = "test problem " + std::to_string(i + 1);
        rep.plans.emplace_back();
        pddl::Problem p;
        try {
            // The domain may have changed since the problem was written.
            p = pddl::parse_problem(pddl::print_problem(problems[i]), dom);
            std::string diags = diagnostics_text(pddl::validate_problem(p, dom));
            if (!diags.empty())
                throw Error(diags);
        } catch (const std::exception &e) {
            notes.push_back(label + ": does not fit the domain (" + error_text(e) + ")");
            continue;
        }
        try {
            auto res = planner::plan(dom, p, planner::SearchMode::satisficing, cfg.limits, cfg.ground_limit);
            if (res.solved()) {
                ++solved;
                rep.plans.back() = res.plan;
            } else {
                notes.push_back(label + ": " + planner::to_string(res.outcome));
            }
        } catch (const Error &e) {
            notes.push_back(label + ": " + e.what());
        }
    }
    rep.score = static_cast<double>(solved) / static_cast<double>(problems.size());
    std::ostringstream fb;
    fb << "Solvability check: a planner solved " << solved << " of " << problems.size()
       << " test problems written from the domain's predicates.";
    for (const auto &n : notes)
        fb << "\n- " << n;
    for (std::size_t i = 0; i < problems.size(); ++i)
        if (!rep.plans[i])
            fb << "\n\n" << pddl::print_problem(problems[i]);
    rep.feedback = fb.str();
    return rep;
}

double solvability_score(const pddl::Domain &dom, const std::vector<pddl::Problem> &problems, const LearnConfig &cfg) {
    return solvability(dom, problems, cfg).score;
}

// Verification ------------------------------------------------------------------

Verdict parse_verdict(const std::string &reply) {
    std::istringstream in(reply);
    for (std::string line; std::getline(in, line);) {
        std::size_t b = line.find_first_not_of(" \t*#`>_");
        if (b == std::string::npos)
            continue;
        std::string rest = line.substr(b);
        std::string head = pddl::to_lower(rest.substr(0, 4));
        if (head != "pass" && head != "fail")
            continue;
        std::string tail = rest.substr(4);
        std::size_t t = tail.find_first_not_of(" \t*:-");
        tail = t == std::string::npos ? "" : tail.substr(t);
        while (!tail.empty() && std::isspace(static_cast<unsigned char>(tail.back())))
            tail.pop_back();
        // Later lines belong to the explanation.
        std::string more;
        for (std::string l; std::getline(in, l);)
            more += "\n" + l;
        while (!more.empty() && std::isspace(static_cast<unsigned char>(more.back())))
            more.pop_back();
        if (!more.empty() && more.find_first_not_of(" \t\n") != std::string::npos)
            tail += more;
        return {head == "pass", tail};
    }
    throw UnparseableVerdict(reply);
}

Verdict verify_solution(oracle::OracleSession &session, const pddl::Domain &dom, const pddl::Problem &hardest,
                        const pddl::Plan &plan, const std::string &instruction, const LearnConfig &cfg) {
    session.set_stage("learn.verify");
    oracle::ChatRequest req = base_request(session);
    req.messages.push_back(oracle::Message::text(
        "user", prompts::render("verify_solution", {{"instruction", instruction},
                                                    {"domain", pddl::print_domain(dom)},
                                                    {"problem", pddl::print_problem(hardest)},
                                                    {"plan", pddl::print_plan(plan)}})));
    Verdict verdict;
    try {
        ask_with_repair(session, req, cfg.R_parse, "verdict (PASS, or FAIL: reason)",
                        [&](const std::string &reply) -> std::string {
                            try {
                                verdict = parse_verdict(reply);
                                return {};
                            } catch (const UnparseableVerdict &e) {
                                return "the first line must start with PASS or FAIL";
                            }
                        });
    } catch (const UnparseableAfterRetries &) {
        throw UnparseableVerdict("no verdict after " + std::to_string(cfg.R_parse) + " repair prompts");
    }
    return verdict;
}

// Loop ----------------------------------------------------------------------------

nlohmann::json AtomicDomainRecord::meta() const {
    nlohmann::json checks_json = nlohmann::json::array();
    for (const auto &c : checks) {
        nlohmann::json j{{"pass", c.pass_index}, {"iteration", c.iteration}};
        j["solvability"] = c.solvability ? nlohmann::json(*c.solvability) : nlohmann::json(nullptr);
        if (c.verdict)
            j["verdict"] = {{"pass", c.verdict->pass}, {"feedback", c.verdict->feedback}};
        else
            j["verdict"] = nullptr;
        checks_json.push_back(j);
    }
    return {{"demo_id", demo_id},
            {"domain", domain.name},
            {"verified", verified},
            {"restarted", restarted},
            {"iterations_used", iterations_used},
            {"solvability_score", solvability_score},
            {"n_test_problems", test_problems.size()},
            {"n_operators", domain.operators.size()},
            {"n_predicates", domain.predicates.size()},
            {"checks", checks_json},
            {"prompt_version", prompts::kVersion}};
}

AtomicDomainRecord learn_atomic_domain(oracle::OracleSession &session, const DemoManifest &manifest,
                                       const LearnConfig &cfg) {
    cfg.validate();
    manifest.validate();
    AtomicDomainRecord record;
    record.demo_id = manifest.demo_id;
    const std::size_t passes = cfg.closed_loop ? 2 : 1;
    const std::size_t checks_per_pass = cfg.closed_loop ? cfg.L_max : 1;
    const bool need_problems = cfg.solvability_check || cfg.verification;

    for (std::size_t pass = 0; pass < passes; ++pass) {
        record.restarted = pass > 0;
        pddl::Domain d = propose_domain(session, manifest, cfg);
        if (cfg.revise)
            d = revise_domain(session, d, manifest.instruction, cfg);
        std::vector<pddl::Problem> problems;
        if (need_problems)
            problems = gen_test_problems(session, d, manifest.instruction, cfg);

        std::size_t refinements = 0;
        for (std::size_t it = 0; it < checks_per_pass; ++it) {
            CheckRecord check{pass, it, std::nullopt, std::nullopt};
            SolvabilityReport rep;
            if (need_problems)
                rep = solvability(d, problems, cfg);
            bool ok = true;
            std::string feedback;
            if (cfg.solvability_check) {
                check.solvability = rep.score;
                if (rep.score < cfg.theta) {
                    ok = false;
                    feedback = rep.feedback;
                }
            }
            if (ok && cfg.verification) {
                std::optional<std::size_t> hardest;
                for (std::size_t i = 0; i < rep.plans.size(); ++i)
                    if (rep.plans[i])
                        hardest = i;
                if (!hardest) {
                    ok = false;
                    feedback = rep.feedback;
                } else {
                    Verdict v = verify_solution(session, d, problems[*hardest], *rep.plans[*hardest],
                                                manifest.instruction, cfg);
                    check.verdict = v;
                    if (!v.pass) {
                        ok = false;
                        feedback = "Solution verification failed for this plan:\n" +
                                   pddl::print_plan(*rep.plans[*hardest]) + "\nReason: " + v.feedback;
                    }
                }
            }
            record.checks.push_back(check);
            record.domain = d;
            record.solvability_score = rep.score;
            record.test_problems = problems;
            record.iterations_used = refinements;
            if (ok) {
                record.verified = true;
                return record;
            }
            if (it + 1 < checks_per_pass) {
                d = refine_domain(session, d, manifest.instruction, feedback, cfg);
                ++refinements;
            }
        }
    }
    if (!cfg.closed_loop)
        return record;
    throw LearnFailed(record);
}

void write_record(const AtomicDomainRecord &record, const std::filesystem::path &dir) {
    std::filesystem::create_directories(dir / "tests");
    std::ofstream(dir / "domain.pddl") << pddl::print_domain(record.domain);
    std::ofstream(dir / "meta.json") << record.meta().dump(2) << "\n";
    for (std::size_t k = 0; k < record.test_problems.size(); ++k)
        std::ofstream(dir / "tests" / ("problem_" + std::to_string(k + 1) + ".pddl"))
            << pddl::print_problem(record.test_problems[k]);
}

} // namespace unidomain::learn
