#include "unidomain/domain_learn.hpp"
#include "unidomain/keyframes.hpp"
#include "unidomain/prompts.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>

using namespace unidomain;
using namespace unidomain::learn;

namespace {

const char *kOpenFragment = R"(```pddl
(define (domain demo)
  (:requirements :strips :typing :negative-preconditions)
  (:types drawer item)
  (:predicates (drawer_open ?d - drawer) (hand_empty))
  (:action open_drawer
    :parameters (?d - drawer)
    :precondition (and (not (drawer_open ?d)) (hand_empty))
    :effect (drawer_open ?d)))
```)";

const char *kTakeFragment = R"((define (domain demo)
  (:requirements :strips :typing)
  (:types drawer item)
  (:predicates (drawer_open ?d - drawer) (in_drawer ?i - item ?d - drawer) (holding ?i - item) (hand_empty))
  (:action take_out
    :parameters (?i - item ?d - drawer)
    :precondition (and (drawer_open ?d) (in_drawer ?i ?d) (hand_empty))
    :effect (and (holding ?i) (not (in_drawer ?i ?d)) (not (hand_empty))))))";

const char *kFullDomain = R"((define (domain demo)
  (:requirements :strips :typing :negative-preconditions)
  (:types drawer item)
  (:predicates (drawer_open ?d - drawer) (in_drawer ?i - item ?d - drawer) (holding ?i - item) (hand_empty))
  (:action open_drawer
    :parameters (?d - drawer)
    :precondition (and (not (drawer_open ?d)) (hand_empty))
    :effect (drawer_open ?d))
  (:action take_out
    :parameters (?i - item ?d - drawer)
    :precondition (and (drawer_open ?d) (in_drawer ?i ?d) (hand_empty))
    :effect (and (holding ?i) (not (in_drawer ?i ?d)) (not (hand_empty))))))";

// Same domain but take_out forgets to require an open drawer and to release
// the hand; the "fixed" variant restores it.
const char *kBrokenDomain = R"((define (domain demo)
  (:requirements :strips :typing :negative-preconditions)
  (:types drawer item)
  (:predicates (drawer_open ?d - drawer) (in_drawer ?i - item ?d - drawer) (holding ?i - item) (hand_empty))
  (:action open_drawer
    :parameters (?d - drawer)
    :precondition (and (not (drawer_open ?d)) (hand_empty) (holding ?d))
    :effect (drawer_open ?d))
  (:action take_out
    :parameters (?i - item ?d - drawer)
    :precondition (and (drawer_open ?d) (in_drawer ?i ?d) (hand_empty))
    :effect (and (holding ?i) (not (in_drawer ?i ?d)) (not (hand_empty))))))";

std::string solvable_problem(int k) {
    // Goal needs the drawer opened then the item taken: 2 steps; k extra items raise difficulty.
    std::string objs = "d1 - drawer towel - item", init = "(hand_empty) (in_drawer towel d1)";
    return "(define (problem test_" + std::to_string(k) + ") (:domain demo) (:objects " + objs + ") (:init " + init +
           ") (:goal (holding towel)))";
}

std::string unsolvable_problem(int k) {
    return "(define (problem test_" + std::to_string(k) +
           ") (:domain demo) (:objects d1 - drawer towel - item) (:init (hand_empty)) (:goal (holding towel)))";
}

// Dispatches on which template produced the last user message.
struct ScriptedLlm {
    std::vector<std::string> domains_for_revise{kFullDomain};
    std::vector<std::string> domains_for_refine{kFullDomain};
    std::function<std::string(int)> problem = [](int k) { return solvable_problem(k); };
    std::vector<std::string> verdicts{"PASS"};
    std::size_t revise_calls = 0, refine_calls = 0, verify_calls = 0, repair_calls = 0, propose_calls = 0;
    std::vector<std::string> test_prompts;
    std::string garbage_for; // template marker that should answer non-PDDL text

    std::string operator()(const oracle::ChatRequest &r) {
        const std::string text = r.messages.back().parts.front().text;
        if (text.find("could not be used") != std::string::npos) {
            ++repair_calls;
            if (!garbage_for.empty())
                return "still not sure";
            // Fall through to the original request two messages back.
            oracle::ChatRequest original = r;
            original.messages.resize(original.messages.size() - 2);
            return (*this)(original);
        }
        if (text.find("Identify the single robot action") != std::string::npos) {
            ++propose_calls;
            if (garbage_for == "propose")
                return "I think the robot opens something.";
            return text.find("keyframes 1 and 2") != std::string::npos ? kOpenFragment : kTakeFragment;
        }
        if (text.find("Revise it as a whole") != std::string::npos)
            return domains_for_revise[std::min(revise_calls++, domains_for_revise.size() - 1)];
        if (text.find("did not pass a check") != std::string::npos)
            return domains_for_refine[std::min(refine_calls++, domains_for_refine.size() - 1)];
        if (text.find("Write test problem") != std::string::npos) {
            test_prompts.push_back(text);
            std::smatch m;
            std::regex re("Write test problem (\\d+) of");
            std::regex_search(text, m, re);
            return problem(std::stoi(m[1]));
        }
        if (text.find("Does this plan satisfy") != std::string::npos)
            return verdicts[std::min(verify_calls++, verdicts.size() - 1)];
        return "unexpected prompt";
    }
};

class LearnTest : public ::testing::Test {
protected:
    std::filesystem::path dir;
    std::shared_ptr<ScriptedLlm> llm = std::make_shared<ScriptedLlm>();
    std::unique_ptr<oracle::OracleClient> client;
    std::unique_ptr<oracle::OracleSession> session;
    LearnConfig cfg;

    void SetUp() override {
        dir = std::filesystem::temp_directory_path() / "unidomain_learn_test";
        std::filesystem::remove_all(dir);
        std::filesystem::create_directories(dir);
        for (int i = 0; i < 3; ++i)
            keyframes::write_pgm(dir / ("k" + std::to_string(i) + ".pgm"),
                                 {4, 3, std::vector<std::uint8_t>(12, static_cast<std::uint8_t>(40 * i))});
        auto backend = std::make_shared<oracle::ScriptedBackend>([llm = llm](const oracle::ChatRequest &r) { return (*llm)(r); });
        client = std::make_unique<oracle::OracleClient>(oracle::OracleConfig{oracle::Mode::live, {}, "m", "stub", {}, 4},
                                                        backend);
        session = std::make_unique<oracle::OracleSession>(*client);
    }

    void TearDown() override { std::filesystem::remove_all(dir); }

    DemoManifest manifest(std::size_t frames = 3) {
        DemoManifest m{"demo", "Take the towel out of the drawer.", {}};
        for (std::size_t i = 0; i < frames; ++i)
            m.keyframes.push_back(dir / ("k" + std::to_string(i) + ".pgm"));
        return m;
    }

    pddl::Domain full() { return pddl::parse_domain(kFullDomain); }
};

} // namespace

TEST_F(LearnTest, ProposeOneOperatorPerTransition) {
    pddl::Domain d = propose_domain(*session, manifest(3), cfg);
    EXPECT_EQ(d.operators.size(), 2u);
    EXPECT_EQ(d.predicates.size(), 4u);
    EXPECT_EQ(session->usage().n_calls, 2u);
    EXPECT_EQ(d, full());
}

TEST_F(LearnTest, ProposeTwoKeyframesIsOneCall) {
    pddl::Domain d = propose_domain(*session, manifest(2), cfg);
    EXPECT_EQ(session->usage().n_calls, 1u);
    EXPECT_EQ(d.operators.size(), 1u);
}

TEST_F(LearnTest, ProposeAttachesBothImages) {
    oracle::ChatRequest seen;
    auto backend = std::make_shared<oracle::ScriptedBackend>([&](const oracle::ChatRequest &r) {
        seen = r;
        return std::string(kOpenFragment);
    });
    oracle::OracleClient c({oracle::Mode::live, {}, "m", "stub", {}, 4}, backend);
    oracle::OracleSession s(c);
    propose_domain(s, manifest(2), cfg);
    ASSERT_EQ(seen.messages.size(), 2u);
    int images = 0;
    for (const auto &p : seen.messages.back().parts)
        images += p.image ? 1 : 0;
    EXPECT_EQ(images, 2);
    EXPECT_EQ(seen.temperature, 0.0);
}

TEST_F(LearnTest, NonPddlRepliesExhaustRepairs) {
    llm->garbage_for = "propose";
    cfg.R_parse = 2;
    EXPECT_THROW(propose_domain(*session, manifest(2), cfg), UnparseableAfterRetries);
    EXPECT_EQ(session->usage().n_calls, 3u);
}

TEST_F(LearnTest, ReviseMergesDuplicatePredicates) {
    pddl::Domain d0 = pddl::parse_domain(R"((define (domain demo) (:predicates (holding ?o) (grasped ?o) (on_table ?o))
        (:action pick :parameters (?o) :precondition (on_table ?o) :effect (and (holding ?o) (not (on_table ?o))))
        (:action place :parameters (?o) :precondition (grasped ?o) :effect (and (on_table ?o) (not (grasped ?o))))))");
    llm->domains_for_revise = {R"((define (domain demo) (:predicates (holding ?o) (on_table ?o))
        (:action pick :parameters (?o) :precondition (on_table ?o) :effect (and (holding ?o) (not (on_table ?o))))
        (:action place :parameters (?o) :precondition (holding ?o) :effect (and (on_table ?o) (not (holding ?o))))))"};
    pddl::Domain d1 = revise_domain(*session, d0, "tidy up", cfg);
    EXPECT_NE(d1.find_predicate("holding"), nullptr);
    EXPECT_EQ(d1.find_predicate("grasped"), nullptr);
    EXPECT_EQ(d1.predicates.size(), 2u);
}

TEST_F(LearnTest, ReviseIdentity) {
    pddl::Domain d = revise_domain(*session, full(), "x", cfg);
    EXPECT_EQ(d, full());
}

TEST_F(LearnTest, ReviseDroppingReferencedPredicateTriggersRepair) {
    llm->domains_for_revise = {R"((define (domain demo) (:types drawer item) (:predicates (hand_empty))
        (:action open_drawer :parameters (?d - drawer) :precondition (hand_empty) :effect (drawer_open ?d))))",
                               kFullDomain};
    pddl::Domain d = revise_domain(*session, full(), "x", cfg);
    EXPECT_EQ(llm->repair_calls, 1u);
    EXPECT_EQ(session->usage().n_calls, 2u);
    EXPECT_EQ(d, full());
}

TEST_F(LearnTest, TestProblemsCountAndAntiCompensation) {
    auto problems = gen_test_problems(*session, full(), "Take the towel out.", cfg);
    EXPECT_EQ(problems.size(), 5u);
    ASSERT_EQ(llm->test_prompts.size(), 5u);
    std::regex ident("[a-z0-9_\\-]+");
    for (const auto &prompt : llm->test_prompts) {
        std::string lower = pddl::to_lower(prompt);
        for (auto it = std::sregex_iterator(lower.begin(), lower.end(), ident); it != std::sregex_iterator(); ++it)
            for (const auto &op : full().operators)
                EXPECT_NE(it->str(), op.name) << prompt;
        for (const auto &op : full().operators)
            EXPECT_EQ(prompt.find(op.name), std::string::npos);
    }
}

TEST_F(LearnTest, UnparseableTestProblemNamesIndex) {
    llm->problem = [](int k) { return k == 3 ? std::string("(define (problem broken") : solvable_problem(k); };
    try {
        gen_test_problems(*session, full(), "x", cfg);
        FAIL();
    } catch (const UnparseableAfterRetries &e) {
        EXPECT_EQ(e.stage(), "learn.test_problems[3]");
        EXPECT_NE(e.diagnostics().back().find("test problem 3"), std::string::npos);
    }
}

TEST_F(LearnTest, SolvabilityScores) {
    pddl::Domain d = full();
    auto make = [&](int solved) {
        std::vector<pddl::Problem> ps;
        for (int k = 1; k <= 5; ++k)
            ps.push_back(pddl::parse_problem(k <= solved ? solvable_problem(k) : unsolvable_problem(k), d));
        return ps;
    };
    for (int solved = 0; solved <= 5; ++solved)
        EXPECT_EQ(solvability_score(d, make(solved)), solved / 5.0);
    EXPECT_EQ(solvability_score(d, make(3)), 0.6);
    EXPECT_GE(solvability_score(d, make(3)), LearnConfig{}.theta);
    EXPECT_LT(solvability_score(d, make(2)), LearnConfig{}.theta);

    // A problem that no longer fits the domain counts as unsolved.
    pddl::Domain renamed = pddl::parse_domain(std::regex_replace(std::string(kFullDomain), std::regex("hand_empty"), "free"));
    EXPECT_EQ(solvability_score(renamed, make(5)), 0.0);
}

TEST(Verdict, Parsing) {
    EXPECT_TRUE(parse_verdict("PASS").pass);
    Verdict f = parse_verdict("FAIL: pours before removing lid");
    EXPECT_FALSE(f.pass);
    EXPECT_EQ(f.feedback, "pours before removing lid");
    EXPECT_TRUE(parse_verdict("\n**PASS** looks fine").pass);
    EXPECT_THROW(parse_verdict("I am not sure."), UnparseableVerdict);
}

TEST_F(LearnTest, VerifyAsksOnce) {
    pddl::Domain d = full();
    pddl::Problem p = pddl::parse_problem(solvable_problem(1), d);
    pddl::Plan plan = pddl::parse_plan("(open_drawer d1)\n(take_out towel d1)\n");
    llm->verdicts = {"FAIL: pours before removing lid"};
    Verdict v = verify_solution(*session, d, p, plan, "x", cfg);
    EXPECT_FALSE(v.pass);
    EXPECT_EQ(v.feedback, "pours before removing lid");
    EXPECT_EQ(session->usage().n_calls, 1u);
}

TEST_F(LearnTest, LoopPassesFirstTry) {
    AtomicDomainRecord r = learn_atomic_domain(*session, manifest(), cfg);
    EXPECT_TRUE(r.verified);
    EXPECT_EQ(r.iterations_used, 0u);
    EXPECT_EQ(r.solvability_score, 1.0);
    EXPECT_EQ(r.test_problems.size(), 5u);
    // 2 proposals + 1 revision + 5 test problems + 1 verification.
    EXPECT_EQ(session->usage().n_calls, 9u);
}

TEST_F(LearnTest, LoopRefinesAfterFailedSolvability) {
    llm->domains_for_revise = {kBrokenDomain};
    llm->domains_for_refine = {kFullDomain};
    AtomicDomainRecord r = learn_atomic_domain(*session, manifest(), cfg);
    EXPECT_TRUE(r.verified);
    EXPECT_EQ(r.iterations_used, 1u);
    ASSERT_EQ(r.checks.size(), 2u);
    EXPECT_EQ(*r.checks[0].solvability, 0.0);
    EXPECT_EQ(*r.checks[1].solvability, 1.0);
    EXPECT_EQ(llm->refine_calls, 1u);
}

TEST_F(LearnTest, LoopRefinesAfterFailedVerification) {
    llm->verdicts = {"FAIL: takes the towel without looking", "PASS"};
    AtomicDomainRecord r = learn_atomic_domain(*session, manifest(), cfg);
    EXPECT_TRUE(r.verified);
    EXPECT_EQ(r.iterations_used, 1u);
    EXPECT_FALSE(r.checks[0].verdict->pass);
}

TEST_F(LearnTest, LoopGivesUpAfterRestart) {
    llm->domains_for_revise = {kBrokenDomain};
    llm->domains_for_refine = {kBrokenDomain};
    try {
        learn_atomic_domain(*session, manifest(), cfg);
        FAIL();
    } catch (const LearnFailed &e) {
        EXPECT_FALSE(e.record().verified);
        EXPECT_TRUE(e.record().restarted);
        EXPECT_EQ(e.record().checks.size(), 2 * cfg.L_max);
        EXPECT_EQ(e.record().iterations_used, cfg.L_max - 1);
    }
    // Bounded effort per pass: (transitions + 1 + K_test + 2 L_max)(1 + R_parse).
    std::size_t per_pass = (2 + 1 + cfg.K_test + 2 * cfg.L_max) * (1 + cfg.R_parse);
    EXPECT_LE(session->usage().n_calls, 2 * per_pass);
    EXPECT_EQ(session->usage().n_calls, 2 * (2 + 1 + 5 + (cfg.L_max - 1)));
}

TEST_F(LearnTest, AblationsSkipStages) {
    cfg.revise = false;
    cfg.verification = false;
    AtomicDomainRecord r = learn_atomic_domain(*session, manifest(), cfg);
    EXPECT_TRUE(r.verified);
    EXPECT_EQ(llm->revise_calls, 0u);
    EXPECT_EQ(llm->verify_calls, 0u);

    LearnConfig single;
    single.closed_loop = false;
    llm->domains_for_revise = {kBrokenDomain};
    AtomicDomainRecord r2 = learn_atomic_domain(*session, manifest(), single);
    EXPECT_FALSE(r2.verified);
    EXPECT_EQ(r2.checks.size(), 1u);
}

TEST_F(LearnTest, ReplayReproducesRecord) {
    auto transcript = dir / "t.jsonl";
    auto backend = std::make_shared<oracle::ScriptedBackend>([llm = llm](const oracle::ChatRequest &r) { return (*llm)(r); });
    llm->domains_for_revise = {kBrokenDomain};
    AtomicDomainRecord recorded;
    {
        oracle::OracleClient rec({oracle::Mode::record, {}, "m", "stub", transcript, 4}, backend);
        oracle::OracleSession s(rec);
        recorded = learn_atomic_domain(s, manifest(), cfg);
    }
    for (int run = 0; run < 2; ++run) {
        oracle::OracleClient rep({oracle::Mode::replay, {}, "m", "stub", transcript, 4});
        oracle::OracleSession s(rep);
        AtomicDomainRecord r = learn_atomic_domain(s, manifest(), cfg);
        EXPECT_EQ(r.domain, recorded.domain);
        EXPECT_EQ(r.meta(), recorded.meta());
    }
}

TEST_F(LearnTest, WritesOutputDirectory) {
    AtomicDomainRecord r = learn_atomic_domain(*session, manifest(), cfg);
    write_record(r, dir / "out");
    EXPECT_EQ(pddl::parse_domain(std::string(std::istreambuf_iterator<char>(std::ifstream(dir / "out/domain.pddl").rdbuf()), {})),
              r.domain);
    EXPECT_TRUE(std::filesystem::exists(dir / "out/tests/problem_5.pddl"));
    std::ifstream meta(dir / "out/meta.json");
    auto j = nlohmann::json::parse(meta);
    EXPECT_EQ(j["iterations_used"], 0);
    EXPECT_EQ(j["verified"], true);
}

TEST(LearnConfigTest, Validation) {
    LearnConfig c;
    EXPECT_NO_THROW(c.validate());
    c.theta = 0;
    EXPECT_THROW(c.validate(), Error);
    c = {};
    c.K_test = 0;
    EXPECT_THROW(c.validate(), Error);
}

TEST(Prompts, RenderChecksSlots) {
    EXPECT_THROW(prompts::render("repair", {{"diagnostics", "x"}}), Error);
    EXPECT_THROW(prompts::render("repair", {{"diagnostics", "x"}, {"artifact", "y"}, {"extra", "z"}}), Error);
    EXPECT_THROW(prompts::render("nope", {}), Error);
    EXPECT_NE(prompts::render("repair", {{"diagnostics", "bad"}, {"artifact", "domain"}}).find("bad"), std::string::npos);
}
