#pragma once

// Closed-loop learning of one atomic domain from a demonstration: propose an
// operator per keyframe transition, revise the assembled domain, then iterate
// a solvability check on generated test problems and an LLM verification of
// the hardest solvable plan, refining the domain on each failure.

#include "unidomain/oracle.hpp"
#include "unidomain/pddl.hpp"
#include "unidomain/planner.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace unidomain::learn {

/// Raised when an oracle answer still fails to parse after all repair prompts.
class UnparseableAfterRetries : public StageError {
public:
    UnparseableAfterRetries(const std::string &stage, std::vector<std::string> diagnostics);
    const std::vector<std::string> &diagnostics() const { return diagnostics_; }

private:
    std::vector<std::string> diagnostics_;
};

class UnparseableVerdict : public StageError {
public:
    explicit UnparseableVerdict(const std::string &reply);
};

struct DemoManifest {
    std::string demo_id;
    std::string instruction;
    std::vector<std::filesystem::path> keyframes;

    /// Keyframe paths are resolved relative to the manifest's directory.
    static DemoManifest load(const std::filesystem::path &path);
    void validate() const;
};

struct LearnConfig {
    std::size_t K_test = 5;
    double theta = 0.6;
    std::size_t L_max = 5;
    std::size_t R_parse = 3;

    // Ablations: each flag disables one stage of the loop.
    bool revise = true;             // w/o-R
    bool solvability_check = true;  // w/o-SC
    bool verification = true;       // w/o-SV
    bool closed_loop = true;        // w/o-CL: one pass, no refinement, no restart

    planner::SearchLimit limits{100000, 10.0, planner::HeuristicKind::hmax};
    planner::GroundLimit ground_limit;

    void validate() const;
};

struct Verdict {
    bool pass = false;
    std::string feedback;
};

struct CheckRecord {
    std::size_t pass_index = 0; // 0 for the first pass, 1 after the restart
    std::size_t iteration = 0;
    std::optional<double> solvability;
    std::optional<Verdict> verdict;
};

struct AtomicDomainRecord {
    pddl::Domain domain;
    std::string demo_id;
    std::size_t iterations_used = 0; // refinements in the pass that produced `domain`
    double solvability_score = 0.0;
    std::vector<pddl::Problem> test_problems;
    bool verified = false;
    bool restarted = false;
    std::vector<CheckRecord> checks;

    nlohmann::json meta() const;
};

class LearnFailed : public StageError {
public:
    explicit LearnFailed(AtomicDomainRecord last);
    const AtomicDomainRecord &record() const { return record_; }

private:
    AtomicDomainRecord record_;
};

/// Asks `request`, then re-prompts with the parser's diagnostics up to
/// `retries` times. `accept` returns an empty string on success.
std::string ask_with_repair(oracle::OracleSession &session, oracle::ChatRequest request, std::size_t retries,
                            const std::string &artifact, const std::function<std::string(const std::string &)> &accept);

/// Parses the first define block of a reply as a domain and validates it.
pddl::Domain parse_domain_reply(const std::string &reply);

pddl::Domain propose_domain(oracle::OracleSession &session, const DemoManifest &manifest, const LearnConfig &cfg);
pddl::Domain revise_domain(oracle::OracleSession &session, const pddl::Domain &d0, const std::string &instruction,
                           const LearnConfig &cfg);
pddl::Domain refine_domain(oracle::OracleSession &session, const pddl::Domain &dom, const std::string &instruction,
                           const std::string &feedback, const LearnConfig &cfg);

/// The prompt only lists types and predicates; `dom` is used to parse the
/// replies and to order them by optimal cost where it can be computed.
std::vector<pddl::Problem> gen_test_problems(oracle::OracleSession &session, const pddl::Domain &dom,
                                             const std::string &instruction, const LearnConfig &cfg);
/// Test-problem prompt text for problem `index` (1-based); exposed for checks.
std::string test_problem_prompt(const pddl::Domain &dom, const std::string &instruction, std::size_t index,
                                std::size_t count);

struct SolvabilityReport {
    double score = 0.0;
    std::vector<std::optional<pddl::Plan>> plans; // per problem, set when solved
    std::string feedback;                          // planner feedback for unsolved problems
};

SolvabilityReport solvability(const pddl::Domain &dom, const std::vector<pddl::Problem> &problems,
                              const LearnConfig &cfg);
double solvability_score(const pddl::Domain &dom, const std::vector<pddl::Problem> &problems,
                         const LearnConfig &cfg = {});

Verdict parse_verdict(const std::string &reply);
Verdict verify_solution(oracle::OracleSession &session, const pddl::Domain &dom, const pddl::Problem &hardest,
                        const pddl::Plan &plan, const std::string &instruction, const LearnConfig &cfg);

/// Full loop. Throws LearnFailed when the loop and its single restart are exhausted.
AtomicDomainRecord learn_atomic_domain(oracle::OracleSession &session, const DemoManifest &manifest,
                                       const LearnConfig &cfg);

/// Writes domain.pddl, meta.json and tests/problem_k.pddl under `dir`.
void write_record(const AtomicDomainRecord &record, const std::filesystem::path &dir);

} // namespace unidomain::learn
