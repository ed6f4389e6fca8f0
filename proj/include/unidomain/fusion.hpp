#pragma once

// Hierarchical fusion of atomic domains. Leaves are paired left to right at
// each level of a binary tree; every merge aligns predicates first (embedding
// similarity, then an equivalence verdict, then union-find with the left side
// canonical), rewrites the right side's operators mechanically, then aligns
// operators the same way and unions the bodies of confirmed pairs.

#include "unidomain/oracle.hpp"
#include "unidomain/pddl.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace unidomain::fusion {

class FusionValidationFailed : public StageError {
public:
    explicit FusionValidationFailed(std::vector<std::string> diagnostics);
    const std::vector<std::string> &diagnostics() const { return diagnostics_; }

private:
    std::vector<std::string> diagnostics_;
};

/// `exact_name` answers YES only for identical names and never calls the LLM.
enum class EquivalenceMode { llm, exact_name };

const char *to_string(EquivalenceMode mode);
EquivalenceMode parse_equivalence_mode(const std::string &text);

struct FusionConfig {
    double tau_p = 0.3;
    double tau_o = 0.3;
    EquivalenceMode mode = EquivalenceMode::llm;
    std::size_t R_parse = 3;
    bool parallel = true; // run independent merges of one level concurrently

    void validate() const;
};

struct MergeTask {
    std::size_t left = 0;              // index into the previous level's outputs
    std::optional<std::size_t> right;  // empty: `left` is promoted unmerged
};

struct FusionTree {
    std::size_t leaves = 0;
    std::vector<std::vector<MergeTask>> levels;

    std::size_t merge_count() const;
};

FusionTree build_fusion_tree(std::size_t leaves);

struct PairMerge {
    std::string kept;
    std::string absorbed;
    double similarity = 0.0;
};

struct MergeRecord {
    std::size_t level = 0;
    std::string left;
    std::string right;
    std::vector<PairMerge> predicates;
    std::vector<PairMerge> operators;
    std::vector<PairMerge> rejected;                     // confirmed but conflicting operator pairs
    std::map<std::string, std::string> operator_renames; // right-side operator names changed to avoid clashes
};

struct MergeLog {
    /// Old predicate name to its final canonical name, over all leaves.
    std::map<std::string, std::string> predicate_renames;
    /// Same, per input domain; exact even when names are reused across leaves.
    std::vector<std::map<std::string, std::string>> leaf_renames;
    std::vector<std::pair<std::string, std::string>> operator_merges; // (kept, absorbed)
    std::vector<MergeRecord> records;

    bool empty() const;
    nlohmann::json to_json() const;
};

struct PredicateMergeResult {
    std::vector<pddl::PredicateSchema> merged;
    std::map<std::string, std::string> renames; // right-side name to canonical name
    std::vector<PairMerge> merges;
};

struct OperatorMergeResult {
    std::vector<pddl::OperatorSchema> merged;
    std::vector<PairMerge> merges;
    std::vector<PairMerge> rejected;
    std::map<std::string, std::string> renames;
};

/// `scope` supplies the type hierarchy used to generalize parameter types of
/// merged predicates; without it differing types generalize to `object`.
PredicateMergeResult merge_predicates(oracle::OracleSession &session, const std::vector<pddl::PredicateSchema> &p1,
                                      const std::vector<pddl::PredicateSchema> &p2, const FusionConfig &cfg,
                                      const pddl::Domain *scope = nullptr);

/// Both sets must already use canonical predicate names.
OperatorMergeResult merge_operators(oracle::OracleSession &session, const std::vector<pddl::OperatorSchema> &o1,
                                    const std::vector<pddl::OperatorSchema> &o2, const FusionConfig &cfg,
                                    const pddl::Domain *scope = nullptr);

/// Operator text shown to the equivalence oracle: signature, preconditions, effects.
std::string describe_operator(const pddl::OperatorSchema &op);

/// Substitutes predicate names in every literal.
pddl::OperatorSchema rename_predicates(pddl::OperatorSchema op, const std::map<std::string, std::string> &renames);

struct FuseResult {
    pddl::Domain domain;
    MergeLog log;
};

FuseResult fuse(oracle::OracleSession &session, const pddl::Domain &d1, const pddl::Domain &d2,
                const FusionConfig &cfg);

struct FuseAllResult {
    pddl::Domain domain;
    MergeLog log;
    std::vector<std::vector<pddl::Domain>> levels; // outputs of every level, leaves excluded
};

/// Runs the whole tree. The root keeps the first leaf's name unless `name` is given.
FuseAllResult fuse_all(oracle::OracleSession &session, const std::vector<pddl::Domain> &domains,
                       const FusionConfig &cfg, const std::string &name = {});

/// One domain path per line, relative to the list file; blank lines and
/// `#` comments are skipped.
std::vector<std::filesystem::path> read_domain_list(const std::filesystem::path &list);
std::vector<pddl::Domain> load_domain_list(const std::filesystem::path &list);

/// Writes fused.pddl and merge_log.json, plus levels/level_<k>_<i>.pddl when asked.
void write_fusion(const FuseAllResult &result, const std::filesystem::path &dir, bool intermediates = false);

} // namespace unidomain::fusion
