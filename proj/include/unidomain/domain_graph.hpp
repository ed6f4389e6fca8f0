#pragma once

// Domains viewed as knowledge graphs: predicate and operator nodes joined by
// precondition edges (predicate -> operator) and effect edges
// (operator -> predicate). Edges keep polarity and argument bindings so that
// each operator's pre/eff sets can be rebuilt exactly.

#include "unidomain/pddl.hpp"

#include <json.hpp>

#include <map>
#include <set>
#include <string>
#include <vector>

namespace unidomain::graph {

struct PredicateKey {
    std::string name;
    std::size_t arity = 0;

    auto operator<=>(const PredicateKey &) const = default;
    std::string str() const { return name + "/" + std::to_string(arity); }
};

struct PredicateNode {
    PredicateKey key;
    std::vector<pddl::TypedParam> params;
    std::set<std::string> provenance;

    bool operator==(const PredicateNode &) const = default;
};

struct OperatorNode {
    std::string name;
    std::vector<pddl::TypedParam> params;
    std::set<std::string> provenance;

    bool operator==(const OperatorNode &) const = default;
};

enum class EdgeKind { pre, eff };

struct Edge {
    EdgeKind kind = EdgeKind::pre;
    PredicateKey predicate;
    std::string op;
    bool positive = true;
    std::vector<std::string> args;

    auto operator<=>(const Edge &) const = default;
};

struct DomainGraph {
    std::string name;
    std::vector<pddl::TypeDecl> types;
    std::map<PredicateKey, PredicateNode> predicates;
    std::map<std::string, OperatorNode> operators;
    std::set<Edge> edges;

    bool operator==(const DomainGraph &) const = default;

    std::size_t pre_edge_count() const;
    std::size_t eff_edge_count() const;
};

struct GraphStats {
    std::size_t n_operators = 0;
    std::size_t n_predicates = 0;
    std::size_t n_edges = 0;
    std::size_t n_categories = 0;

    bool operator==(const GraphStats &) const = default;
};

DomainGraph to_graph(const pddl::Domain &domain, const std::string &source_id);

/// Rebuilds a Domain from the graph. Exact inverse of to_graph for valid domains.
pddl::Domain to_domain(const DomainGraph &graph);

/// Merges nodes with identical keys. Operators sharing a name but differing
/// in parameters or edges are kept side by side as `name#2`, `name#3`, ...
DomainGraph union_graphs(const std::vector<DomainGraph> &graphs);

GraphStats stats(const DomainGraph &graph);

/// Lexical operator category: lowercase, `#k` suffix and trailing digits removed.
std::string operator_category(const std::string &name);

std::string export_dot(const DomainGraph &graph);

nlohmann::json to_json(const DomainGraph &graph);
DomainGraph graph_from_json(const nlohmann::json &doc);

} // namespace unidomain::graph
