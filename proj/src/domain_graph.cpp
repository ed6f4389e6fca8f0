#include "unidomain/domain_graph.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace unidomain::graph {

std::size_t DomainGraph::pre_edge_count() const {
    return static_cast<std::size_t>(
        std::count_if(edges.begin(), edges.end(), [](const Edge &e) { return e.kind == EdgeKind::pre; }));
}

std::size_t DomainGraph::eff_edge_count() const { return edges.size() - pre_edge_count(); }

DomainGraph to_graph(const pddl::Domain &domain, const std::string &source_id) {
    DomainGraph g;
    g.name = domain.name;
    g.types = domain.types;
    for (const auto &p : domain.predicates) {
        PredicateKey key{p.name, p.arity()};
        auto &node = g.predicates[key];
        node.key = key;
        node.params = p.params;
        node.provenance.insert(source_id);
    }
    for (const auto &op : domain.operators) {
        auto &node = g.operators[op.name];
        node.name = op.name;
        node.params = op.params;
        node.provenance.insert(source_id);
        for (const auto &l : op.preconditions)
            g.edges.insert({EdgeKind::pre, {l.predicate, l.args.size()}, op.name, l.positive, l.args});
        for (const auto &l : op.effects)
            g.edges.insert({EdgeKind::eff, {l.predicate, l.args.size()}, op.name, l.positive, l.args});
    }
    return g;
}

pddl::Domain to_domain(const DomainGraph &graph) {
    pddl::Domain d;
    d.name = graph.name;
    d.types = graph.types;
    for (const auto &[key, node] : graph.predicates)
        d.predicates.push_back({key.name, node.params});
    std::map<std::string, pddl::OperatorSchema> ops;
    for (const auto &[name, node] : graph.operators)
        ops[name] = {name, node.params, {}, {}};
    for (const auto &e : graph.edges) {
        pddl::Literal l{e.predicate.name, e.args, e.positive};
        auto &op = ops.at(e.op);
        (e.kind == EdgeKind::pre ? op.preconditions : op.effects).insert(l);
    }
    for (auto &[name, op] : ops)
        d.operators.push_back(std::move(op));
    d.canonicalize();
    return d;
}

namespace {

struct OperatorBody {
    std::vector<pddl::TypedParam> params;
    std::set<std::tuple<EdgeKind, PredicateKey, bool, std::vector<std::string>>> edges;

    bool operator==(const OperatorBody &) const = default;
};

OperatorBody body_of(const DomainGraph &g, const std::string &op) {
    OperatorBody body;
    body.params = g.operators.at(op).params;
    for (const auto &e : g.edges)
        if (e.op == op)
            body.edges.insert({e.kind, e.predicate, e.positive, e.args});
    return body;
}

std::string base_name(const std::string &name) {
    auto hash = name.find('#');
    return hash == std::string::npos ? name : name.substr(0, hash);
}

} // namespace

DomainGraph union_graphs(const std::vector<DomainGraph> &graphs) {
    DomainGraph out;
    if (graphs.empty())
        return out;
    out.name = graphs.front().name;
    std::map<std::string, std::vector<std::string>> variants; // base name -> names in use
    std::map<std::string, OperatorBody> bodies;

    for (const auto &g : graphs) {
        for (const auto &t : g.types)
            if (std::none_of(out.types.begin(), out.types.end(), [&](const pddl::TypeDecl &d) { return d.name == t.name; }))
                out.types.push_back(t);
        for (const auto &[key, node] : g.predicates) {
            auto [it, inserted] = out.predicates.emplace(key, node);
            if (!inserted)
                it->second.provenance.insert(node.provenance.begin(), node.provenance.end());
        }
        for (const auto &[name, node] : g.operators) {
            OperatorBody body = body_of(g, name);
            std::string base = base_name(name);
            std::string target;
            for (const auto &candidate : variants[base]) {
                if (bodies.at(candidate) == body) {
                    target = candidate;
                    break;
                }
            }
            if (target.empty()) {
                auto &used = variants[base];
                target = used.empty() ? base : base + "#" + std::to_string(used.size() + 1);
                used.push_back(target);
                bodies.emplace(target, body);
                OperatorNode fresh = node;
                fresh.name = target;
                out.operators.emplace(target, fresh);
                for (const auto &[kind, pred, positive, args] : body.edges)
                    out.edges.insert({kind, pred, target, positive, args});
            } else {
                out.operators.at(target).provenance.insert(node.provenance.begin(), node.provenance.end());
            }
        }
    }
    std::sort(out.types.begin(), out.types.end(), [](const auto &a, const auto &b) { return a.name < b.name; });
    return out;
}

std::string operator_category(const std::string &name) {
    std::string s = pddl::to_lower(base_name(name));
    while (!s.empty() && std::isdigit(static_cast<unsigned char>(s.back())))
        s.pop_back();
    while (!s.empty() && (s.back() == '_' || s.back() == '-'))
        s.pop_back();
    return s;
}

GraphStats stats(const DomainGraph &graph) {
    GraphStats s;
    s.n_operators = graph.operators.size();
    s.n_predicates = graph.predicates.size();
    s.n_edges = graph.pre_edge_count() + graph.eff_edge_count();
    std::set<std::string> categories;
    for (const auto &[name, node] : graph.operators)
        categories.insert(operator_category(name));
    s.n_categories = categories.size();
    return s;
}

namespace {

std::string dot_id(const std::string &prefix, const std::string &name) {
    std::string out = "\"" + prefix + ":";
    for (char c : name) {
        if (c == '"' || c == '\\')
            out += '\\';
        out += c;
    }
    return out + "\"";
}

} // namespace

std::string export_dot(const DomainGraph &graph) {
    std::ostringstream out;
    out << "digraph domain {\n";
    for (const auto &[key, node] : graph.predicates)
        out << "  " << dot_id("p", key.str()) << " [shape=ellipse, label=\"" << key.name << "\"];\n";
    for (const auto &[name, node] : graph.operators)
        out << "  " << dot_id("o", name) << " [shape=box, label=\"" << name << "\"];\n";
    for (const auto &e : graph.edges) {
        std::string label = e.positive ? "" : "not ";
        label += e.kind == EdgeKind::pre ? "pre" : "eff";
        if (e.kind == EdgeKind::pre)
            out << "  " << dot_id("p", e.predicate.str()) << " -> " << dot_id("o", e.op);
        else
            out << "  " << dot_id("o", e.op) << " -> " << dot_id("p", e.predicate.str());
        out << " [label=\"" << label << "\"";
        if (!e.positive)
            out << ", style=dashed";
        out << "];\n";
    }
    out << "}";
    return out.str();
}

// ---------------------------------------------------------------------------
// JSON persistence

namespace {

nlohmann::json params_json(const std::vector<pddl::TypedParam> &params) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto &p : params)
        arr.push_back({{"name", p.name}, {"type", p.type}});
    return arr;
}

std::vector<pddl::TypedParam> params_from(const nlohmann::json &arr) {
    std::vector<pddl::TypedParam> out;
    for (const auto &p : arr)
        out.push_back({p.at("name").get<std::string>(), p.at("type").get<std::string>()});
    return out;
}

} // namespace

nlohmann::json to_json(const DomainGraph &graph) {
    nlohmann::json doc;
    doc["name"] = graph.name;
    doc["types"] = nlohmann::json::array();
    for (const auto &t : graph.types)
        doc["types"].push_back({{"name", t.name}, {"parent", t.parent}});
    doc["predicates"] = nlohmann::json::array();
    for (const auto &[key, node] : graph.predicates)
        doc["predicates"].push_back({{"name", key.name},
                                     {"arity", key.arity},
                                     {"params", params_json(node.params)},
                                     {"provenance", node.provenance}});
    doc["operators"] = nlohmann::json::array();
    for (const auto &[name, node] : graph.operators)
        doc["operators"].push_back({{"name", name}, {"params", params_json(node.params)}, {"provenance", node.provenance}});
    doc["edges"] = nlohmann::json::array();
    for (const auto &e : graph.edges)
        doc["edges"].push_back({{"kind", e.kind == EdgeKind::pre ? "pre" : "eff"},
                                {"predicate", e.predicate.name},
                                {"arity", e.predicate.arity},
                                {"operator", e.op},
                                {"positive", e.positive},
                                {"args", e.args}});
    return doc;
}

DomainGraph graph_from_json(const nlohmann::json &doc) {
    DomainGraph g;
    g.name = doc.value("name", "");
    for (const auto &t : doc.value("types", nlohmann::json::array()))
        g.types.push_back({t.at("name").get<std::string>(), t.at("parent").get<std::string>()});
    for (const auto &p : doc.at("predicates")) {
        PredicateKey key{p.at("name").get<std::string>(), p.at("arity").get<std::size_t>()};
        g.predicates[key] = {key, params_from(p.at("params")), p.value("provenance", std::set<std::string>{})};
    }
    for (const auto &o : doc.at("operators")) {
        std::string name = o.at("name").get<std::string>();
        g.operators[name] = {name, params_from(o.at("params")), o.value("provenance", std::set<std::string>{})};
    }
    for (const auto &e : doc.at("edges")) {
        Edge edge;
        edge.kind = e.at("kind").get<std::string>() == "pre" ? EdgeKind::pre : EdgeKind::eff;
        edge.predicate = {e.at("predicate").get<std::string>(), e.at("arity").get<std::size_t>()};
        edge.op = e.at("operator").get<std::string>();
        edge.positive = e.at("positive").get<bool>();
        edge.args = e.at("args").get<std::vector<std::string>>();
        if (!g.operators.count(edge.op) || !g.predicates.count(edge.predicate))
            throw Error("graph edge references a missing node: " + edge.op + " / " + edge.predicate.str());
        g.edges.insert(std::move(edge));
    }
    return g;
}

} // namespace unidomain::graph
