#include "unidomain/pddl.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace unidomain {

const char *to_string(Severity severity) {
    switch (severity) {
    case Severity::error: return "error";
    case Severity::warning: return "warning";
    case Severity::note: return "note";
    }
    return "error";
}

std::string Diagnostic::format(const std::string &file) const {
    std::ostringstream out;
    out << file;
    if (location.known())
        out << ':' << location.line << ':' << location.column;
    out << ": " << to_string(severity) << ": " << message;
    return out.str();
}

} // namespace unidomain

namespace unidomain::pddl {


SyntaxError::SyntaxError(SourceLocation location, std::string expected, const std::string &found)
    : PddlError("syntax error: expected " + expected + ", found " + found, location),
      expected_(std::move(expected)) {}

UnsupportedFeature::UnsupportedFeature(std::string feature, SourceLocation location)
    : PddlError("unsupported feature " + feature, location), feature_(std::move(feature)) {}

ArityError::ArityError(std::string predicate, std::size_t expected, std::size_t got, SourceLocation location)
    : PddlError("arity mismatch for '" + predicate + "': expected " + std::to_string(expected) + ", got " +
                    std::to_string(got),
                location),
      predicate_(std::move(predicate)), expected_(expected), got_(got) {}

UndeclaredSymbol::UndeclaredSymbol(std::string symbol, std::string kind, SourceLocation location)
    : PddlError("undeclared " + kind + " '" + symbol + "'", location), symbol_(std::move(symbol)) {}

DomainMismatch::DomainMismatch(std::string declared, const std::string &expected, SourceLocation location)
    : PddlError("problem refers to domain '" + declared + "' but domain is '" + expected + "'", location),
      declared_(std::move(declared)) {}

std::string to_lower(std::string_view text) {
    std::string out(text);
    for (char &c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// ---------------------------------------------------------------------------
// Value helpers

std::string Atom::str() const {
    std::string out = "(" + predicate;
    for (const auto &a : args)
        out += " " + a;
    return out + ")";
}

std::string Literal::str() const {
    std::string body = atom().str();
    return positive ? body : "(not " + body + ")";
}

std::string GroundAction::str() const {
    std::string out = "(" + name;
    for (const auto &a : args)
        out += " " + a;
    return out + ")";
}

std::string OperatorSchema::signature() const {
    std::string out = name + "(";
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (i)
            out += ", ";
        out += params[i].name;
        if (params[i].type != kRootType)
            out += " - " + params[i].type;
    }
    return out + ")";
}

std::string render_predicate(const PredicateSchema &predicate) {
    std::string out = predicate.name + "(";
    for (std::size_t i = 0; i < predicate.params.size(); ++i) {
        if (i)
            out += ", ";
        out += predicate.params[i].name;
    }
    return out + ")";
}

bool Domain::operator==(const Domain &other) const {
    return name == other.name && types == other.types && predicates == other.predicates &&
           operators == other.operators;
}

const PredicateSchema *Domain::find_predicate(std::string_view n) const {
    for (const auto &p : predicates)
        if (p.name == n)
            return &p;
    return nullptr;
}

const OperatorSchema *Domain::find_operator(std::string_view n) const {
    for (const auto &o : operators)
        if (o.name == n)
            return &o;
    return nullptr;
}

bool Domain::has_type(std::string_view n) const {
    if (n == kRootType)
        return true;
    return std::any_of(types.begin(), types.end(), [&](const TypeDecl &t) { return t.name == n; });
}

bool Domain::is_subtype(std::string_view sub, std::string_view super) const {
    if (super == kRootType || sub == super)
        return true;
    std::string current(sub);
    // Bounded walk; a cyclic hierarchy is reported by validate_domain.
    for (std::size_t step = 0; step <= types.size(); ++step) {
        auto it = std::find_if(types.begin(), types.end(), [&](const TypeDecl &t) { return t.name == current; });
        if (it == types.end())
            return false;
        if (it->parent == super)
            return true;
        current = it->parent;
    }
    return false;
}

SourceLocation Domain::location_of(const std::string &key) const {
    auto it = locations.find(key);
    return it == locations.end() ? SourceLocation{} : it->second;
}

void Domain::canonicalize() {
    auto by_name = [](const auto &a, const auto &b) { return a.name < b.name; };
    std::stable_sort(types.begin(), types.end(), by_name);
    std::stable_sort(predicates.begin(), predicates.end(), by_name);
    std::stable_sort(operators.begin(), operators.end(), by_name);
}

const TypedObject *Problem::find_object(std::string_view n) const {
    for (const auto &o : objects)
        if (o.name == n)
            return &o;
    return nullptr;
}

void Problem::canonicalize() {
    std::stable_sort(objects.begin(), objects.end(),
                     [](const TypedObject &a, const TypedObject &b) { return a.name < b.name; });
}

// ---------------------------------------------------------------------------
// S-expression reader

namespace {

struct SExpr {
    bool is_list = false;
    std::string atom;
    std::vector<SExpr> items;
    SourceLocation loc;

    bool is_atom(std::string_view text) const { return !is_list && atom == text; }
    std::string describe() const {
        if (is_list)
            return items.empty() ? "'()'" : "list starting with " + items.front().describe();
        return "'" + atom + "'";
    }
};

class Reader {
public:
    explicit Reader(std::string_view text) : text_(text) {}

    SExpr read_document() {
        skip_space();
        if (pos_ >= text_.size())
            throw SyntaxError(here(), "'('", "end of input");
        SExpr root = read();
        skip_space();
        if (pos_ < text_.size())
            throw SyntaxError(here(), "end of input", "'" + std::string(1, text_[pos_]) + "'");
        return root;
    }

private:
    SourceLocation here() const { return {line_, col_}; }

    void advance() {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_space() {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == ';') {
                while (pos_ < text_.size() && text_[pos_] != '\n')
                    advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    SExpr read() {
        skip_space();
        SExpr node;
        node.loc = here();
        if (pos_ >= text_.size())
            throw SyntaxError(here(), "expression", "end of input");
        char c = text_[pos_];
        if (c == ')')
            throw SyntaxError(here(), "expression", "')'");
        if (c == '(') {
            node.is_list = true;
            advance();
            for (;;) {
                skip_space();
                if (pos_ >= text_.size())
                    throw SyntaxError(here(), "')'", "end of input");
                if (text_[pos_] == ')') {
                    advance();
                    break;
                }
                node.items.push_back(read());
            }
            return node;
        }
        std::string token;
        while (pos_ < text_.size()) {
            char d = text_[pos_];
            if (d == '(' || d == ')' || d == ';' || std::isspace(static_cast<unsigned char>(d)))
                break;
            token.push_back(d);
            advance();
        }
        node.atom = to_lower(token);
        return node;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
};

bool is_variable(std::string_view s) { return !s.empty() && s.front() == '?'; }

bool is_identifier(std::string_view s) {
    if (s.empty() || s.front() == ':' || s.front() == '?' || s.front() == '-')
        return false;
    return true;
}

const SExpr &expect_list(const SExpr &e, const std::string &what) {
    if (!e.is_list)
        throw SyntaxError(e.loc, what, e.describe());
    return e;
}

std::string expect_name(const SExpr &e, const std::string &what) {
    if (e.is_list || !is_identifier(e.atom))
        throw SyntaxError(e.loc, what, e.describe());
    return e.atom;
}

std::string expect_variable(const SExpr &e) {
    if (e.is_list || !is_variable(e.atom) || e.atom.size() < 2)
        throw SyntaxError(e.loc, "variable", e.describe());
    return e.atom;
}

// `a b - t c` typed lists. Untyped trailing names get `object`.
template <typename Item, typename NameFn>
std::vector<std::pair<Item, SourceLocation>> read_typed_list(const std::vector<SExpr> &items, std::size_t begin,
                                                             NameFn read_name) {
    std::vector<std::pair<Item, SourceLocation>> out;
    std::vector<std::pair<std::string, SourceLocation>> pending;
    for (std::size_t i = begin; i < items.size(); ++i) {
        const SExpr &e = items[i];
        if (e.is_atom("-")) {
            if (pending.empty())
                throw SyntaxError(e.loc, "name before '-'", "'-'");
            if (i + 1 >= items.size())
                throw SyntaxError(e.loc, "type after '-'", "end of list");
            const SExpr &t = items[++i];
            if (t.is_list) {
                if (!t.items.empty() && t.items.front().is_atom("either"))
                    throw UnsupportedFeature("either-types", t.loc);
                throw SyntaxError(t.loc, "type name", t.describe());
            }
            std::string type = expect_name(t, "type name");
            for (auto &[name, loc] : pending)
                out.push_back({Item{name, type}, loc});
            pending.clear();
        } else {
            pending.push_back({read_name(e), e.loc});
        }
    }
    for (auto &[name, loc] : pending)
        out.push_back({Item{name, std::string(kRootType)}, loc});
    return out;
}

const std::set<std::string> kSupportedRequirements = {":strips", ":typing", ":negative-preconditions"};

void check_requirements(const SExpr &section) {
    for (std::size_t i = 1; i < section.items.size(); ++i) {
        const SExpr &flag = section.items[i];
        if (flag.is_list || flag.atom.empty() || flag.atom.front() != ':')
            throw SyntaxError(flag.loc, "requirement flag", flag.describe());
        if (!kSupportedRequirements.count(flag.atom))
            throw UnsupportedFeature(flag.atom, flag.loc);
    }
}

struct RawLiteral {
    Literal literal;
    SourceLocation loc;
};

RawLiteral read_literal(const SExpr &e, bool allow_negation) {
    expect_list(e, "literal");
    if (e.items.empty())
        throw SyntaxError(e.loc, "literal", "'()'");
    const SExpr &head = e.items.front();
    if (head.is_atom("not")) {
        if (!allow_negation)
            throw SyntaxError(e.loc, "positive atom", "negated literal");
        if (e.items.size() != 2)
            throw SyntaxError(e.loc, "(not <atom>)", e.describe());
        RawLiteral inner = read_literal(e.items[1], false);
        inner.literal.positive = false;
        inner.loc = e.loc;
        return inner;
    }
    if (head.is_list)
        throw SyntaxError(head.loc, "predicate name", head.describe());
    static const std::set<std::string> kConnectives = {"or", "imply", "exists", "forall", "when", "="};
    if (kConnectives.count(head.atom))
        throw UnsupportedFeature("'" + head.atom + "'", head.loc);
    if (head.atom == "and")
        throw SyntaxError(head.loc, "literal", "nested 'and'");
    RawLiteral out;
    out.loc = e.loc;
    out.literal.predicate = expect_name(head, "predicate name");
    for (std::size_t i = 1; i < e.items.size(); ++i) {
        const SExpr &arg = e.items[i];
        if (arg.is_list)
            throw SyntaxError(arg.loc, "term", arg.describe());
        out.literal.args.push_back(arg.atom);
    }
    return out;
}

// `(and l1 l2 ...)`, a single literal, or `()`. Nested `and` is flattened.
void read_conjunction(const SExpr &e, std::vector<RawLiteral> &out, bool allow_negation) {
    expect_list(e, "conjunction");
    if (e.items.empty())
        return;
    if (e.items.front().is_atom("and")) {
        for (std::size_t i = 1; i < e.items.size(); ++i)
            read_conjunction(e.items[i], out, allow_negation);
        return;
    }
    out.push_back(read_literal(e, allow_negation));
}

void check_literal_against(const Domain &domain, const RawLiteral &raw) {
    const PredicateSchema *schema = domain.find_predicate(raw.literal.predicate);
    if (!schema)
        throw UndeclaredSymbol(raw.literal.predicate, "predicate", raw.loc);
    if (schema->arity() != raw.literal.args.size())
        throw ArityError(raw.literal.predicate, schema->arity(), raw.literal.args.size(), raw.loc);
}

std::pair<std::string, SourceLocation> read_header(const SExpr &root, const std::string &kind) {
    expect_list(root, "(define ...)");
    if (root.items.empty() || !root.items.front().is_atom("define"))
        throw SyntaxError(root.loc, "'define'", root.items.empty() ? "'()'" : root.items.front().describe());
    if (root.items.size() < 2)
        throw SyntaxError(root.loc, "(" + kind + " <name>)", "end of list");
    const SExpr &header = expect_list(root.items[1], "(" + kind + " <name>)");
    if (header.items.size() != 2 || !header.items[0].is_atom(kind))
        throw SyntaxError(header.loc, "(" + kind + " <name>)", header.describe());
    return {expect_name(header.items[1], kind + " name"), header.loc};
}

const SExpr &section_head(const SExpr &section) {
    expect_list(section, "section");
    if (section.items.empty() || section.items.front().is_list || section.items.front().atom.empty() ||
        section.items.front().atom.front() != ':')
        throw SyntaxError(section.loc, "section keyword", section.describe());
    return section.items.front();
}

OperatorSchema read_action(const SExpr &section, Domain &domain) {
    if (section.items.size() < 2)
        throw SyntaxError(section.loc, "action name", "end of list");
    OperatorSchema op;
    op.name = expect_name(section.items[1], "action name");
    domain.locations.emplace("operator:" + op.name, section.loc);

    std::vector<RawLiteral> pre;
    std::vector<RawLiteral> eff;
    bool seen_params = false, seen_pre = false, seen_eff = false;
    for (std::size_t i = 2; i < section.items.size(); i += 2) {
        const SExpr &key = section.items[i];
        if (key.is_list || key.atom.empty() || key.atom.front() != ':')
            throw SyntaxError(key.loc, "action keyword", key.describe());
        if (i + 1 >= section.items.size())
            throw SyntaxError(key.loc, "value after " + key.atom, "end of list");
        const SExpr &value = section.items[i + 1];
        if (key.atom == ":parameters") {
            if (seen_params)
                throw SyntaxError(key.loc, "single :parameters", "duplicate");
            seen_params = true;
            expect_list(value, "parameter list");
            for (auto &[param, loc] : read_typed_list<TypedParam>(value.items, 0, expect_variable)) {
                if (!domain.has_type(param.type))
                    throw UndeclaredSymbol(param.type, "type", loc);
                op.params.push_back(param);
            }
        } else if (key.atom == ":precondition") {
            if (seen_pre)
                throw SyntaxError(key.loc, "single :precondition", "duplicate");
            seen_pre = true;
            read_conjunction(value, pre, true);
        } else if (key.atom == ":effect") {
            if (seen_eff)
                throw SyntaxError(key.loc, "single :effect", "duplicate");
            seen_eff = true;
            read_conjunction(value, eff, true);
        } else {
            throw UnsupportedFeature(key.atom, key.loc);
        }
    }

    auto check_terms = [&](const RawLiteral &raw) {
        check_literal_against(domain, raw);
        for (const auto &arg : raw.literal.args) {
            if (!is_variable(arg))
                throw UndeclaredSymbol(arg, "constant", raw.loc);
            bool bound = std::any_of(op.params.begin(), op.params.end(),
                                     [&](const TypedParam &p) { return p.name == arg; });
            if (!bound)
                throw UndeclaredSymbol(arg, "variable", raw.loc);
        }
    };
    for (const auto &raw : pre) {
        check_terms(raw);
        op.preconditions.insert(raw.literal);
    }
    for (const auto &raw : eff) {
        check_terms(raw);
        op.effects.insert(raw.literal);
    }
    return op;
}

} // namespace

Domain parse_domain(std::string_view text) {
    SExpr root = Reader(text).read_document();
    Domain domain;
    auto [name, header_loc] = read_header(root, "domain");
    domain.name = name;

    std::vector<const SExpr *> actions;
    const SExpr *predicates = nullptr;
    for (std::size_t i = 2; i < root.items.size(); ++i) {
        const SExpr &section = root.items[i];
        const SExpr &head = section_head(section);
        if (head.atom == ":requirements") {
            check_requirements(section);
        } else if (head.atom == ":types") {
            for (auto &[decl, loc] : read_typed_list<TypeDecl>(section.items, 1, [](const SExpr &e) {
                     return expect_name(e, "type name");
                 })) {
                if (decl.name == kRootType)
                    continue;
                domain.locations.emplace("type:" + decl.name, loc);
                domain.types.push_back(decl);
            }
        } else if (head.atom == ":predicates") {
            if (predicates)
                throw SyntaxError(head.loc, "single :predicates section", "duplicate");
            predicates = &section;
        } else if (head.atom == ":action") {
            actions.push_back(&section);
        } else {
            throw UnsupportedFeature(head.atom, head.loc);
        }
    }

    for (const auto &t : domain.types)
        if (!domain.has_type(t.parent))
            throw UndeclaredSymbol(t.parent, "type", domain.location_of("type:" + t.name));

    if (predicates) {
        for (std::size_t i = 1; i < predicates->items.size(); ++i) {
            const SExpr &decl = expect_list(predicates->items[i], "predicate declaration");
            if (decl.items.empty())
                throw SyntaxError(decl.loc, "predicate name", "'()'");
            PredicateSchema schema;
            schema.name = expect_name(decl.items.front(), "predicate name");
            for (auto &[param, loc] : read_typed_list<TypedParam>(decl.items, 1, expect_variable)) {
                if (!domain.has_type(param.type))
                    throw UndeclaredSymbol(param.type, "type", loc);
                schema.params.push_back(param);
            }
            domain.locations.emplace("predicate:" + schema.name, decl.loc);
            domain.predicates.push_back(std::move(schema));
        }
    }

    for (const SExpr *action : actions)
        domain.operators.push_back(read_action(*action, domain));

    domain.canonicalize();
    return domain;
}

Problem parse_problem(std::string_view text, const Domain &domain) {
    SExpr root = Reader(text).read_document();
    Problem problem;
    auto [name, header_loc] = read_header(root, "problem");
    problem.name = name;

    const SExpr *objects = nullptr;
    const SExpr *init = nullptr;
    const SExpr *goal = nullptr;
    bool seen_domain = false;
    for (std::size_t i = 2; i < root.items.size(); ++i) {
        const SExpr &section = root.items[i];
        const SExpr &head = section_head(section);
        if (head.atom == ":domain") {
            if (section.items.size() != 2)
                throw SyntaxError(section.loc, "(:domain <name>)", section.describe());
            problem.domain_name = expect_name(section.items[1], "domain name");
            if (problem.domain_name != domain.name)
                throw DomainMismatch(problem.domain_name, domain.name, section.loc);
            seen_domain = true;
        } else if (head.atom == ":requirements") {
            check_requirements(section);
        } else if (head.atom == ":objects") {
            objects = &section;
        } else if (head.atom == ":init") {
            init = &section;
        } else if (head.atom == ":goal") {
            goal = &section;
        } else {
            throw UnsupportedFeature(head.atom, head.loc);
        }
    }
    if (!seen_domain)
        throw SyntaxError(root.loc, "(:domain <name>)", "missing section");
    if (!goal)
        throw SyntaxError(root.loc, "(:goal ...)", "missing section");

    std::unordered_map<std::string, std::string> object_types;
    if (objects) {
        for (auto &[obj, loc] : read_typed_list<TypedObject>(objects->items, 1, [](const SExpr &e) {
                 return expect_name(e, "object name");
             })) {
            if (!domain.has_type(obj.type))
                throw UndeclaredSymbol(obj.type, "type", loc);
            if (!object_types.emplace(obj.name, obj.type).second)
                throw SyntaxError(loc, "unique object name", "'" + obj.name + "'");
            problem.objects.push_back(obj);
        }
    }

    auto check_ground = [&](const RawLiteral &raw) {
        check_literal_against(domain, raw);
        const PredicateSchema *schema = domain.find_predicate(raw.literal.predicate);
        for (std::size_t k = 0; k < raw.literal.args.size(); ++k) {
            const std::string &arg = raw.literal.args[k];
            auto it = object_types.find(arg);
            if (it == object_types.end())
                throw UndeclaredSymbol(arg, "object", raw.loc);
            if (!domain.is_subtype(it->second, schema->params[k].type))
                throw TypeMismatch("object '" + arg + "' of type '" + it->second + "' used as '" +
                                       schema->params[k].type + "' in " + raw.literal.str(),
                                   raw.loc);
        }
    };

    if (init) {
        for (std::size_t i = 1; i < init->items.size(); ++i) {
            RawLiteral raw = read_literal(init->items[i], false);
            check_ground(raw);
            problem.init.insert(raw.literal.atom());
        }
    }
    if (goal->items.size() != 2)
        throw SyntaxError(goal->loc, "(:goal <condition>)", goal->describe());
    std::vector<RawLiteral> goal_literals;
    read_conjunction(goal->items[1], goal_literals, true);
    for (const auto &raw : goal_literals) {
        check_ground(raw);
        problem.goal.insert(raw.literal);
    }
    problem.canonicalize();
    return problem;
}

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string params_text(const std::vector<TypedParam> &params) {
    std::string out;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (i)
            out += ' ';
        out += params[i].name;
        if (params[i].type != kRootType)
            out += " - " + params[i].type;
    }
    return out;
}

std::string conjunction_text(const std::set<Literal> &literals) {
    std::string out = "(and";
    for (const auto &l : literals)
        out += " " + l.str();
    return out + ")";
}

} // namespace

std::string print_domain(const Domain &input) {
    Domain domain = input;
    domain.canonicalize();

    bool typed = !domain.types.empty();
    bool negative = false;
    for (const auto &op : domain.operators)
        for (const auto &l : op.preconditions)
            negative = negative || !l.positive;

    std::ostringstream out;
    out << "(define (domain " << domain.name << ")\n";
    out << "  (:requirements :strips";
    if (typed)
        out << " :typing";
    if (negative)
        out << " :negative-preconditions";
    out << ")\n";

    if (typed) {
        std::map<std::string, std::vector<std::string>> by_parent;
        for (const auto &t : domain.types)
            by_parent[t.parent].push_back(t.name);
        out << "  (:types";
        for (const auto &[parent, children] : by_parent) {
            if (parent == kRootType)
                continue;
            for (const auto &c : children)
                out << ' ' << c;
            out << " - " << parent;
        }
        if (auto it = by_parent.find(std::string(kRootType)); it != by_parent.end())
            for (const auto &c : it->second)
                out << ' ' << c;
        out << ")\n";
    }

    out << "  (:predicates";
    for (const auto &p : domain.predicates) {
        out << "\n    (" << p.name;
        if (!p.params.empty())
            out << ' ' << params_text(p.params);
        out << ')';
    }
    out << ")\n";

    for (const auto &op : domain.operators) {
        out << "  (:action " << op.name << "\n";
        out << "    :parameters (" << params_text(op.params) << ")\n";
        out << "    :precondition " << conjunction_text(op.preconditions) << "\n";
        out << "    :effect " << conjunction_text(op.effects) << ")\n";
    }
    out << ")\n";
    return out.str();
}

std::string print_problem(const Problem &input) {
    Problem problem = input;
    problem.canonicalize();
    std::ostringstream out;
    out << "(define (problem " << problem.name << ")\n";
    out << "  (:domain " << problem.domain_name << ")\n";
    out << "  (:objects";
    // Group consecutive-by-type for readability while staying canonical.
    std::map<std::string, std::vector<std::string>> by_type;
    for (const auto &o : problem.objects)
        by_type[o.type].push_back(o.name);
    for (const auto &[type, names] : by_type) {
        out << "\n    ";
        for (const auto &n : names)
            out << n << ' ';
        out << "- " << type;
    }
    out << ")\n";
    out << "  (:init";
    for (const auto &a : problem.init)
        out << "\n    " << a.str();
    out << ")\n";
    out << "  (:goal " << conjunction_text(problem.goal) << "))\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Validation

std::vector<Diagnostic> validate_domain(const Domain &domain) {
    std::vector<Diagnostic> out;
    auto error = [&](SourceLocation loc, std::string message) {
        out.push_back({Severity::error, loc, std::move(message)});
    };

    if (domain.name.empty())
        error({}, "domain name is empty");

    std::set<std::string> type_names;
    for (const auto &t : domain.types) {
        SourceLocation loc = domain.location_of("type:" + t.name);
        if (!type_names.insert(t.name).second)
            error(loc, "duplicate type '" + t.name + "'");
        if (!domain.has_type(t.parent))
            error(loc, "type '" + t.name + "' has undeclared parent '" + t.parent + "'");
    }
    for (const auto &t : domain.types) {
        std::set<std::string> seen{t.name};
        std::string current = t.parent;
        while (current != kRootType) {
            if (!seen.insert(current).second) {
                error(domain.location_of("type:" + t.name), "type hierarchy cycle through '" + t.name + "'");
                break;
            }
            auto it = std::find_if(domain.types.begin(), domain.types.end(),
                                   [&](const TypeDecl &d) { return d.name == current; });
            if (it == domain.types.end())
                break;
            current = it->parent;
        }
    }

    auto check_params = [&](const std::vector<TypedParam> &params, const std::string &owner, SourceLocation loc) {
        std::set<std::string> names;
        for (const auto &p : params) {
            if (!names.insert(p.name).second)
                error(loc, owner + ": duplicate variable '" + p.name + "'");
            if (!domain.has_type(p.type))
                error(loc, owner + ": undeclared type '" + p.type + "'");
        }
    };

    std::set<std::string> predicate_names;
    for (const auto &p : domain.predicates) {
        SourceLocation loc = domain.location_of("predicate:" + p.name);
        if (p.name.empty())
            error(loc, "predicate with empty name");
        if (p.name != to_lower(p.name))
            error(loc, "predicate '" + p.name + "' is not lowercase");
        if (!predicate_names.insert(p.name).second)
            error(loc, "duplicate predicate '" + p.name + "'");
        check_params(p.params, "predicate '" + p.name + "'", loc);
    }

    std::set<std::string> operator_names;
    for (const auto &op : domain.operators) {
        SourceLocation loc = domain.location_of("operator:" + op.name);
        std::string owner = "operator '" + op.name + "'";
        if (op.name.empty())
            error(loc, "operator with empty name");
        if (!operator_names.insert(op.name).second)
            error(loc, "duplicate operator '" + op.name + "'");
        check_params(op.params, owner, loc);

        auto check_literal = [&](const Literal &l) {
            const PredicateSchema *schema = domain.find_predicate(l.predicate);
            if (!schema) {
                error(loc, owner + " references undeclared predicate '" + l.predicate + "'");
            } else if (schema->arity() != l.args.size()) {
                error(loc, owner + ": arity mismatch for '" + l.predicate + "': expected " +
                               std::to_string(schema->arity()) + ", got " + std::to_string(l.args.size()));
            }
            for (const auto &arg : l.args) {
                bool bound = std::any_of(op.params.begin(), op.params.end(),
                                         [&](const TypedParam &p) { return p.name == arg; });
                if (!bound)
                    error(loc, owner + ": term '" + arg + "' in " + l.str() + " is not a parameter");
            }
        };
        for (const auto &l : op.preconditions)
            check_literal(l);
        for (const auto &l : op.effects)
            check_literal(l);

        if (op.effects.empty())
            error(loc, owner + " has no effects");
        for (const auto &l : op.effects)
            if (l.positive && op.effects.count(l.negated()))
                error(loc, owner + " has contradictory effects " + l.str() + " and " + l.negated().str());
    }
    return out;
}

std::vector<Diagnostic> validate_problem(const Problem &problem, const Domain &domain) {
    std::vector<Diagnostic> out;
    auto error = [&](std::string message) { out.push_back({Severity::error, {}, std::move(message)}); };
    if (problem.domain_name != domain.name)
        error("problem refers to domain '" + problem.domain_name + "' but domain is '" + domain.name + "'");
    std::set<std::string> names;
    for (const auto &o : problem.objects) {
        if (!names.insert(o.name).second)
            error("duplicate object '" + o.name + "'");
        if (!domain.has_type(o.type))
            error("object '" + o.name + "' has undeclared type '" + o.type + "'");
    }
    auto check = [&](const std::string &predicate, const std::vector<std::string> &args, const std::string &text) {
        const PredicateSchema *schema = domain.find_predicate(predicate);
        if (!schema) {
            error("undeclared predicate '" + predicate + "' in " + text);
            return;
        }
        if (schema->arity() != args.size()) {
            error("arity mismatch in " + text + ": expected " + std::to_string(schema->arity()));
            return;
        }
        for (std::size_t k = 0; k < args.size(); ++k) {
            const TypedObject *obj = problem.find_object(args[k]);
            if (!obj)
                error("undeclared object '" + args[k] + "' in " + text);
            else if (!domain.is_subtype(obj->type, schema->params[k].type))
                error("object '" + args[k] + "' has type '" + obj->type + "', expected '" + schema->params[k].type +
                      "' in " + text);
        }
    };
    for (const auto &a : problem.init)
        check(a.predicate, a.args, a.str());
    for (const auto &l : problem.goal)
        check(l.predicate, l.args, l.str());
    if (problem.goal.empty())
        error("goal is empty");
    return out;
}

// ---------------------------------------------------------------------------
// Plans and free-text extraction

Plan parse_plan(std::string_view text) {
    Plan plan;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto semi = line.find(';'); semi != std::string::npos)
            line.erase(semi);
        std::string cleaned;
        for (char c : line)
            cleaned += (c == '(' || c == ')' || c == ',') ? ' ' : c;
        std::istringstream words(cleaned);
        std::vector<std::string> tokens;
        for (std::string w; words >> w;)
            tokens.push_back(to_lower(w));
        if (tokens.empty())
            continue;
        // Leading enumeration such as "1." or "3:".
        const std::string &first = tokens.front();
        if (std::all_of(first.begin(), first.end() - 1, [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) &&
            (first.back() == '.' || first.back() == ':') && first.size() > 1)
            tokens.erase(tokens.begin());
        if (tokens.empty())
            throw SyntaxError({line_no, 1}, "action name", "empty step");
        GroundAction step;
        step.name = tokens.front();
        step.args.assign(tokens.begin() + 1, tokens.end());
        plan.steps.push_back(std::move(step));
    }
    return plan;
}

std::string print_plan(const Plan &plan) {
    std::string out;
    for (const auto &step : plan.steps)
        out += step.str() + "\n";
    return out;
}

std::vector<std::string> extract_define_blocks(std::string_view text) {
    std::vector<std::string> out;
    std::string lower = to_lower(text);
    std::size_t from = 0;
    for (;;) {
        std::size_t at = lower.find("(define", from);
        if (at == std::string::npos)
            break;
        int depth = 0;
        bool in_comment = false;
        std::size_t end = std::string::npos;
        for (std::size_t i = at; i < text.size(); ++i) {
            char c = text[i];
            if (in_comment) {
                in_comment = c != '\n';
                continue;
            }
            if (c == ';')
                in_comment = true;
            else if (c == '(')
                ++depth;
            else if (c == ')' && --depth == 0) {
                end = i;
                break;
            }
        }
        if (end == std::string::npos)
            break;
        out.emplace_back(text.substr(at, end - at + 1));
        from = end + 1;
    }
    return out;
}

std::optional<std::string> extract_define_block(std::string_view text) {
    auto blocks = extract_define_blocks(text);
    if (blocks.empty())
        return std::nullopt;
    return blocks.front();
}

std::string read_text(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Domain load_domain(const std::filesystem::path &path) { return parse_domain(read_text(path)); }

Problem load_problem(const std::filesystem::path &path, const Domain &domain) {
    return parse_problem(read_text(path), domain);
}

} // namespace unidomain::pddl
