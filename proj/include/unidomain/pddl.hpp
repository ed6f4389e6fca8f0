#pragma once

// PDDL 1.0 subset: STRIPS + :typing + :negative-preconditions.
//
// All identifiers are stored lowercase. Collections whose order carries no
// meaning (types, predicates, operators, objects) are kept sorted by name so
// that structural equality ignores declaration order.

#include "unidomain/errors.hpp"

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace unidomain::pddl {

inline constexpr std::string_view kRootType = "object";

class PddlError : public Error {
public:
    PddlError(const std::string &message, SourceLocation location)
        : Error(message), location_(location) {}

    SourceLocation location() const { return location_; }
    Diagnostic diagnostic() const { return {Severity::error, location_, what()}; }

private:
    SourceLocation location_;
};

class SyntaxError : public PddlError {
public:
    SyntaxError(SourceLocation location, std::string expected, const std::string &found);
    const std::string &expected() const { return expected_; }

private:
    std::string expected_;
};

class UnsupportedFeature : public PddlError {
public:
    UnsupportedFeature(std::string feature, SourceLocation location);
    const std::string &feature() const { return feature_; }

private:
    std::string feature_;
};

class ArityError : public PddlError {
public:
    ArityError(std::string predicate, std::size_t expected, std::size_t got, SourceLocation location);
    const std::string &predicate() const { return predicate_; }
    std::size_t expected() const { return expected_; }
    std::size_t got() const { return got_; }

private:
    std::string predicate_;
    std::size_t expected_;
    std::size_t got_;
};

class UndeclaredSymbol : public PddlError {
public:
    UndeclaredSymbol(std::string symbol, std::string kind, SourceLocation location);
    const std::string &symbol() const { return symbol_; }

private:
    std::string symbol_;
};

class TypeMismatch : public PddlError {
public:
    TypeMismatch(const std::string &message, SourceLocation location) : PddlError(message, location) {}
};

class DomainMismatch : public PddlError {
public:
    DomainMismatch(std::string declared, const std::string &expected, SourceLocation location);
    const std::string &declared() const { return declared_; }

private:
    std::string declared_;
};

struct TypedParam {
    std::string name; // includes the leading '?'
    std::string type{kRootType};

    auto operator<=>(const TypedParam &) const = default;
};

struct TypeDecl {
    std::string name;
    std::string parent{kRootType};

    auto operator<=>(const TypeDecl &) const = default;
};

struct PredicateSchema {
    std::string name;
    std::vector<TypedParam> params;

    std::size_t arity() const { return params.size(); }
    auto operator<=>(const PredicateSchema &) const = default;
};

struct Atom {
    std::string predicate;
    std::vector<std::string> args;

    auto operator<=>(const Atom &) const = default;
    std::string str() const;
};

struct Literal {
    std::string predicate;
    std::vector<std::string> args;
    bool positive = true;

    auto operator<=>(const Literal &) const = default;

    Literal negated() const { return {predicate, args, !positive}; }
    Atom atom() const { return {predicate, args}; }
    std::string str() const;
};

struct OperatorSchema {
    std::string name;
    std::vector<TypedParam> params;
    std::set<Literal> preconditions;
    std::set<Literal> effects;

    auto operator<=>(const OperatorSchema &) const = default;
    std::string signature() const; // name(?x - t, ...)
};

struct Domain {
    std::string name;
    std::vector<TypeDecl> types;                // excludes the implicit root `object`
    std::vector<PredicateSchema> predicates;    // sorted by name
    std::vector<OperatorSchema> operators;      // sorted by name

    // Declaration positions, keyed "predicate:<name>" / "operator:<name>" /
    // "type:<name>". Not part of structural equality.
    std::map<std::string, SourceLocation> locations;

    bool operator==(const Domain &other) const;

    const PredicateSchema *find_predicate(std::string_view name) const;
    const OperatorSchema *find_operator(std::string_view name) const;
    bool has_type(std::string_view name) const;
    /// Reflexive-transitive subtype test over the declared hierarchy.
    bool is_subtype(std::string_view sub, std::string_view super) const;
    SourceLocation location_of(const std::string &key) const;

    /// Sorts declarations into canonical order.
    void canonicalize();
};

struct TypedObject {
    std::string name;
    std::string type{kRootType};

    auto operator<=>(const TypedObject &) const = default;
};

struct Problem {
    std::string name;
    std::string domain_name;
    std::vector<TypedObject> objects; // sorted by name
    std::set<Atom> init;
    std::set<Literal> goal;

    bool operator==(const Problem &) const = default;

    const TypedObject *find_object(std::string_view name) const;
    void canonicalize();
};

struct GroundAction {
    std::string name;
    std::vector<std::string> args;

    auto operator<=>(const GroundAction &) const = default;
    std::string str() const; // (name a b)
};

struct Plan {
    std::vector<GroundAction> steps;

    std::size_t cost() const { return steps.size(); }
    bool operator==(const Plan &) const = default;
};

std::string to_lower(std::string_view text);

Domain parse_domain(std::string_view text);
Problem parse_problem(std::string_view text, const Domain &domain);

/// Whole-file read; throws Error naming the path when it cannot be opened.
std::string read_text(const std::filesystem::path &path);
/// Parse errors keep their type and location; Diagnostic::format(path) reports them.
Domain load_domain(const std::filesystem::path &path);
Problem load_problem(const std::filesystem::path &path, const Domain &domain);

std::string print_domain(const Domain &domain);
std::string print_problem(const Problem &problem);

/// Schema string used for embedding and prompts, e.g. `in_drawer(?o)`.
std::string render_predicate(const PredicateSchema &predicate);

/// Empty iff every Domain invariant holds.
std::vector<Diagnostic> validate_domain(const Domain &domain);

/// Empty iff the problem is well-typed against `domain` and its goal is nonempty.
std::vector<Diagnostic> validate_problem(const Problem &problem, const Domain &domain);

/// One step per line: `(op a b)`; also accepts `op (a b)` and leading `1.` numbering.
Plan parse_plan(std::string_view text);
std::string print_plan(const Plan &plan);

/// Extracts the first balanced `(define ...)` form from free text such as an
/// LLM reply wrapped in markdown fences.
std::optional<std::string> extract_define_block(std::string_view text);

/// Collects every `(define ...)` form in order.
std::vector<std::string> extract_define_blocks(std::string_view text);

} // namespace unidomain::pddl
