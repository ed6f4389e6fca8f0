#include "test_support.hpp"

#include "unidomain/pddl.hpp"

#include <gtest/gtest.h>

using namespace unidomain;
using namespace unidomain::pddl;
using unidomain::testing::read_data;

namespace {

const char *kTwoBlocks = R"(
(define (problem two)
  (:domain blocksworld)
  (:objects a b - block)
  (:init (on a b) (ontable b) (clear a) (handempty))
  (:goal (and (on b a))))
)";

Domain blocksworld() { return parse_domain(read_data("corpus/blocksworld.pddl")); }

} // namespace

TEST(PddlParse, BlocksworldCounts) {
    // Counts cross-checked with the `pddl` Python package on the same file.
    Domain d = blocksworld();
    EXPECT_EQ(d.name, "blocksworld");
    EXPECT_EQ(d.operators.size(), 4u);
    EXPECT_EQ(d.predicates.size(), 5u);
    const OperatorSchema *pickup = d.find_operator("pickup");
    ASSERT_NE(pickup, nullptr);
    EXPECT_EQ(pickup->preconditions.size(), 3u);
    EXPECT_EQ(pickup->effects.size(), 4u);
    EXPECT_TRUE(validate_domain(d).empty());
}

TEST(PddlParse, EmptyOperatorList) {
    Domain d = parse_domain("(define (domain empty) (:predicates (p ?x)))");
    EXPECT_TRUE(d.operators.empty());
    EXPECT_TRUE(validate_domain(d).empty());
}

TEST(PddlParse, ArityErrorReportsPredicateAndCounts) {
    const char *text = R"((define (domain d)
      (:predicates (on ?x ?y))
      (:action a :parameters (?x) :precondition (on ?x) :effect (on ?x ?x))))";
    try {
        parse_domain(text);
        FAIL() << "expected ArityError";
    } catch (const ArityError &e) {
        EXPECT_EQ(e.predicate(), "on");
        EXPECT_EQ(e.expected(), 2u);
        EXPECT_EQ(e.got(), 1u);
        EXPECT_EQ(e.location().line, 3u);
    }
}

TEST(PddlParse, RejectsUnsupportedRequirement) {
    try {
        parse_domain("(define (domain d) (:requirements :strips :conditional-effects))");
        FAIL();
    } catch (const UnsupportedFeature &e) {
        EXPECT_EQ(e.feature(), ":conditional-effects");
    }
}

TEST(PddlParse, SyntaxErrorHasPosition) {
    try {
        parse_domain("(define (domain d)\n  (:predicates (p ?x)\n");
        FAIL();
    } catch (const SyntaxError &e) {
        EXPECT_EQ(e.location().line, 3u);
        EXPECT_EQ(e.expected(), "')'");
    }
}

TEST(PddlParse, UntypedParametersDefaultToObject) {
    Domain d = parse_domain("(define (domain d) (:predicates (p ?x)) "
                            "(:action a :parameters (?x) :precondition () :effect (p ?x)))");
    EXPECT_EQ(d.operators[0].params[0].type, "object");
    EXPECT_TRUE(d.operators[0].preconditions.empty());
}

TEST(PddlParse, IdentifiersAreLowercased) {
    Domain d = parse_domain("(define (DOMAIN Kitchen) (:predicates (Lid_On ?X)) "
                            "(:action Remove-Lid :parameters (?X) :precondition (LID_ON ?x) :effect (not (lid_on ?x))))");
    EXPECT_EQ(d.name, "kitchen");
    EXPECT_NE(d.find_predicate("lid_on"), nullptr);
    EXPECT_NE(d.find_operator("remove-lid"), nullptr);
}

TEST(PddlParse, UnboundVariableIsUndeclared) {
    EXPECT_THROW(parse_domain("(define (domain d) (:predicates (p ?x)) "
                              "(:action a :parameters () :precondition () :effect (p ?y)))"),
                 UndeclaredSymbol);
}

TEST(PddlParse, ProblemBasics) {
    Domain d = blocksworld();
    Problem p = parse_problem(kTwoBlocks, d);
    EXPECT_EQ(p.objects.size(), 2u);
    EXPECT_EQ(p.init.size(), 4u);
    EXPECT_EQ(p.goal.size(), 1u);
    EXPECT_TRUE(validate_problem(p, d).empty());

    Problem three = parse_problem(read_data("corpus/bw-p03.pddl"), d);
    EXPECT_EQ(three.objects.size(), 3u);
}

TEST(PddlParse, GoalWithUndeclaredObject) {
    Domain d = blocksworld();
    try {
        parse_problem("(define (problem x) (:domain blocksworld) (:objects a b - block) (:init) (:goal (on a z)))", d);
        FAIL();
    } catch (const UndeclaredSymbol &e) {
        EXPECT_EQ(e.symbol(), "z");
    }
}

TEST(PddlParse, SelfRelationAccepted) {
    Domain d = blocksworld();
    Problem p = parse_problem("(define (problem x) (:domain blocksworld) (:objects a - block) "
                              "(:init (on a a)) (:goal (clear a)))",
                              d);
    EXPECT_TRUE(p.init.count(Atom{"on", {"a", "a"}}));
}

TEST(PddlParse, DomainMismatch) {
    Domain d = blocksworld();
    EXPECT_THROW(parse_problem("(define (problem x) (:domain kitchen) (:goal (handempty)))", d), DomainMismatch);
}

TEST(PddlParse, IllTypedInitRejected) {
    Domain d = parse_domain("(define (domain t) (:types block bowl) (:predicates (in ?b - block ?c - bowl)))");
    EXPECT_THROW(parse_problem("(define (problem x) (:domain t) (:objects a - block c - bowl) "
                               "(:init (in c a)) (:goal (in a c)))",
                               d),
                 TypeMismatch);
}

TEST(PddlParse, EmptyGoalFailsValidation) {
    Domain d = blocksworld();
    Problem p = parse_problem("(define (problem x) (:domain blocksworld) (:objects a - block) (:init) (:goal (and)))", d);
    auto diags = validate_problem(p, d);
    ASSERT_EQ(diags.size(), 1u);
    EXPECT_NE(diags[0].message.find("goal is empty"), std::string::npos);
}

TEST(PddlPrint, RoundTrip) {
    Domain d = blocksworld();
    std::string text = print_domain(d);
    EXPECT_EQ(parse_domain(text), d);
    EXPECT_EQ(print_domain(parse_domain(text)), text);

    Problem p = parse_problem(kTwoBlocks, d);
    EXPECT_EQ(parse_problem(print_problem(p), d), p);
}

TEST(PddlPrint, CanonicalUpToDeclarationOrder) {
    const char *first = R"((define (domain d) (:predicates (b) (a ?x))
        (:action z :parameters (?x) :precondition (a ?x) :effect (b))
        (:action y :parameters () :precondition (b) :effect (not (b)))))";
    const char *second = R"((define (domain d) (:predicates (a ?x) (b))
        (:action y :parameters () :precondition (b) :effect (not (b)))
        (:action z :parameters (?x) :precondition (and (a ?x)) :effect (and (b)))))";
    EXPECT_EQ(print_domain(parse_domain(first)), print_domain(parse_domain(second)));
}

TEST(PddlPrint, NegativePreconditionRendered) {
    Domain d = parse_domain("(define (domain d) (:requirements :strips :negative-preconditions) (:predicates (open ?d)) "
                            "(:action open :parameters (?d) :precondition (not (open ?d)) :effect (open ?d)))");
    std::string text = print_domain(d);
    EXPECT_NE(text.find(":precondition (and (not (open ?d)))"), std::string::npos);
    EXPECT_NE(text.find(":negative-preconditions"), std::string::npos);
    EXPECT_EQ(parse_domain(text), d);
}

TEST(PddlPrint, TypeHierarchyRoundTrip) {
    Domain d = parse_domain("(define (domain t) (:types cup bowl - container container block))");
    EXPECT_TRUE(d.is_subtype("cup", "container"));
    EXPECT_FALSE(d.is_subtype("block", "container"));
    EXPECT_EQ(parse_domain(print_domain(d)), d);
}

TEST(PddlValidate, ContradictoryEffects) {
    Domain d = parse_domain("(define (domain d) (:predicates (clear ?x)) "
                            "(:action a :parameters (?x) :precondition () :effect (and (clear ?x) (not (clear ?x)))))");
    auto diags = validate_domain(d);
    ASSERT_EQ(diags.size(), 1u);
    EXPECT_EQ(diags[0].severity, Severity::error);
    EXPECT_NE(diags[0].message.find("contradictory"), std::string::npos);
    EXPECT_EQ(diags[0].location.line, 1u);
}

TEST(PddlValidate, EmptyEffects) {
    Domain d = parse_domain("(define (domain d) (:predicates (p)) (:action a :parameters () :precondition (p) :effect ()))");
    auto diags = validate_domain(d);
    ASSERT_EQ(diags.size(), 1u);
    EXPECT_NE(diags[0].message.find("no effects"), std::string::npos);
}

// Each mutation injects exactly one violation class into a clean domain.
TEST(PddlValidate, MutationsAreDetected) {
    const Domain clean = blocksworld();
    ASSERT_TRUE(validate_domain(clean).empty());

    auto expect_flagged = [](Domain d, const char *label) {
        EXPECT_FALSE(validate_domain(d).empty()) << label;
    };

    {
        Domain d = clean;
        d.predicates.push_back(d.predicates.front());
        expect_flagged(d, "duplicate predicate");
    }
    {
        Domain d = clean;
        d.operators.push_back(d.operators.front());
        expect_flagged(d, "duplicate operator");
    }
    {
        Domain d = clean;
        d.operators[0].effects.insert(Literal{"ghost", {}, true});
        expect_flagged(d, "undeclared predicate");
    }
    {
        Domain d = clean;
        d.operators[0].preconditions.insert(Literal{"on", {"?x"}, true});
        expect_flagged(d, "arity");
    }
    {
        Domain d = clean;
        d.operators[0].preconditions.insert(Literal{"clear", {"?free"}, true});
        expect_flagged(d, "free variable");
    }
    {
        Domain d = clean;
        d.operators[0].params.push_back(d.operators[0].params.front());
        expect_flagged(d, "duplicate parameter");
    }
    {
        Domain d = clean;
        d.predicates[0].params[0].type = "unicorn";
        expect_flagged(d, "undeclared type");
    }
    {
        Domain d = clean;
        d.types = {{"a", "b"}, {"b", "a"}};
        expect_flagged(d, "type cycle");
    }
    {
        Domain d = clean;
        d.operators[0].effects.clear();
        expect_flagged(d, "empty effects");
    }
    {
        Domain d = clean;
        d.name.clear();
        expect_flagged(d, "empty name");
    }
}

TEST(PddlDiagnostic, Format) {
    Diagnostic d{Severity::error, {3, 7}, "bad thing"};
    EXPECT_EQ(d.format("x.pddl"), "x.pddl:3:7: error: bad thing");
    Diagnostic nowhere{Severity::warning, {}, "unused"};
    EXPECT_EQ(nowhere.format("x.pddl"), "x.pddl: warning: unused");
}

TEST(PddlPlan, ParsesBothStepStyles) {
    Plan p = parse_plan("1. remove_lid (lid)\n(pick_from_rack bowl)\n; comment\n\nstack(a, b)\n");
    ASSERT_EQ(p.steps.size(), 3u);
    EXPECT_EQ(p.steps[0].str(), "(remove_lid lid)");
    EXPECT_EQ(p.steps[1].str(), "(pick_from_rack bowl)");
    EXPECT_EQ(p.steps[2].str(), "(stack a b)");
    EXPECT_EQ(parse_plan(print_plan(p)), p);
}

TEST(PddlExtract, FindsDefineInsideFences) {
    std::string reply = "Here you go:\n```pddl\n(define (domain x)\n ; (not a paren)\n (:predicates (p)))\n```\n";
    auto block = extract_define_block(reply);
    ASSERT_TRUE(block.has_value());
    EXPECT_EQ(parse_domain(*block).name, "x");
    EXPECT_FALSE(extract_define_block("no pddl here").has_value());
}
