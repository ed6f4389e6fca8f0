#include "unidomain/prompts.hpp"

#include "unidomain/errors.hpp"

#include <set>

namespace unidomain::prompts {

namespace {

const std::map<std::string, std::string> &table() {
    static const std::map<std::string, std::string> t{
        {"system", R"(You are an expert in robot task planning and the Planning Domain Definition Language (PDDL).
Use only PDDL 1.0 with :strips, :typing and :negative-preconditions. Use lowercase identifiers with underscores.
Do not use disjunctions, quantifiers, conditional effects, equality or numeric fluents.)"},

        {"propose_transition", R"(Task instruction: {{instruction}}

The two attached images are keyframes {{from}} and {{to}} of a demonstration with {{count}} keyframes.
Identify the single robot action that turns the first keyframe into the second.
Give it a descriptive operator name, list its preconditions and effects, and declare every predicate it uses.
Reuse the predicates defined so far whenever they express the same fact:
{{predicates}}

Answer with one PDDL domain named {{domain}} that contains the predicates you use and exactly one :action.)"},

        {"revise_domain", R"(Task instruction: {{instruction}}

Below is a PDDL domain assembled action by action from a demonstration.
Revise it as a whole: fix syntax errors, merge predicates that mean the same thing, reuse predicates across actions,
and make operator and predicate names consistent. Keep every action that the demonstration needs.

{{domain}}

Answer with the complete revised domain.)"},

        {"test_problem", R"(Task instruction: {{instruction}}

A planning domain named {{domain}} uses these types and predicates:
types: {{types}}
predicates:
{{predicates}}

Write test problem {{index}} of {{count}} for this domain. Problems must grow in difficulty with their index:
problem 1 needs the fewest steps, problem {{count}} the most. Ground the problem in the household scene of the instruction.
Answer with one PDDL problem named {{problem}} for domain {{domain}}.)"},

        {"refine_domain", R"(Task instruction: {{instruction}}

The PDDL domain below did not pass a check.
{{feedback}}

{{domain}}

Correct the domain so that the check passes. Answer with the complete corrected domain.)"},

        {"verify_solution", R"(Task instruction: {{instruction}}

Domain:
{{domain}}

Problem:
{{problem}}

Plan found by a classical planner:
{{plan}}

Does this plan satisfy physical constraints and commonsense expectations for the task?
Start your answer with PASS, or with FAIL followed by a colon and a short explanation.)"},

        {"repair", R"(Your previous answer could not be used:
{{diagnostics}}

Reply with the corrected {{artifact}} only.)"},

        {"group_predicates", R"(Sort each predicate of the planning domain below into exactly one of four groups:
object_category (what kind of thing an object is), state_attribute (an object's internal state),
spatial_relation (where objects are relative to each other), affordance (what can be done with an object).

{{predicates}}

Answer with a JSON object with the keys object_category, state_attribute, spatial_relation and affordance,
each mapping to a list of predicate names.)"},

        {"initial_problem", R"(Task instruction: {{instruction}}

The attached image shows the current scene. The planning domain is named {{domain}}.
types: {{types}}
Predicates by group:
{{groups}}

Describe the scene and the goal as a PDDL problem named {{problem}} for domain {{domain}}.
Declare every object you see that matters for the task, state the initial facts and the goal.)"},

        {"refined_problem", R"(Task instruction: {{instruction}}

The attached image shows the current scene. Only the part of the planning domain that is relevant to this task is shown:

{{domain}}

Describe the scene and the goal as a PDDL problem named {{problem}} for domain {{domain_name}}.
Declare every object that matters for the task, state the initial facts and the goal.)"},

        {"predicate_equivalence", R"(Two planning domains are being merged. Do these predicates describe the same fact?
A: {{a}}
B: {{b}}
Answer YES if they are functionally identical, otherwise NO.)"},

        {"operator_equivalence", R"(Two planning domains are being merged. Do these operators perform the same action?
A: {{a}}
B: {{b}}
Answer YES if they are functionally identical, otherwise NO.)"},
    };
    return t;
}

} // namespace

std::vector<std::string> names() {
    std::vector<std::string> out;
    for (const auto &[name, text] : table())
        out.push_back(name);
    return out;
}

const std::string &raw(const std::string &name) {
    auto it = table().find(name);
    if (it == table().end())
        throw Error("unknown prompt template `" + name + "`");
    return it->second;
}

std::string render(const std::string &name, const Slots &slots) {
    const std::string &text = raw(name);
    std::string out;
    std::set<std::string> used;
    std::size_t pos = 0;
    while (true) {
        auto open = text.find("{{", pos);
        if (open == std::string::npos) {
            out.append(text, pos);
            break;
        }
        auto close = text.find("}}", open);
        if (close == std::string::npos)
            throw Error("template `" + name + "` has an unterminated slot");
        out.append(text, pos, open - pos);
        std::string slot = text.substr(open + 2, close - open - 2);
        auto it = slots.find(slot);
        if (it == slots.end())
            throw Error("template `" + name + "` needs slot `" + slot + "`");
        out += it->second;
        used.insert(slot);
        pos = close + 2;
    }
    for (const auto &[slot, value] : slots)
        if (!used.count(slot))
            throw Error("template `" + name + "` has no slot `" + slot + "`");
    return out;
}

} // namespace unidomain::prompts
