#pragma once

// Helpers shared by the stages that talk to the LLM oracle. Internal to the
// library; not installed.

#include "unidomain/oracle.hpp"
#include "unidomain/pddl.hpp"
#include "unidomain/prompts.hpp"

#include <cctype>
#include <string>
#include <vector>

namespace unidomain::detail {

inline std::string join(const std::vector<std::string> &items, const std::string &sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i)
        out += (i ? sep : "") + items[i];
    return out;
}

inline std::string sanitize(const std::string &id) {
    std::string out;
    for (char c : id)
        out += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::tolower(c)) : '_';
    if (out.empty() || !std::isalpha(static_cast<unsigned char>(out.front())))
        out = "d_" + out;
    return out;
}

inline std::string predicate_listing(const pddl::Domain &dom) {
    if (dom.predicates.empty())
        return "(none yet)";
    std::vector<std::string> lines;
    for (const auto &p : dom.predicates)
        lines.push_back("- " + pddl::render_predicate(p));
    return join(lines, "\n");
}

inline std::string type_listing(const pddl::Domain &dom) {
    if (dom.types.empty())
        return std::string(pddl::kRootType);
    std::vector<std::string> items;
    for (const auto &t : dom.types)
        items.push_back(t.parent == pddl::kRootType ? t.name : t.name + " - " + t.parent);
    return join(items, ", ");
}

inline oracle::ChatRequest base_request(oracle::OracleSession &session) {
    oracle::ChatRequest r = session.request();
    r.messages.push_back(oracle::Message::text("system", prompts::render("system", {})));
    return r;
}

inline std::string diagnostics_text(const std::vector<Diagnostic> &diags) {
    std::vector<std::string> lines;
    for (const auto &d : diags)
        if (d.severity == Severity::error)
            lines.push_back(d.format("reply"));
    return join(lines, "\n");
}

inline std::string require_block(const std::string &reply) {
    auto block = pddl::extract_define_block(reply);
    if (!block)
        throw pddl::PddlError("the reply contains no `(define ...)` block", {});
    return *block;
}

inline std::string error_text(const std::exception &e) {
    if (const auto *pe = dynamic_cast<const pddl::PddlError *>(&e))
        return pe->diagnostic().format("reply");
    return e.what();
}

} // namespace unidomain::detail
