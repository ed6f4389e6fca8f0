#pragma once

// Prompt templates. Slots are written `{{name}}`; rendering fails on unknown
// templates and on unfilled or unused slots so a template edit cannot drift
// silently from its call site. Any change to template text changes request
// digests, so recorded transcripts have to be re-authored with it.

#include <map>
#include <string>
#include <vector>

namespace unidomain::prompts {

inline constexpr const char *kVersion = "v1";

using Slots = std::map<std::string, std::string>;

/// Names of all templates, sorted.
std::vector<std::string> names();
const std::string &raw(const std::string &name);
std::string render(const std::string &name, const Slots &slots);

} // namespace unidomain::prompts
