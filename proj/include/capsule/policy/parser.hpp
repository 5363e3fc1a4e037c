#pragma once

#include <string_view>

#include "capsule/policy/ast.hpp"

namespace capsule::policy {

// Parses UTF-8 policy text, one assertion per line with `\` continuation
// and `#` comments. The returned assertions are unsigned (pending
// signature). Throws ParseError or TypeError.
PolicyDatabase parse_policy(std::string_view text);

// Parses a single assertion.
Assertion parse_assertion(std::string_view line);

}  // namespace capsule::policy
