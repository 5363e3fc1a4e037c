#pragma once

#include <string_view>

#include "capsule/policy/engine.hpp"
#include "capsule/policy/parser.hpp"
#include "support/testkeys.hpp"

namespace testsupport {

inline capsule::policy::Assertion signed_assertion(const capsule::crypto::SigningKey& key,
                                                   std::string_view line) {
    auto a = capsule::policy::parse_assertion(line);
    capsule::policy::sign_assertion(a, key);
    return a;
}

inline capsule::policy::Predicate pred(std::string name,
                                       std::vector<capsule::policy::Term> args) {
    return capsule::policy::Predicate{std::move(name), std::move(args)};
}

}  // namespace testsupport
