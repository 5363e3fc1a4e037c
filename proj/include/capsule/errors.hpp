#pragma once

#include <stdexcept>
#include <string>

namespace capsule {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Policy text did not parse. Carries the source position.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line, int col)
        : Error(what + " at line " + std::to_string(line) + ", col " +
                std::to_string(col)),
          line(line),
          col(col) {}
    int line;
    int col;
};

// Predicate arity or term type mismatch.
class TypeError : public Error {
public:
    explicit TypeError(const std::string& what) : Error(what) {}
};

class SignatureError : public Error {
public:
    explicit SignatureError(const std::string& what) : Error(what) {}
};

// MAC failure or mutated protocol message.
class TamperError : public Error {
public:
    explicit TamperError(const std::string& what) : Error(what) {}
};

// Stale counter binding or reused nonce.
class ReplayError : public Error {
public:
    explicit ReplayError(const std::string& what) : Error(what) {}
};

// Unknown operation, bad arguments, and similar caller mistakes that are
// distinct from a policy denial.
class InvocationError : public Error {
public:
    explicit InvocationError(const std::string& what) : Error(what) {}
};

// Error raised by a data layer while executing a granted invocation.
class DataLayerError : public Error {
public:
    explicit DataLayerError(const std::string& what) : Error(what) {}
};

}  // namespace capsule
