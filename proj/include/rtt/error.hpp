#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rtt {

/// Source position, 1-based. A zero line means "unknown".
struct SourcePos {
    int line = 0;
    int column = 0;
};

std::string to_string(const SourcePos& pos);

/// Base for all errors raised by the toolchain.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Syntax or structural error in an input text, carrying its position.
class ParseError : public Error {
public:
    ParseError(SourcePos pos, const std::string& message);
    SourcePos pos() const { return pos_; }
    const std::string& message() const { return message_; }

private:
    SourcePos pos_;
    std::string message_;
};

class TypeError : public Error {
public:
    using Error::Error;
};

/// Raised while executing a reactive system (range violations, bad inputs).
class RuntimeError : public Error {
public:
    using Error::Error;
};

struct Diagnostic {
    SourcePos pos;
    std::string message;
};

std::string to_string(const Diagnostic& d);

} // namespace rtt
