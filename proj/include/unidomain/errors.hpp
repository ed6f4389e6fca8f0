#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace unidomain {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An error raised inside a named pipeline stage (learn, fuse, plan, ...).
class StageError : public Error {
public:
    StageError(std::string stage, const std::string &message)
        : Error("[" + stage + "] " + message), stage_(std::move(stage)), detail_(message) {}

    const std::string &stage() const { return stage_; }
    const std::string &detail() const { return detail_; }

private:
    std::string stage_;
    std::string detail_;
};

struct SourceLocation {
    std::size_t line = 0;
    std::size_t column = 0;

    bool known() const { return line != 0; }
};

enum class Severity { error, warning, note };

const char *to_string(Severity severity);

struct Diagnostic {
    Severity severity = Severity::error;
    SourceLocation location;
    std::string message;

    /// `file:line:col: severity: message`; the position is omitted when unknown
    std::string format(const std::string &file) const;
};

} // namespace unidomain
