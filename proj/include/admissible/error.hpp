#pragma once

#include <stdexcept>
#include <string>

namespace admissible {

/// Error categories surfaced by the library. The CLI maps every kind to exit
/// code 2 and the service maps them onto HTTP statuses.
enum class ErrorKind {
    Io,               // unreadable or unwritable file
    DuplicateHeader,  // two CSV columns share a name
    RaggedRow,        // CSV row with the wrong number of cells
    Parse,            // malformed value or JSON document
    Schema,           // missing column, wrong kind, role overlap
    InvalidArgument,  // parameter out of its domain
    Degenerate,       // target with a single class, all-zero inputs
    Separation,       // logistic MLE does not exist
    Undefined,        // statistic undefined for the data (e.g. zero reference rate)
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace admissible
