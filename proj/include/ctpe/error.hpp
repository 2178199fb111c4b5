#pragma once

#include <stdexcept>
#include <string>

namespace ctpe {

// Error categories map onto CLI exit codes: config=2, data=3, internal=4.
enum class ErrorKind { config, data, internal };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};

struct DataError : Error {
    explicit DataError(const std::string& w) : Error(ErrorKind::data, w) {}
};

struct InternalError : Error {
    explicit InternalError(const std::string& w) : Error(ErrorKind::internal, w) {}
};

// corpus
struct ParseError : DataError {
    ParseError(const std::string& w, std::size_t line)
        : DataError(w + " (line " + std::to_string(line) + ")"), line_number(line) {}
    std::size_t line_number;
};
struct DuplicateId : DataError {
    explicit DuplicateId(const std::string& id) : DataError("duplicate document id: " + id) {}
};
struct EmptySide : DataError {
    explicit EmptySide(const std::string& w) : DataError(w) {}
};
struct UnknownBoundary : ConfigError {
    explicit UnknownBoundary(const std::string& w) : ConfigError(w) {}
};

// embedding
struct DimMismatch : DataError {
    explicit DimMismatch(const std::string& w) : DataError(w) {}
};
struct AllTokensOOV : DataError {
    explicit AllTokensOOV(const std::string& w) : DataError(w) {}
};
struct UnknownId : DataError {
    explicit UnknownId(const std::string& id) : DataError("unknown document id: " + id) {}
};

// encoder
struct SequenceTooShort : DataError {
    explicit SequenceTooShort(const std::string& w) : DataError(w) {}
};
struct TraceMismatch : InternalError {
    explicit TraceMismatch(const std::string& w) : InternalError(w) {}
};
struct ZeroVector : DataError {
    explicit ZeroVector(const std::string& w) : DataError(w) {}
};

// trainer
struct ShapeMismatch : InternalError {
    explicit ShapeMismatch(const std::string& w) : InternalError(w) {}
};
struct CorpusTooSmall : DataError {
    explicit CorpusTooSmall(const std::string& w) : DataError(w) {}
};

// representation / retrieval
struct FingerprintMismatch : DataError {
    explicit FingerprintMismatch(const std::string& w) : DataError(w) {}
};

// evaluation
struct EmptyJudgments : DataError {
    explicit EmptyJudgments(const std::string& w) : DataError(w) {}
};
struct UnknownQuery : DataError {
    explicit UnknownQuery(const std::string& id) : DataError("query not in judgments: " + id) {}
};
struct MalformedRun : DataError {
    explicit MalformedRun(const std::string& w) : DataError(w) {}
};

}  // namespace ctpe
