#pragma once

#include <stdexcept>
#include <string>

namespace ctf {

// Error taxonomy shared by the library and the CLI. Exit codes:
// 0 success, 2 usage, 3 input validation, 4 feasibility/budget,
// 5 internal invariant violation.
enum class ErrorClass {
    Usage = 2,
    Validation = 3,
    Feasibility = 4,
    Internal = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, std::string msg)
        : std::runtime_error(std::move(msg)), cls_(cls) {}
    ErrorClass error_class() const { return cls_; }
    int exit_code() const { return static_cast<int>(cls_); }

private:
    ErrorClass cls_;
};

struct UsageError : Error {
    explicit UsageError(std::string msg) : Error(ErrorClass::Usage, std::move(msg)) {}
};

struct ValidationError : Error {
    explicit ValidationError(std::string msg) : Error(ErrorClass::Validation, std::move(msg)) {}
};

struct FeasibilityError : Error {
    explicit FeasibilityError(std::string msg) : Error(ErrorClass::Feasibility, std::move(msg)) {}
};

struct InternalError : Error {
    explicit InternalError(std::string msg) : Error(ErrorClass::Internal, std::move(msg)) {}
};

}  // namespace ctf
