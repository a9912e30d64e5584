#pragma once

#include <stdexcept>
#include <string>

namespace skelscreen {

// Error families. The CLI maps these 1:1 onto process exit codes, so each
// family must keep its numeric value stable.
enum class ErrorCode : int {
    ok = 0,
    usage = 2,
    missing_file = 3,
    bad_format = 4,
    bad_value = 5,
    size_mismatch = 6,
    dimension_mismatch = 7,
    underdetermined = 8,
    model_format = 9,
    model_version = 10,
    infeasible_spec = 11,
    stage_failure = 12,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    int exit_code() const noexcept { return static_cast<int>(code_); }

private:
    ErrorCode code_;
};

} // namespace skelscreen
