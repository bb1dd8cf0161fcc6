#pragma once

#include <stdexcept>
#include <string>

namespace fedsim {

// CLI exit codes: 0 success, 1 usage error, 2 numeric divergence, 3 I/O error.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const NumericError*>(&e)) return 2;
    if (dynamic_cast<const IoError*>(&e)) return 3;
    return 1;
}

} // namespace fedsim
