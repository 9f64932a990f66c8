#pragma once

#include <stdexcept>
#include <string>

namespace simex {

// Error categories surfaced at the CLI boundary with distinct exit codes.
struct domain_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct contract_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct training_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct insufficient_failures_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct degenerate_cluster_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct unsatisfiable_expression_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace simex
