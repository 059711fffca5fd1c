#pragma once

#include <stdexcept>
#include <string>

namespace ag {

// Input files (TSV, prior-target triplets, checkpoints, configs) that fail to parse.
struct parse_error : std::runtime_error {
    explicit parse_error(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values, failed convergence, and similar arithmetic breakdowns.
struct numerical_error : std::runtime_error {
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

struct io_error : std::runtime_error {
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ag
