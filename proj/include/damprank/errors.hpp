#pragma once

#include <stdexcept>
#include <string>

namespace damprank {

/// Malformed or unreadable input data (files, graph structure).
class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure: non-convergence, step caps, resource guards.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace damprank
