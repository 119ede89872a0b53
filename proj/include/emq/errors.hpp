#pragma once

#include <stdexcept>
#include <string>

namespace emq {

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

struct VersionError : std::runtime_error {
    explicit VersionError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InfeasibleError : std::runtime_error {
    explicit InfeasibleError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace emq
