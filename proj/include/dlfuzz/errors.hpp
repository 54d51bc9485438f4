#pragma once

#include <stdexcept>
#include <string>

namespace dlfuzz {

struct NoRouteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& field, const std::string& what)
        : std::runtime_error(field + ": " + what), field(field) {}
    std::string field;
};

struct UnknownAgentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InsufficientHistoryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonUniformSamplingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct WindowOutOfRangeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CollidedObservationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateTrajectoriesError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoFeasibleCandidateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InitExhaustedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyCorpusError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dlfuzz
