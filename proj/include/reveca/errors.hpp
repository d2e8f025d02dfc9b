#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace reveca {

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct KernelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Transport failure after all retries were spent.
struct ReasonerUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Reply did not match the kind's grammar, even after the reprompt.
struct ParseFailure : std::runtime_error {
    explicit ParseFailure(const std::string& what, std::string raw = {})
        : std::runtime_error(what), raw_text(std::move(raw)) {}
    std::string raw_text;  // last reply seen, kept so fixtures can replay the failure
};

struct FixtureMiss : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MessageOverflow : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SchemaMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace reveca
