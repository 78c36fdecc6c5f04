// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace scgan {

// Invalid user input: bad config values, malformed files, contract
// violations at the API boundary. Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Everything that goes wrong after inputs were accepted (I/O failures,
// numeric breakdown, missing artifacts). Maps to CLI exit code 2.
class RuntimeFailure : public std::runtime_error {
public:
    explicit RuntimeFailure(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values showed up mid-computation. The training loop converts
// this into an aborted, rolled-back step instead of a run failure.
class NonFiniteError : public RuntimeFailure {
public:
    explicit NonFiniteError(const std::string& msg) : RuntimeFailure(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ConfigError(msg);
}

}  // namespace scgan
