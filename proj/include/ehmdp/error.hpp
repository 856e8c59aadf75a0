#pragma once

#include <stdexcept>
#include <string>

namespace ehmdp {

/// Error with a short machine-readable class tag ("config", "lp_infeasible", ...).
/// The CLI prints the tag as the first token of its one-line error report.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

} // namespace ehmdp
