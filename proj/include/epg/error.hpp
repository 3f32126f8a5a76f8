#pragma once

#include <stdexcept>
#include <string>

namespace epg {

// Base of every error thrown by the library. `kind()` is a stable,
// machine-readable tag used by the CLI when it reports errors as JSON.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct IoError : Error {
    explicit IoError(const std::string& w) : Error("io", w) {}
};
struct FormatError : Error {
    explicit FormatError(const std::string& w) : Error("format", w) {}
};
struct CorruptionError : Error {
    explicit CorruptionError(const std::string& w) : Error("corruption", w) {}
};
struct ValidationError : Error {
    explicit ValidationError(const std::string& w) : Error("validation", w) {}
};
struct DimensionError : Error {
    explicit DimensionError(const std::string& w) : Error("dimension", w) {}
};
struct ArchitectureError : Error {
    explicit ArchitectureError(const std::string& w) : Error("architecture", w) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error("config", w) {}
};
struct NumericError : Error {
    explicit NumericError(const std::string& w) : Error("numeric", w) {}
};
struct ContractError : Error {
    explicit ContractError(const std::string& w) : Error("contract", w) {}
};

}  // namespace epg
