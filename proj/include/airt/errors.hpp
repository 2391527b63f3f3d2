#pragma once

#include <stdexcept>
#include <string>

namespace airt {

// Exit-code classes used by the CLI: 2=format, 3=numeric, 4=transport.
struct format_error : std::runtime_error {
    explicit format_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct transport_error : std::runtime_error {
    explicit transport_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed response from a detection backend; carries the raw payload.
struct protocol_error : std::runtime_error {
    std::string payload;
    protocol_error(const std::string& msg, std::string raw = {})
        : std::runtime_error(msg), payload(std::move(raw)) {}
};

}  // namespace airt
