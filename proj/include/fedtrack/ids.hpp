#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>

namespace fedtrack {

using RoundIndex = std::int32_t;

/// A client in the federation roster. The index is 0-based and stable for
/// the lifetime of a scenario; the display name follows the C1..Cn convention
/// (index 0 is "C1").
struct ClientId {
    std::uint32_t index = 0;

    auto operator<=>(const ClientId&) const = default;

    std::string name() const { return "C" + std::to_string(index + 1); }

    /// Parses "C3" (1-based) back into a ClientId. Returns nullopt on malformed input.
    static std::optional<ClientId> from_name(const std::string& text);
};

} // namespace fedtrack
