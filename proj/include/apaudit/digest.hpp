#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace apaudit {

/// Lower-case hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

/// First 64 bits of a hex digest, big-endian. Used to derive RNG seeds.
std::uint64_t digest_prefix_u64(std::string_view hex_digest);

}  // namespace apaudit
