#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace mtkit {

// Lower-case hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

std::string sha256_file_hex(const std::filesystem::path& path);

// 128 bits from the OS entropy source, hex encoded.
std::string random_token();

}  // namespace mtkit
