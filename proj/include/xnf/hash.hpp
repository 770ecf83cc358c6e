#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace xnf {

// Hex SHA-1 of "blob <size>\0<content>", i.e. what `git hash-object` prints.
std::string git_blob_hash(std::string_view content);

std::uint64_t fnv1a64(std::string_view data);

}  // namespace xnf
