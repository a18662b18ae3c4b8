#pragma once

#include <string>
#include <vector>

#include "rmn/data.hpp"

namespace rmn {

// Writes to "<path>.tmp" and renames over path.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace rmn
