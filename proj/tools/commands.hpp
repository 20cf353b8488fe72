// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace qgrad::cli {

/// Entry point shared by the qgrad binary and the tests. args excludes the
/// program name. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Gradient values from a file: raw little-endian float32 when the name ends
/// in ".f32", otherwise text with one value per line ('#' starts a comment).
/// Throws ParseError with the line number for malformed text.
std::vector<float> read_values_file(const std::string& path);

void write_f32_file(const std::string& path, std::span<const float> values);

}  // namespace qgrad::cli
