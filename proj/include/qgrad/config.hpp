// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qgrad/sim.hpp"

namespace qgrad {

inline constexpr std::string_view kVersion = "0.1.0";

/// Parse failure with the 1-based line number of the offending input.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Flat `key = value` text. Blank lines and lines starting with '#' are
/// ignored; a repeated key keeps the last value.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& in, const std::string& source);
KeyValues read_key_values_file(const std::string& path);

/// Known SimConfig keys, in manifest order.
const std::vector<std::string>& sim_config_keys();

/// Applies entries onto cfg. Throws std::invalid_argument listing every
/// unknown key, or naming the key whose value does not parse.
void apply_key_values(SimConfig& cfg, const KeyValues& kv);

/// Every SimConfig field as key = value lines; parsing the output with
/// apply_key_values reproduces cfg exactly.
std::string to_key_values(const SimConfig& cfg);

/// Run manifest: header comments (command, version, timestamp) followed by
/// the resolved configuration. The comment lines are ignored on replay.
struct RunManifest {
  std::string command;
  KeyValues config;
  std::uint64_t seed = 0;
  std::string timestamp;
  std::vector<std::pair<std::string, std::string>> notes;  // extra header comments
};
void write_manifest(std::ostream& out, const RunManifest& m);
std::string utc_timestamp();

/// Shortest of 15, 16 or 17 significant digits that round-trips.
std::string format_double(double v);

}  // namespace qgrad
