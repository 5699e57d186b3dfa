#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

namespace curvebind {

// JSON writer that serializes every floating-point number with 17
// significant digits (lossless f64 round-trip, auditable determinism).
// Object keys come out in nlohmann's sorted order.
void dump_json_g17(std::ostream& out, const nlohmann::json& j, int indent = 0, int depth = 0);
std::string json_g17(const nlohmann::json& j, int indent = 0);

std::string format_g17(double v);

nlohmann::json parse_json_file(const std::string& path); // IoError / ParseError
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

} // namespace curvebind
