#include "curvebind/jsonio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "curvebind/errors.hpp"

namespace curvebind {

std::string format_g17(double v) {
    if (std::isnan(v)) return "null";
    if (std::isinf(v)) return v > 0 ? "1e999" : "-1e999";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {
void indent_to(std::ostream& out, int indent, int depth) {
    if (indent <= 0) return;
    out << '\n';
    for (int i = 0; i < indent * depth; ++i) out << ' ';
}
} // namespace

void dump_json_g17(std::ostream& out, const nlohmann::json& j, int indent, int depth) {
    using value_t = nlohmann::json::value_t;
    switch (j.type()) {
        case value_t::object: {
            out << '{';
            bool first = true;
            for (auto it = j.cbegin(); it != j.cend(); ++it) {
                if (!first) out << ',';
                first = false;
                indent_to(out, indent, depth + 1);
                out << nlohmann::json(it.key()).dump() << (indent > 0 ? ": " : ":");
                dump_json_g17(out, it.value(), indent, depth + 1);
            }
            if (!first) indent_to(out, indent, depth);
            out << '}';
            break;
        }
        case value_t::array: {
            out << '[';
            bool first = true;
            for (const auto& v : j) {
                if (!first) out << ',';
                first = false;
                indent_to(out, indent, depth + 1);
                dump_json_g17(out, v, indent, depth + 1);
            }
            if (!first) indent_to(out, indent, depth);
            out << ']';
            break;
        }
        case value_t::number_float:
            out << format_g17(j.get<double>());
            break;
        default:
            out << j.dump();
            break;
    }
}

std::string json_g17(const nlohmann::json& j, int indent) {
    std::ostringstream ss;
    dump_json_g17(ss, j, indent, 0);
    ss << '\n';
    return ss.str();
}

nlohmann::json parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace curvebind
