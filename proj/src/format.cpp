#include "dtmnav/format.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "dtmnav/errors.hpp"

namespace dtmnav {

std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

void append_double(std::string& out, double v) {
    if (v == 0.0) v = 0.0;  // drop negative zero
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
}

std::string format_double(double v) {
    std::string s;
    append_double(s, v);
    return s;
}

std::vector<std::string_view> split_whitespace(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < s.size() && !(s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NavError(ErrorCode::IoError, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw NavError(ErrorCode::IoError, "cannot write '" + path.string() + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw NavError(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

KeyValueFile KeyValueFile::parse(const std::string& text) {
    KeyValueFile kv;
    int line_no = 0;
    for (std::string_view line : split(text, '\n')) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw NavError(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key(trim(line.substr(0, eq)));
        if (key.empty()) throw NavError(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": empty key");
        kv.values_[key] = std::string(trim(line.substr(eq + 1)));
    }
    return kv;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) { return parse(read_text_file(path)); }

void KeyValueFile::set(const std::string& key, std::string value) { values_[key] = std::move(value); }

const std::string& KeyValueFile::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw NavError(ErrorCode::ParseError, "missing key '" + key + "'");
    return it->second;
}

std::vector<double> KeyValueFile::numbers(const std::string& key) const {
    std::vector<double> out;
    for (std::string_view tok : split_whitespace(get(key))) {
        const auto v = parse_double(tok);
        if (!v) throw NavError(ErrorCode::ParseError, "key '" + key + "': bad number '" + std::string(tok) + "'");
        out.push_back(*v);
    }
    return out;
}

double KeyValueFile::number(const std::string& key) const {
    const auto v = numbers(key);
    if (v.size() != 1) throw NavError(ErrorCode::ParseError, "key '" + key + "' expects one number");
    return v[0];
}

std::string KeyValueFile::str() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

}  // namespace dtmnav
