#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dtmnav {

/// Full-string parse; rejects trailing garbage.
std::optional<double> parse_double(std::string_view s);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);
void append_double(std::string& out, double v);

std::vector<std::string_view> split_whitespace(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

std::string read_text_file(const std::filesystem::path& path);
/// Writes with LF line endings exactly as given. Throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Ordered `key = value` records; '#' starts a comment line.
class KeyValueFile {
public:
    static KeyValueFile parse(const std::string& text);
    static KeyValueFile load(const std::filesystem::path& path);

    void set(const std::string& key, std::string value);
    bool has(const std::string& key) const { return values_.count(key) != 0; }
    /// Throws ParseError when missing.
    const std::string& get(const std::string& key) const;
    std::vector<double> numbers(const std::string& key) const;
    double number(const std::string& key) const;
    const std::map<std::string, std::string>& values() const { return values_; }
    std::string str() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace dtmnav
