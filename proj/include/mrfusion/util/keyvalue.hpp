#pragma once

#include <concepts>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace mrfusion::io {

/// Ordered `key=value` text document; blank lines and `#` comments are
/// ignored on read.
class KeyValueFile {
public:
    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, const char* value) { set(key, std::string(value)); }
    template <std::integral V>
    void set(const std::string& key, V value) {
        set(key, std::to_string(value));
    }

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;  // throws FormatError when absent
    std::string get_or(const std::string& key, const std::string& fallback) const;
    long long get_int(const std::string& key) const;
    double get_double(const std::string& key) const;

    const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

    static KeyValueFile read(const std::string& path);
    void write(const std::string& path) const;

private:
    std::vector<std::pair<std::string, std::string>> items_;
    std::map<std::string, std::size_t> index_;
    std::string origin_ = "<memory>";
};

std::vector<std::string> split(const std::string& s, char sep);
std::string join(const std::vector<std::string>& parts, char sep);

/// Round-trippable decimal form (17 significant digits).
std::string format_double(double v);

/// Resolves `path` against the directory containing `anchor_file` unless it
/// is already absolute.
std::string resolve_relative(const std::string& anchor_file, const std::string& path);

}  // namespace mrfusion::io
