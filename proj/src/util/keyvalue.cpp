#include "mrfusion/util/keyvalue.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mrfusion/util/errors.hpp"

namespace mrfusion::io {

void KeyValueFile::set(const std::string& key, const std::string& value) {
    if (key.empty() || key.find('=') != std::string::npos || key.find('\n') != std::string::npos)
        throw FormatError("invalid key: " + key);
    if (value.find('\n') != std::string::npos) throw FormatError("value for " + key + " spans lines");
    auto it = index_.find(key);
    if (it != index_.end()) {
        items_[it->second].second = value;
    } else {
        index_.emplace(key, items_.size());
        items_.emplace_back(key, value);
    }
}

bool KeyValueFile::has(const std::string& key) const { return index_.count(key) != 0; }

const std::string& KeyValueFile::get(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) throw FormatError(origin_ + ": missing key '" + key + "'");
    return items_[it->second].second;
}

std::string KeyValueFile::get_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? get(key) : fallback;
}

long long KeyValueFile::get_int(const std::string& key) const {
    const auto& v = get(key);
    try {
        std::size_t pos = 0;
        long long r = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw FormatError(origin_ + ": key '" + key + "' is not an integer: " + v);
    }
}

double KeyValueFile::get_double(const std::string& key) const {
    const auto& v = get(key);
    try {
        std::size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw FormatError(origin_ + ": key '" + key + "' is not a number: " + v);
    }
}

KeyValueFile KeyValueFile::read(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    KeyValueFile kv;
    kv.origin_ = path;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0)
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected key=value");
        kv.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return kv;
}

void KeyValueFile::write(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    for (const auto& [k, v] : items_) os << k << '=' << v << '\n';
    if (!os) throw IoError("failed writing " + path);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    if (s.empty()) return out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (s.back() == sep) out.emplace_back();
    return out;
}

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string resolve_relative(const std::string& anchor_file, const std::string& path) {
    std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    return (std::filesystem::path(anchor_file).parent_path() / p).lexically_normal().string();
}

}  // namespace mrfusion::io
