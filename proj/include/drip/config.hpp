#ifndef DRIP_CONFIG_HPP
#define DRIP_CONFIG_HPP

// Experiment configs are TOML on disk (JSON also accepted).  The reader below
// covers the TOML subset used by the configs in this project: [table] and
// [a.b] headers, `key = value` pairs with string/bool/integer/float/array
// values, and `#` comments.

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "drip/common.hpp"

namespace drip {

using Json = nlohmann::json;

namespace detail {

inline std::string strip(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Removes a trailing comment that is not inside a string literal.
inline std::string strip_comment(const std::string& line) {
    bool in_str = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (c == '"') in_str = !in_str;
        if (c == '#' && !in_str) return line.substr(0, i);
    }
    return line;
}

inline Json parse_toml_scalar(const std::string& raw);

inline Json parse_toml_array(const std::string& raw) {
    Json arr = Json::array();
    std::string body = strip(raw.substr(1, raw.size() - 2));
    if (body.empty()) return arr;
    std::vector<std::string> items;
    int depth = 0;
    bool in_str = false;
    std::string cur;
    for (char c : body) {
        if (c == '"') in_str = !in_str;
        if (!in_str) {
            if (c == '[') ++depth;
            if (c == ']') --depth;
            if (c == ',' && depth == 0) {
                items.push_back(cur);
                cur.clear();
                continue;
            }
        }
        cur += c;
    }
    if (!strip(cur).empty()) items.push_back(cur);
    for (const auto& it : items) arr.push_back(parse_toml_scalar(strip(it)));
    return arr;
}

inline Json parse_toml_scalar(const std::string& raw) {
    if (raw.empty()) throw std::invalid_argument("toml: empty value");
    if (raw.front() == '[') return parse_toml_array(raw);
    if (raw.front() == '"') {
        if (raw.size() < 2 || raw.back() != '"')
            throw std::invalid_argument("toml: unterminated string: " + raw);
        std::string out;
        for (size_t i = 1; i + 1 < raw.size(); ++i) {
            char c = raw[i];
            if (c == '\\' && i + 2 < raw.size()) {
                char e = raw[++i];
                switch (e) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default: out += e;
                }
            } else {
                out += c;
            }
        }
        return out;
    }
    if (raw == "true") return true;
    if (raw == "false") return false;
    // number: integer when it round-trips as one, float otherwise
    try {
        size_t pos = 0;
        if (raw.find_first_of(".eE") == std::string::npos) {
            long long v = std::stoll(raw, &pos);
            if (pos == raw.size()) return v;
        }
        double d = std::stod(raw, &pos);
        if (pos == raw.size()) return d;
    } catch (const std::exception&) {
    }
    throw std::invalid_argument("toml: cannot parse value: " + raw);
}

inline Json* descend(Json& root, const std::string& dotted) {
    Json* node = &root;
    std::stringstream ss(dotted);
    std::string part;
    while (std::getline(ss, part, '.')) {
        part = strip(part);
        if (part.empty()) throw std::invalid_argument("toml: bad table path: " + dotted);
        node = &(*node)[part];
    }
    return node;
}

} // namespace detail

inline Json parse_toml(const std::string& text) {
    Json root = Json::object();
    Json* table = &root;
    std::istringstream in(text);
    std::string line;
    std::string pending;
    while (std::getline(in, line)) {
        line = detail::strip(detail::strip_comment(line));
        if (!pending.empty()) {
            line = pending + " " + line;
            pending.clear();
        }
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw std::invalid_argument("toml: bad table header: " + line);
            std::string name = detail::strip(line.substr(1, line.size() - 2));
            table = detail::descend(root, name);
            if (!table->is_object() && !table->is_null())
                throw std::invalid_argument("toml: table redefines value: " + name);
            if (table->is_null()) *table = Json::object();
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("toml: expected key = value: " + line);
        std::string key = detail::strip(line.substr(0, eq));
        std::string val = detail::strip(line.substr(eq + 1));
        // multi-line array: carry over until brackets balance
        long depth = 0;
        for (char c : val) depth += (c == '[') - (c == ']');
        if (depth > 0) {
            pending = line;
            continue;
        }
        *detail::descend(*table, key) = detail::parse_toml_scalar(val);
    }
    if (!pending.empty()) throw std::invalid_argument("toml: unterminated array");
    return root;
}

// Loads a config file; dispatches on extension, sniffing the content when the
// extension is unknown.
inline Json load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string text = ss.str();
    auto ends_with = [&](const char* suf) {
        std::string s(suf);
        return path.size() >= s.size() && path.compare(path.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with(".json")) return Json::parse(text);
    if (ends_with(".toml")) return parse_toml(text);
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        return c == '{' ? Json::parse(text) : parse_toml(text);
    }
    return Json::object();
}

} // namespace drip

#endif
