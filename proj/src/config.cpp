#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "flatmin/error.hpp"
#include "flatmin/harness.hpp"

namespace flatmin {

namespace {

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

// Runs of whitespace collapse to one space so arrays print canonically.
std::string normalize_value(std::string_view s) {
    std::istringstream in{std::string(s)};
    std::string word, out;
    while (in >> word) {
        if (!out.empty()) out += ' ';
        out += word;
    }
    return out;
}

bool valid_key(std::string_view key) {
    if (key.empty()) return false;
    for (char c : key)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.' && c != '-') return false;
    return true;
}

}  // namespace

double parse_real(const std::string& text) {
    const std::string t = trim(text);
    double v = 0.0;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    if (!t.empty() && *first == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (t.empty() || res.ec != std::errc() || res.ptr != last)
        throw Error(ErrorKind::invalid_parameter, "not a real number: '" + text + "'");
    return v;
}

Config Config::parse(std::string_view text) {
    Config c;
    std::size_t line_no = 0, pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const std::string content = trim(line);
        if (content.empty()) {
            if (end == text.size()) break;
            continue;
        }
        const std::size_t eq = content.find('=');
        const std::string where = "config line " + std::to_string(line_no);
        if (eq == std::string::npos) throw Error(ErrorKind::usage, where + ": expected key = value");
        const std::string key = trim(std::string_view(content).substr(0, eq));
        if (!valid_key(key)) throw Error(ErrorKind::usage, where + ": invalid key '" + key + "'");
        if (c.entries_.count(key)) throw Error(ErrorKind::usage, where + ": duplicate key '" + key + "'");
        c.entries_[key] = normalize_value(std::string_view(content).substr(eq + 1));
        if (end == text.size()) break;
    }
    return c;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot read config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string Config::print() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
}

std::optional<std::string> Config::get(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::string Config::get_or(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    try {
        return parse_real(*v);
    } catch (const Error&) {
        throw Error(ErrorKind::usage, "config key '" + key + "' expects a real, got '" + *v + "'");
    }
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    std::int64_t out = 0;
    const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
    if (v->empty() || res.ec != std::errc() || res.ptr != v->data() + v->size())
        throw Error(ErrorKind::usage, "config key '" + key + "' expects an integer, got '" + *v + "'");
    return out;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw Error(ErrorKind::usage, "config key '" + key + "' expects true or false, got '" + *v + "'");
}

std::vector<double> Config::get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& w : get_words(key)) {
        try {
            out.push_back(parse_real(w));
        } catch (const Error&) {
            throw Error(ErrorKind::usage, "config key '" + key + "' expects reals, got '" + w + "'");
        }
    }
    return out;
}

std::vector<std::string> Config::get_words(const std::string& key) const {
    std::vector<std::string> out;
    std::istringstream in(get_or(key, ""));
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

void Config::set(const std::string& key, const std::string& value) {
    if (!valid_key(key)) throw Error(ErrorKind::invalid_parameter, "invalid config key '" + key + "'");
    if (value.find('#') != std::string::npos || value.find('\n') != std::string::npos)
        throw Error(ErrorKind::invalid_parameter, "config values cannot contain '#' or newlines");
    entries_[key] = normalize_value(value);
}

void Config::set(const std::string& key, double value) { set(key, format_number(value)); }

void Config::set(const std::string& key, std::span<const double> values) {
    std::string s;
    for (double v : values) {
        if (!s.empty()) s += ' ';
        s += format_number(v);
    }
    set(key, s);
}

}  // namespace flatmin
