#include "config.hpp"

#include <boost/property_tree/ini_parser.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace flatvp::cli {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if(b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// Line of each key, mirroring the section/key syntax the INI reader accepts.
std::map<std::string, int> index_lines(const std::string& text)
{
    std::map<std::string, int> out;
    std::istringstream in(text);
    std::string line, section;
    int no = 0;
    while(std::getline(in, line)) {
        ++no;
        const std::string t = trim(line);
        if(t.empty() || t[0] == ';' || t[0] == '#') continue;
        if(t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if(eq == std::string::npos) continue;
        out[section.empty() ? trim(t.substr(0, eq)) : section + "." + trim(t.substr(0, eq))] = no;
    }
    return out;
}

}  // namespace

Config Config::from_string(const std::string& text, const std::string& name)
{
    Config c;
    c.name_ = name;
    std::istringstream in(text);
    try {
        pt::read_ini(in, c.tree_);
    } catch(const pt::ini_parser_error& e) {
        throw ConfigError(name + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    c.lines_ = index_lines(text);
    return c;
}

Config Config::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if(!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    Config c = from_string(ss.str(), path.string());
    c.dir_ = path.parent_path();
    return c;
}

void Config::fail(const std::string& section, const std::string& key, const std::string& msg) const
{
    const auto it = lines_.find(section + "." + key);
    const std::string where = it == lines_.end() ? name_ : name_ + ":" + std::to_string(it->second);
    throw ConfigError(where + ": [" + section + "] " + key + ": " + msg);
}

bool Config::has(const std::string& section, const std::string& key) const
{
    return static_cast<bool>(tree_.get_child_optional(pt::ptree::path_type(section + "." + key, '.')));
}

bool Config::has_section(const std::string& section) const
{
    return static_cast<bool>(tree_.get_child_optional(section));
}

std::string Config::str(const std::string& section, const std::string& key) const
{
    if(!has(section, key)) fail(section, key, "missing required field");
    return trim(tree_.get<std::string>(section + "." + key));
}

std::string Config::str(const std::string& section, const std::string& key, const std::string& fallback) const
{
    return has(section, key) ? str(section, key) : fallback;
}

double Config::num(const std::string& section, const std::string& key) const
{
    const std::string s = str(section, key);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if(s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
        fail(section, key, "expected a finite number, got '" + s + "'");
    return v;
}

double Config::num(const std::string& section, const std::string& key, double fallback) const
{
    return has(section, key) ? num(section, key) : fallback;
}

std::optional<double> Config::maybe_num(const std::string& section, const std::string& key) const
{
    if(!has(section, key)) return std::nullopt;
    return num(section, key);
}

std::uint64_t Config::count(const std::string& section, const std::string& key, std::uint64_t fallback) const
{
    if(!has(section, key)) return fallback;
    const std::string s = str(section, key);
    if(s.empty() || !std::all_of(s.begin(), s.end(), [](char ch) { return ch >= '0' && ch <= '9'; }))
        fail(section, key, "expected a non-negative integer, got '" + s + "'");
    errno = 0;
    const unsigned long long v = std::strtoull(s.c_str(), nullptr, 10);
    if(errno == ERANGE) fail(section, key, "integer out of range");
    return v;
}

bool Config::flag(const std::string& section, const std::string& key, bool fallback) const
{
    if(!has(section, key)) return fallback;
    const std::string s = str(section, key);
    if(s == "true" || s == "1" || s == "yes") return true;
    if(s == "false" || s == "0" || s == "no") return false;
    fail(section, key, "expected true or false, got '" + s + "'");
}

std::filesystem::path Config::path(const std::string& section, const std::string& key) const
{
    std::filesystem::path p = str(section, key);
    return p.is_absolute() || dir_.empty() ? p : dir_ / p;
}

void Config::require_known(const std::string& section, std::initializer_list<const char*> allowed) const
{
    const auto child = tree_.get_child_optional(section);
    if(!child) return;
    for(const auto& kv : *child) {
        const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return kv.first == a; });
        if(!ok) fail(section, kv.first, "unknown field");
    }
}

std::string Config::hash() const
{
    std::vector<std::string> pairs;
    for(const auto& sec : tree_) {
        if(sec.second.empty()) {
            pairs.push_back(sec.first + "=" + trim(sec.second.data()));
            continue;
        }
        for(const auto& kv : sec.second) pairs.push_back(sec.first + "." + kv.first + "=" + trim(kv.second.data()));
    }
    std::sort(pairs.begin(), pairs.end());
    std::uint64_t h = 1469598103934665603ULL;
    for(const auto& p : pairs) {
        for(unsigned char b : p + "\n") {
            h ^= b;
            h *= 1099511628211ULL;
        }
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace flatvp::cli
