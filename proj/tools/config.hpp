#pragma once
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

namespace flatvp::cli {

/// Unparseable file, missing or malformed field (exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// INI file with one section per command. Numbers are parsed strictly and
/// every error names the file, line, section and key.
class Config {
public:
    static Config load(const std::filesystem::path& path);
    static Config from_string(const std::string& text, const std::string& name = "<config>");

    bool has(const std::string& section, const std::string& key) const;
    bool has_section(const std::string& section) const;

    std::string str(const std::string& section, const std::string& key) const;
    std::string str(const std::string& section, const std::string& key, const std::string& fallback) const;
    double num(const std::string& section, const std::string& key) const;
    double num(const std::string& section, const std::string& key, double fallback) const;
    std::optional<double> maybe_num(const std::string& section, const std::string& key) const;
    std::uint64_t count(const std::string& section, const std::string& key, std::uint64_t fallback) const;
    bool flag(const std::string& section, const std::string& key, bool fallback) const;
    /// Path relative to the directory of the config file.
    std::filesystem::path path(const std::string& section, const std::string& key) const;

    /// Rejects keys outside `allowed` in `section`.
    void require_known(const std::string& section, std::initializer_list<const char*> allowed) const;

    /// FNV-1a over the sorted section.key=value pairs.
    std::string hash() const;

    [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& msg) const;

private:
    boost::property_tree::ptree tree_;
    std::map<std::string, int> lines_;   // "section.key" -> line
    std::string name_;
    std::filesystem::path dir_;
};

}  // namespace flatvp::cli
