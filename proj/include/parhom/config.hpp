#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace parhom::config {

struct ValidationError : std::runtime_error {
    std::vector<std::string> keys;
    explicit ValidationError(std::vector<std::string> bad_keys);
};

// Plain-text hierarchical config: `key = value` lines grouped under
// `[section]` headers; `#` starts a comment.  Top-level keys live in the
// unnamed section.  Serialization is canonical (sorted sections and keys), so
// parse/serialize round-trips are byte-identical on canonical input.
struct Config {
    std::map<std::string, std::map<std::string, std::string>> sections;

    bool has(const std::string& section, const std::string& key) const;
    const std::string& get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback);
    double get_double(const std::string& section, const std::string& key) const;
    double get_double_or(const std::string& section, const std::string& key, double fallback);
    long get_int(const std::string& section, const std::string& key) const;
    long get_int_or(const std::string& section, const std::string& key, long fallback);
    std::uint64_t get_seed_or(const std::string& section, const std::string& key,
                              std::uint64_t fallback);
    bool get_bool_or(const std::string& section, const std::string& key, bool fallback);
    std::vector<double> get_list(const std::string& section, const std::string& key) const;
    std::vector<double> get_list_or(const std::string& section, const std::string& key,
                                    const std::vector<double>& fallback);
    void set(const std::string& section, const std::string& key, const std::string& value);
    void set_double(const std::string& section, const std::string& key, double value);
    void set_list(const std::string& section, const std::string& key,
                  const std::vector<double>& values);

    std::string serialize() const;
    static Config parse(const std::string& text);
    static Config load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    // require() collects missing keys; call check() to raise one error naming
    // every offender.
    void require(const std::string& section, const std::string& key,
                 std::vector<std::string>& missing) const;
};

std::string format_double(double v);  // shortest exact decimal form
std::string hash_hex(const std::string& text);

}  // namespace parhom::config
