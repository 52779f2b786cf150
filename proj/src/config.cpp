#include "parhom/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace parhom::config {

namespace {
std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, e - b + 1);
}
}  // namespace

ValidationError::ValidationError(std::vector<std::string> bad_keys)
    : std::runtime_error([&] {
          std::string msg = "config validation failed; missing or invalid keys:";
          for (const auto& k : bad_keys) msg += " " + k;
          return msg;
      }()),
      keys(std::move(bad_keys)) {}

bool Config::has(const std::string& section, const std::string& key) const {
    auto it = sections.find(section);
    return it != sections.end() && it->second.count(key) > 0;
}

const std::string& Config::get(const std::string& section, const std::string& key) const {
    auto it = sections.find(section);
    if (it == sections.end() || !it->second.count(key))
        throw ValidationError({section.empty() ? key : section + "." + key});
    return it->second.at(key);
}

std::string Config::get_or(const std::string& section, const std::string& key,
                           const std::string& fallback) {
    if (!has(section, key)) set(section, key, fallback);
    return get(section, key);
}

double Config::get_double(const std::string& section, const std::string& key) const {
    const std::string& v = get(section, key);
    try {
        return std::stod(v);
    } catch (...) {
        throw ValidationError({section + "." + key});
    }
}

double Config::get_double_or(const std::string& section, const std::string& key, double fallback) {
    if (!has(section, key)) set(section, key, format_double(fallback));
    return get_double(section, key);
}

long Config::get_int(const std::string& section, const std::string& key) const {
    const std::string& v = get(section, key);
    try {
        return std::stol(v);
    } catch (...) {
        throw ValidationError({section + "." + key});
    }
}

long Config::get_int_or(const std::string& section, const std::string& key, long fallback) {
    if (!has(section, key)) set(section, key, std::to_string(fallback));
    return get_int(section, key);
}

std::uint64_t Config::get_seed_or(const std::string& section, const std::string& key,
                                  std::uint64_t fallback) {
    if (!has(section, key)) set(section, key, std::to_string(fallback));
    return static_cast<std::uint64_t>(std::stoull(get(section, key)));
}

bool Config::get_bool_or(const std::string& section, const std::string& key, bool fallback) {
    if (!has(section, key)) set(section, key, fallback ? "true" : "false");
    const std::string& v = get(section, key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError({section + "." + key});
}

std::vector<double> Config::get_list(const std::string& section, const std::string& key) const {
    const std::string& v = get(section, key);
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (...) {
            throw ValidationError({section + "." + key});
        }
    }
    if (out.empty()) throw ValidationError({section + "." + key});
    return out;
}

std::vector<double> Config::get_list_or(const std::string& section, const std::string& key,
                                        const std::vector<double>& fallback) {
    if (!has(section, key)) set_list(section, key, fallback);
    return get_list(section, key);
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
    sections[section][key] = value;
}

void Config::set_double(const std::string& section, const std::string& key, double value) {
    set(section, key, format_double(value));
}

void Config::set_list(const std::string& section, const std::string& key,
                      const std::vector<double>& values) {
    std::string v;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) v += ",";
        v += format_double(values[i]);
    }
    set(section, key, v);
}

std::string Config::serialize() const {
    std::string out;
    auto emit = [&](const std::map<std::string, std::string>& kv) {
        for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    };
    if (auto it = sections.find(""); it != sections.end()) emit(it->second);
    for (const auto& [name, kv] : sections) {
        if (name.empty()) continue;
        out += "[" + name + "]\n";
        emit(kv);
    }
    return out;
}

Config Config::parse(const std::string& text) {
    Config cfg;
    std::string section;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string t = trim(line.substr(0, line.find('#')));
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw std::runtime_error("config parse error at line " + std::to_string(lineno));
            section = trim(t.substr(1, t.size() - 2));
            cfg.sections[section];
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config parse error at line " + std::to_string(lineno));
        cfg.sections[section][trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config: " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
}

void Config::save(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write config: " + path.string());
    os << serialize();
}

void Config::require(const std::string& section, const std::string& key,
                     std::vector<std::string>& missing) const {
    if (!has(section, key)) missing.push_back(section.empty() ? key : section + "." + key);
}

std::string format_double(double v) {
    // shortest representation that parses back to the same double
    for (int prec = 1; prec <= 17; ++prec) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::stod(buf) == v) return buf;
    }
    return std::to_string(v);
}

std::string hash_hex(const std::string& text) {
    // FNV-1a 64
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace parhom::config
