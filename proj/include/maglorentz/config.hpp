#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlg {

struct ConfigError : std::runtime_error {
    std::string key;
    ConfigError(const std::string &k, const std::string &what) : std::runtime_error(what), key(k) {}
};

// Flat key = value text with [section] headers. Every key is addressed as
// "section.key"; unknown keys are rejected.
class Config {
public:
    Config();

    static Config load(const std::string &path);
    static Config parse(const std::string &text);

    void set(const std::string &key, const std::string &value);
    bool has(const std::string &key) const;
    bool explicitly_set(const std::string &key) const;

    const std::string &str(const std::string &key) const;
    double num(const std::string &key) const;
    long integer(const std::string &key) const;
    std::uint64_t u64(const std::string &key) const;
    bool flag(const std::string &key) const;
    std::vector<double> list(const std::string &key) const;
    // number, optionally suffixed by TL (multiple of the Larmor period)
    double time(const std::string &key, double T_L) const;
    std::vector<double> times(const std::string &key, double T_L) const;

    // parameter domains; throws ConfigError naming the key
    void validate() const;
    std::string manifest() const;
    std::vector<std::string> keys() const;

private:
    struct Entry {
        std::string key;
        std::string value;
        bool set = false;
    };
    std::vector<Entry> entries_;
    Entry &entry(const std::string &key);
    const Entry &entry(const std::string &key) const;
};

}  // namespace mlg
