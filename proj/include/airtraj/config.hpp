#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "airtraj/dataset.hpp"
#include "airtraj/geo.hpp"
#include "airtraj/model.hpp"
#include "airtraj/synth.hpp"

namespace airtraj::config {

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull);
std::string hex64(std::uint64_t v);

// "key = value" lines; '#' starts a comment; later sources override earlier.
class KvConfig {
public:
    static KvConfig from_string(const std::string& text);
    static KvConfig from_file(const std::string& path);

    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    void merge_from(const KvConfig& other); // other wins

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::string get_str(const std::string& key, const std::string& fallback = {}) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::int64_t get_int64(const std::string& key, std::int64_t fallback) const;

    // Keys under "<prefix>." with the prefix stripped.
    std::map<std::string, std::string> section(const std::string& prefix) const;
    const std::map<std::string, std::string>& values() const { return values_; }

    std::string canonical() const; // sorted "key=value" lines

private:
    std::map<std::string, std::string> values_;
};

// Fully resolved run configuration: defaults < config file < flags < environment.
struct RunConfig {
    KvConfig kv;

    geo::FrameConfig frame() const;
    data::HorizonConfig horizon() const;
    model::ModelConfig model() const;     // "model." section over defaults
    synth::PatternSpec pattern() const;   // "synth." section over defaults
    std::uint64_t seed() const { return static_cast<std::uint64_t>(kv.get_int64("seed", 0)); }

    std::string config_hash() const { return hex64(fnv1a64(kv.canonical())); }
    std::string stamp() const; // "<version> config=<hash>"
};

// FNV over relative paths and byte contents of the given files.
std::string dataset_fingerprint(const std::vector<std::string>& files);

} // namespace airtraj::config
