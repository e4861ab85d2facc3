#include "airtraj/config.hpp"

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "airtraj/version.hpp"

namespace airtraj::config {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

} // namespace

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

KvConfig KvConfig::from_string(const std::string& text) {
    KvConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": expected key = value");
        const std::string key = trim(body.substr(0, eq));
        if (key.empty())
            throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key");
        cfg.values_[key] = trim(body.substr(eq + 1));
    }
    return cfg;
}

KvConfig KvConfig::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str());
}

void KvConfig::merge_from(const KvConfig& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::string KvConfig::get_str(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : std::stod(it->second);
}

int KvConfig::get_int(const std::string& key, int fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : std::stoi(it->second);
}

std::int64_t KvConfig::get_int64(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : std::stoll(it->second);
}

std::map<std::string, std::string> KvConfig::section(const std::string& prefix) const {
    std::map<std::string, std::string> out;
    const std::string want = prefix + ".";
    for (const auto& [k, v] : values_)
        if (k.rfind(want, 0) == 0) out[k.substr(want.size())] = v;
    return out;
}

std::string KvConfig::canonical() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << "=" << v << "\n";
    return out.str();
}

geo::FrameConfig RunConfig::frame() const {
    geo::FrameConfig f;
    f.origin_lat = kv.get_double("frame.origin_lat", f.origin_lat);
    f.origin_lon = kv.get_double("frame.origin_lon", f.origin_lon);
    f.axis_azimuth_deg = kv.get_double("frame.axis_azimuth_deg", f.axis_azimuth_deg);
    f.altitude_ceiling_ft = kv.get_double("frame.altitude_ceiling_ft", f.altitude_ceiling_ft);
    f.radius_m = kv.get_double("frame.radius_m", f.radius_m);
    f.gap_split_s = kv.get_int64("frame.gap_split_s", f.gap_split_s);
    if (f.radius_m <= 0.0) throw std::runtime_error("frame.radius_m must be positive");
    if (f.gap_split_s < 1) throw std::runtime_error("frame.gap_split_s must be >= 1");
    return f;
}

data::HorizonConfig RunConfig::horizon() const {
    data::HorizonConfig h;
    h.t_obs = kv.get_int("horizon.t_obs", h.t_obs);
    h.t_pred = kv.get_int("horizon.t_pred", h.t_pred);
    h.min_agents = kv.get_int("horizon.min_agents", h.min_agents);
    h.stride = kv.get_int("horizon.stride", h.stride);
    if (h.t_obs <= 0 || h.t_pred <= 0 || h.min_agents <= 0 || h.stride <= 0)
        throw std::runtime_error("horizon fields must be positive");
    return h;
}

model::ModelConfig RunConfig::model() const {
    auto kv_section = kv.section("model");
    // Horizons flow from the shared horizon config unless overridden.
    if (!kv_section.count("t_obs")) kv_section["t_obs"] = std::to_string(horizon().t_obs);
    if (!kv_section.count("t_pred")) kv_section["t_pred"] = std::to_string(horizon().t_pred);
    return model::ModelConfig::from_kv(kv_section);
}

synth::PatternSpec RunConfig::pattern() const {
    return synth::PatternSpec::from_kv(kv.section("synth"));
}

std::string RunConfig::stamp() const {
    return std::string(kVersion) + " config=" + config_hash();
}

std::string dataset_fingerprint(const std::vector<std::string>& files) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& f : files) {
        const std::string name = std::filesystem::path(f).filename().string();
        h = fnv1a64(name, h);
        std::ifstream in(f, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open for fingerprint: " + f);
        char buf[65536];
        while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
            h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
    }
    return hex64(h);
}

} // namespace airtraj::config
