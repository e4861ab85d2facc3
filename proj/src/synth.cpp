#include "airtraj/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "airtraj/version.hpp"

namespace fs = std::filesystem;

namespace airtraj::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
    double x = 0.0, y = 0.0;
};

Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(double c, Vec2 a) { return {c * a.x, c * a.y}; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }
double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

// Horizontal path: straight runs joined by constant-radius arcs.
struct Segment {
    bool is_arc = false;
    Vec2 p0, p1;      // line endpoints
    Vec2 center;      // arc
    double radius = 0.0;
    double a0 = 0.0;  // arc start angle
    double sweep = 0.0; // signed; negative = left turn in this frame
    double length = 0.0;
};

struct Path {
    std::vector<Segment> segments;
    double total = 0.0;

    Vec2 at(double s) const {
        for (const auto& seg : segments) {
            if (s > seg.length) {
                s -= seg.length;
                continue;
            }
            if (!seg.is_arc) {
                const double w = seg.length > 0.0 ? s / seg.length : 0.0;
                return seg.p0 + w * (seg.p1 - seg.p0);
            }
            const double ang = seg.a0 + seg.sweep * (s / seg.length);
            return seg.center + Vec2{seg.radius * std::cos(ang), seg.radius * std::sin(ang)};
        }
        const auto& last = segments.back();
        return last.is_arc
                   ? last.center + Vec2{last.radius * std::cos(last.a0 + last.sweep),
                                        last.radius * std::sin(last.a0 + last.sweep)}
                   : last.p1;
    }
};

// Tangent-arc rounding of a waypoint polyline. Throws when a leg is too short
// for the requested turn radius.
Path rounded_path(const std::vector<Vec2>& waypoints, double radius) {
    if (waypoints.size() < 2) throw std::runtime_error("path needs at least two waypoints");
    Path path;

    Vec2 cursor = waypoints.front();
    for (std::size_t i = 1; i + 1 < waypoints.size(); ++i) {
        const Vec2 v = waypoints[i];
        const Vec2 in = v - cursor;
        const Vec2 out = waypoints[i + 1] - v;
        const double lin = norm(in), lout = norm(out);
        if (lin <= 0.0 || lout <= 0.0) throw std::runtime_error("degenerate pattern leg");
        const Vec2 u = (1.0 / lin) * in;
        const Vec2 w = (1.0 / lout) * out;

        const double turn = std::atan2(cross(u, w), dot(u, w));
        if (std::fabs(turn) < 1e-9) continue; // collinear

        const double trim = radius * std::tan(std::fabs(turn) / 2.0);
        if (trim > lin - 1e-6 || trim > lout - 1e-6)
            throw std::runtime_error("infeasible pattern geometry: leg shorter than turn radius");

        const Vec2 t1 = v - trim * u;
        const Vec2 t2 = v + trim * w;
        // Left turns have negative cross(u, w) in this frame; the center sits
        // on the turning side.
        const double side = turn > 0.0 ? 1.0 : -1.0;
        const Vec2 n{-u.y * side, u.x * side};
        const Vec2 center = t1 + radius * n;

        Segment line;
        line.p0 = cursor;
        line.p1 = t1;
        line.length = norm(t1 - cursor);
        path.segments.push_back(line);

        Segment arc;
        arc.is_arc = true;
        arc.center = center;
        arc.radius = radius;
        arc.a0 = std::atan2(t1.y - center.y, t1.x - center.x);
        arc.sweep = turn;
        arc.length = radius * std::fabs(turn);
        path.segments.push_back(arc);

        cursor = t2;
    }
    Segment line;
    line.p0 = cursor;
    line.p1 = waypoints.back();
    line.length = norm(waypoints.back() - cursor);
    path.segments.push_back(line);

    for (const auto& s : path.segments) path.total += s.length;
    return path;
}

std::vector<Vec2> circuit_waypoints(const PatternSpec& spec) {
    const double rl = spec.runway_length_m;
    const double off = spec.crosswind_offset_m;
    const double ext = spec.downwind_extension_m;
    if (spec.runway_in_use == RunwayEnd::Low) {
        // Depart +x from the low threshold; left traffic keeps the circuit at -y.
        return {{0.0, 0.0}, {rl + ext, 0.0}, {rl + ext, -off}, {-ext, -off}, {-ext, 0.0}, {0.0, 0.0}};
    }
    return {{rl, 0.0}, {-ext, 0.0}, {-ext, off}, {rl + ext, off}, {rl + ext, 0.0}, {rl, 0.0}};
}

std::vector<Vec2> entry_waypoints(const PatternSpec& spec, double entry_len) {
    const double rl = spec.runway_length_m;
    const double off = spec.crosswind_offset_m;
    const double ext = spec.downwind_extension_m;
    const double c = entry_len / std::sqrt(2.0);
    if (spec.runway_in_use == RunwayEnd::Low) {
        const Vec2 mid{rl / 2.0, -off};
        // 45 degrees to the downwind course, approaching from outside.
        return {{mid.x + c, mid.y - c}, mid, {-ext, -off}, {-ext, 0.0}, {0.0, 0.0}};
    }
    const Vec2 mid{rl / 2.0, off};
    return {{mid.x - c, mid.y + c}, mid, {rl + ext, off}, {rl + ext, 0.0}, {rl, 0.0}};
}

std::vector<Vec2> departure_waypoints(const PatternSpec& spec, double exit_dist) {
    if (spec.runway_in_use == RunwayEnd::Low) return {{0.0, 0.0}, {exit_dist, 0.0}};
    return {{spec.runway_length_m, 0.0}, {spec.runway_length_m - exit_dist, 0.0}};
}

} // namespace

double PatternSpec::turn_radius_m() const {
    return airspeed_mps / (turn_rate_dps * kPi / 180.0);
}

void PatternSpec::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) throw std::invalid_argument(std::string(name) + " must be positive");
    };
    positive(runway_length_m, "runway_length_m");
    positive(pattern_altitude_m, "pattern_altitude_m");
    positive(crosswind_offset_m, "crosswind_offset_m");
    positive(downwind_extension_m, "downwind_extension_m");
    positive(airspeed_mps, "airspeed_mps");
    positive(turn_rate_dps, "turn_rate_dps");
    if (noise_sigma_m < 0.0) throw std::invalid_argument("noise_sigma_m must be >= 0");
}

std::map<std::string, std::string> PatternSpec::to_kv() const {
    std::map<std::string, std::string> kv;
    auto put = [&](const char* k, double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        kv[k] = buf;
    };
    put("runway_length_m", runway_length_m);
    put("pattern_altitude_m", pattern_altitude_m);
    put("crosswind_offset_m", crosswind_offset_m);
    put("downwind_extension_m", downwind_extension_m);
    put("airspeed_mps", airspeed_mps);
    put("turn_rate_dps", turn_rate_dps);
    put("noise_sigma_m", noise_sigma_m);
    kv["runway_in_use"] = runway_in_use == RunwayEnd::Low ? "low" : "high";
    return kv;
}

PatternSpec PatternSpec::from_kv(const std::map<std::string, std::string>& kv) {
    PatternSpec s;
    auto get = [&](const char* k, double* out) {
        auto it = kv.find(k);
        if (it != kv.end()) *out = std::stod(it->second);
    };
    get("runway_length_m", &s.runway_length_m);
    get("pattern_altitude_m", &s.pattern_altitude_m);
    get("crosswind_offset_m", &s.crosswind_offset_m);
    get("downwind_extension_m", &s.downwind_extension_m);
    get("airspeed_mps", &s.airspeed_mps);
    get("turn_rate_dps", &s.turn_rate_dps);
    get("noise_sigma_m", &s.noise_sigma_m);
    auto it = kv.find("runway_in_use");
    if (it != kv.end()) {
        if (it->second == "low") s.runway_in_use = RunwayEnd::Low;
        else if (it->second == "high") s.runway_in_use = RunwayEnd::High;
        else throw std::invalid_argument("runway_in_use must be low or high");
    }
    s.validate();
    return s;
}

const char* intent_name(Intent intent) {
    switch (intent) {
        case Intent::FullCircuit: return "full-circuit";
        case Intent::DownwindEntry45: return "downwind-entry-45";
        case Intent::Departure: return "departure";
    }
    return "unknown";
}

geo::Scene generate_scene(const PatternSpec& spec, const SyntheticScenario& scenario,
                          std::uint64_t seed) {
    spec.validate();
    if (scenario.agents.empty()) throw std::invalid_argument("scenario has no agents");
    for (std::size_t i = 1; i < scenario.agents.size(); ++i)
        if (scenario.agents[i].spawn_t < scenario.agents[i - 1].spawn_t)
            throw std::invalid_argument("scenario spawn times must be non-decreasing");

    Rng rng(seed);
    const double radius = spec.turn_radius_m();
    const double v = spec.airspeed_mps;
    const double vertical_rate = 0.07 * v; // ~7% climb/descent gradient

    geo::Scene scene;
    scene.scene_id = 0;

    std::int64_t prev_end = 0;
    for (std::size_t k = 0; k < scenario.agents.size(); ++k) {
        const auto& sched = scenario.agents[k];
        std::vector<Vec2> wps;
        bool starts_airborne = false;
        bool lands = true;
        switch (sched.intent) {
            case Intent::FullCircuit:
                wps = circuit_waypoints(spec);
                break;
            case Intent::DownwindEntry45:
                wps = entry_waypoints(spec, 1500.0);
                starts_airborne = true;
                break;
            case Intent::Departure:
                wps = departure_waypoints(spec, 4900.0);
                lands = false;
                break;
        }
        const Path path = rounded_path(wps, radius);

        const int n_points = static_cast<int>(path.total / v) + 1;
        std::int64_t spawn = sched.spawn_t;
        if (k > 0 && spawn > prev_end) spawn = prev_end; // keep the scene contiguous

        geo::AgentTrack track;
        char id[16];
        std::snprintf(id, sizeof(id), "AC%03zu", k);
        track.agent_id = id;

        const double total_time = path.total / v;
        for (int i = 0; i < n_points; ++i) {
            const double s = std::min(static_cast<double>(i) * v, path.total);
            const Vec2 p = path.at(s);
            const double elapsed = static_cast<double>(i);
            const double remaining = total_time - elapsed;

            double z = spec.pattern_altitude_m;
            if (!starts_airborne) z = std::min(z, vertical_rate * elapsed);
            if (lands) z = std::min(z, vertical_rate * remaining);
            z = std::max(z, 0.0);
            if (sched.intent == Intent::Departure)
                z = std::min(vertical_rate * elapsed, 2.0 * spec.pattern_altitude_m);

            geo::TrackPoint tp;
            tp.t = spawn + i;
            tp.agent_id = track.agent_id;
            tp.x = p.x + (spec.noise_sigma_m > 0.0 ? rng.normal(0.0, spec.noise_sigma_m) : 0.0);
            tp.y = p.y + (spec.noise_sigma_m > 0.0 ? rng.normal(0.0, spec.noise_sigma_m) : 0.0);
            tp.z = z + (spec.noise_sigma_m > 0.0 ? rng.normal(0.0, spec.noise_sigma_m) : 0.0);
            track.points.push_back(std::move(tp));
        }
        prev_end = std::max(prev_end, track.points.back().t);
        scene.agents.push_back(std::move(track));
    }

    std::sort(scene.agents.begin(), scene.agents.end(),
              [](const geo::AgentTrack& a, const geo::AgentTrack& b) {
                  return a.agent_id < b.agent_id;
              });

    scene.t0 = scene.agents.front().points.front().t;
    scene.t1 = 0;
    for (const auto& track : scene.agents) {
        scene.t0 = std::min(scene.t0, track.points.front().t);
        scene.t1 = std::max(scene.t1, track.points.back().t);
    }
    scene.wind.assign(static_cast<std::size_t>(scene.duration_s()), scenario.wind);
    return scene;
}

DrawnScenario draw_scenario(const PatternSpec& base, Rng& rng) {
    DrawnScenario out;
    out.spec = base;

    // Wind from a random direction; the runway in use faces into it, so the
    // circuit side is inferable from the wind context.
    const double dir = rng.uniform(0.0, 360.0);
    const double speed_kt = rng.uniform(2.0, 18.0);
    ingest::MetarReport rep;
    rep.wind_kind = ingest::WindKind::Normal;
    rep.wind_dir_deg = dir;
    rep.wind_speed_kt = speed_kt;
    // Axis 0: the runway axis is +x by construction of the local frame.
    out.scenario.wind = ingest::wind_to_runway_frame(rep, 0.0);
    out.spec.runway_in_use = out.scenario.wind.u_along <= 0.0 ? RunwayEnd::Low : RunwayEnd::High;

    const int n_agents = rng.uniform_int(1, 3);
    std::int64_t spawn = 1000;
    for (int a = 0; a < n_agents; ++a) {
        AgentSchedule sched;
        sched.spawn_t = spawn;
        const int draw = rng.uniform_int(0, 9);
        if (draw < 6) sched.intent = Intent::FullCircuit;
        else if (draw < 9) sched.intent = Intent::DownwindEntry45;
        else sched.intent = Intent::Departure;
        out.scenario.agents.push_back(sched);
        spawn += rng.uniform_int(30, 120);
    }
    return out;
}

geo::Scene generate_corpus_scene(const PatternSpec& base, std::uint64_t scene_seed, int scene_id) {
    Rng rng(scene_seed);
    const DrawnScenario drawn = draw_scenario(base, rng);
    geo::Scene scene = generate_scene(drawn.spec, drawn.scenario, rng.next_u64());
    scene.scene_id = scene_id;
    return scene;
}

void generate_corpus(const PatternSpec& spec, int n_scenes, std::uint64_t seed,
                     const std::string& out_dir, int scenes_per_day, const std::string& stamp) {
    if (n_scenes < 1) throw std::invalid_argument("n_scenes must be >= 1");
    spec.validate();

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir))
        throw std::runtime_error("cannot create output directory: " + out_dir);

    Rng master(seed);
    std::vector<std::uint64_t> scene_seeds(static_cast<std::size_t>(n_scenes));
    for (auto& s : scene_seeds) s = master.next_u64();

    for (int i = 0; i < n_scenes; ++i) {
        const int day = i / scenes_per_day;
        char day_name[32], file_name[32];
        std::snprintf(day_name, sizeof(day_name), "day_%03d", day);
        std::snprintf(file_name, sizeof(file_name), "scene_%06d.csv", i);
        const fs::path dir = fs::path(out_dir) / day_name;
        fs::create_directories(dir, ec);
        if (ec) throw std::runtime_error("cannot create output directory: " + dir.string());

        const geo::Scene scene =
            generate_corpus_scene(spec, scene_seeds[static_cast<std::size_t>(i)], i);
        geo::write_scenes_file((dir / file_name).string(), {scene}, stamp);
    }

    nlohmann::json manifest;
    manifest["version"] = kVersion;
    manifest["seed"] = seed;
    manifest["n_scenes"] = n_scenes;
    manifest["scenes_per_day"] = scenes_per_day;
    manifest["scene_seeds"] = scene_seeds;
    for (const auto& [k, v] : spec.to_kv()) manifest["pattern"][k] = v;
    if (!stamp.empty()) manifest["stamp"] = stamp;

    std::ofstream out(fs::path(out_dir) / "manifest.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest in " + out_dir);
    out << manifest.dump(2) << "\n";
}

} // namespace airtraj::synth
