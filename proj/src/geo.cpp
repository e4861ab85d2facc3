#include "airtraj/geo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace airtraj::geo {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;

// WGS-84
constexpr double kSemiMajor = 6378137.0;
constexpr double kFlattening = 1.0 / 298.257223563;
constexpr double kEcc2 = kFlattening * (2.0 - kFlattening);

// Meridian and prime-vertical radii of curvature at latitude phi.
void local_radii(double lat_deg, double* merid, double* prime) {
    const double s = std::sin(lat_deg * kDegToRad);
    const double w2 = 1.0 - kEcc2 * s * s;
    const double w = std::sqrt(w2);
    *prime = kSemiMajor / w;
    *merid = kSemiMajor * (1.0 - kEcc2) / (w2 * w);
}

bool position_ok(const ingest::RawTrackRecord& r) {
    if (!std::isfinite(r.latitude) || !std::isfinite(r.longitude) || !std::isfinite(r.altitude_msl))
        return false;
    if (r.latitude < -90.0 || r.latitude > 90.0) return false;
    if (r.longitude < -180.0 || r.longitude > 180.0) return false;
    return r.timestamp > 0;
}

std::string format_row(int scene_id, std::int64_t t, const std::string& agent, double x, double y,
                       double z, double ua, double uc) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d,%lld,%s,%.6f,%.6f,%.6f,%.6f,%.6f", scene_id,
                  static_cast<long long>(t), agent.c_str(), x, y, z, ua, uc);
    return buf;
}

} // namespace

std::vector<ingest::RawTrackRecord> clean(const std::vector<ingest::RawTrackRecord>& records,
                                          CleanStats* stats) {
    std::vector<ingest::RawTrackRecord> out;
    out.reserve(records.size());
    std::unordered_set<std::string> seen;
    for (const auto& r : records) {
        if (!position_ok(r)) {
            if (stats) ++stats->bad_position;
            continue;
        }
        char key[160];
        std::snprintf(key, sizeof(key), "%s|%.17g|%.17g|%.17g", r.aircraft_id.c_str(), r.latitude,
                      r.longitude, r.altitude_msl);
        if (!seen.insert(key).second) {
            if (stats) ++stats->duplicates;
            continue;
        }
        out.push_back(r);
    }
    return out;
}

void to_local(const ingest::RawTrackRecord& record, const FrameConfig& cfg, double* x, double* y,
              double* z) {
    const double dlat = record.latitude - cfg.origin_lat;
    const double dlon = record.longitude - cfg.origin_lon;
    if (std::fabs(dlat) > 1.0 || std::fabs(dlon) > 1.0)
        throw std::runtime_error("record outside the small-area bound (+/-1 deg of origin)");

    double merid, prime;
    local_radii(cfg.origin_lat, &merid, &prime);
    const double north = dlat * kDegToRad * merid;
    const double east = dlon * kDegToRad * prime * std::cos(cfg.origin_lat * kDegToRad);

    const double c = std::cos(cfg.axis_azimuth_deg * kDegToRad);
    const double s = std::sin(cfg.axis_azimuth_deg * kDegToRad);
    *x = north * c + east * s;
    *y = east * c - north * s;
    *z = record.altitude_msl * kFootToMeter;
}

void to_geodetic(double x, double y, double z, const FrameConfig& cfg, double* lat, double* lon,
                 double* alt_ft) {
    double merid, prime;
    local_radii(cfg.origin_lat, &merid, &prime);
    const double c = std::cos(cfg.axis_azimuth_deg * kDegToRad);
    const double s = std::sin(cfg.axis_azimuth_deg * kDegToRad);
    const double north = x * c - y * s;
    const double east = x * s + y * c;
    *lat = cfg.origin_lat + north / (merid * kDegToRad);
    *lon = cfg.origin_lon + east / (prime * std::cos(cfg.origin_lat * kDegToRad) * kDegToRad);
    *alt_ft = z / kFootToMeter;
}

std::vector<TrackPoint> crop_region(const std::vector<TrackPoint>& points,
                                    const FrameConfig& cfg) {
    const double ceiling_m = cfg.altitude_ceiling_ft * kFootToMeter;
    std::vector<TrackPoint> out;
    out.reserve(points.size());
    for (const auto& p : points) {
        if (p.z > ceiling_m) continue;
        if (std::hypot(p.x, p.y) > cfg.radius_m) continue;
        out.push_back(p);
    }
    return out;
}

std::vector<AgentTrack> interpolate_1hz(const std::string& aircraft_id,
                                        std::vector<TrackPoint> samples,
                                        std::int64_t gap_split_s) {
    std::vector<AgentTrack> tracks;
    if (samples.empty()) return tracks;

    std::stable_sort(samples.begin(), samples.end(),
                     [](const TrackPoint& a, const TrackPoint& b) { return a.t < b.t; });
    // Keep the first sample per timestamp.
    std::vector<TrackPoint> uniq;
    uniq.reserve(samples.size());
    for (const auto& p : samples)
        if (uniq.empty() || p.t != uniq.back().t) uniq.push_back(p);

    // Segment at gaps wider than gap_split_s, then resample each segment.
    std::size_t seg_begin = 0;
    int seg_index = 0;
    for (std::size_t i = 1; i <= uniq.size(); ++i) {
        const bool gap = i == uniq.size() || uniq[i].t - uniq[i - 1].t > gap_split_s;
        if (!gap) continue;

        AgentTrack track;
        track.agent_id = seg_index == 0 ? aircraft_id
                                        : aircraft_id + "#" + std::to_string(seg_index);
        std::size_t src = seg_begin;
        const std::int64_t t_first = uniq[seg_begin].t;
        const std::int64_t t_last = uniq[i - 1].t;
        for (std::int64_t t = t_first; t <= t_last; ++t) {
            while (src + 1 < i && uniq[src + 1].t <= t) ++src;
            TrackPoint p;
            p.t = t;
            p.agent_id = track.agent_id;
            if (uniq[src].t == t) {
                p.x = uniq[src].x;
                p.y = uniq[src].y;
                p.z = uniq[src].z;
            } else {
                const TrackPoint& a = uniq[src];
                const TrackPoint& b = uniq[src + 1];
                const double w = static_cast<double>(t - a.t) / static_cast<double>(b.t - a.t);
                p.x = a.x + w * (b.x - a.x);
                p.y = a.y + w * (b.y - a.y);
                p.z = a.z + w * (b.z - a.z);
            }
            track.points.push_back(std::move(p));
        }
        tracks.push_back(std::move(track));
        seg_begin = i;
        ++seg_index;
    }
    return tracks;
}

std::vector<Scene> segment_scenes(const std::vector<TrackPoint>& points, const FrameConfig& cfg) {
    std::vector<Scene> scenes;
    if (points.empty()) return scenes;

    std::set<std::int64_t> occupied;
    for (const auto& p : points) occupied.insert(p.t);

    // Scene spans: break wherever the empty run between occupied seconds
    // exceeds gap_split_s.
    std::vector<std::pair<std::int64_t, std::int64_t>> spans;
    auto it = occupied.begin();
    std::int64_t span_start = *it;
    std::int64_t prev = *it;
    for (++it; it != occupied.end(); ++it) {
        if (*it - prev - 1 > cfg.gap_split_s) {
            spans.emplace_back(span_start, prev);
            span_start = *it;
        }
        prev = *it;
    }
    spans.emplace_back(span_start, prev);

    scenes.resize(spans.size());
    for (std::size_t i = 0; i < spans.size(); ++i) {
        scenes[i].scene_id = static_cast<int>(i);
        scenes[i].t0 = spans[i].first;
        scenes[i].t1 = spans[i].second;
        scenes[i].wind.assign(static_cast<std::size_t>(scenes[i].duration_s()), {});
    }

    std::map<std::pair<std::size_t, std::string>, std::vector<TrackPoint>> grouped;
    for (const auto& p : points) {
        std::size_t scene = 0;
        while (scene + 1 < spans.size() && p.t > spans[scene].second) ++scene;
        grouped[{scene, p.agent_id}].push_back(p);
    }
    for (auto& [key, pts] : grouped) {
        std::sort(pts.begin(), pts.end(),
                  [](const TrackPoint& a, const TrackPoint& b) { return a.t < b.t; });
        scenes[key.first].agents.push_back({key.second, std::move(pts)});
    }
    return scenes;
}

void attach_wind(Scene& scene, const std::vector<ingest::MetarReport>& reports,
                 double axis_azimuth_deg) {
    scene.wind.resize(static_cast<std::size_t>(scene.duration_s()));
    for (std::int64_t t = scene.t0; t <= scene.t1; ++t) {
        const auto idx = ingest::nearest_report_index(reports, t);
        scene.wind[static_cast<std::size_t>(t - scene.t0)] =
            ingest::wind_to_runway_frame(reports[idx], axis_azimuth_deg);
    }
}

void write_scenes_csv(std::ostream& out, const std::vector<Scene>& scenes,
                      const std::string& stamp) {
    if (!stamp.empty()) out << "# " << stamp << "\n";
    out << "scene_id,t,agent_id,x,y,z,u_along,u_cross\n";
    for (const auto& scene : scenes) {
        // Rows grouped per second so the file reads in time order.
        for (std::int64_t t = scene.t0; t <= scene.t1; ++t) {
            const auto& w = scene.wind.at(static_cast<std::size_t>(t - scene.t0));
            for (const auto& track : scene.agents) {
                if (track.points.empty() || t < track.points.front().t || t > track.points.back().t)
                    continue;
                const auto& p = track.points[static_cast<std::size_t>(t - track.points.front().t)];
                out << format_row(scene.scene_id, t, track.agent_id, p.x, p.y, p.z, w.u_along,
                                  w.u_cross)
                    << "\n";
            }
        }
    }
}

std::vector<Scene> read_scenes_csv(std::istream& in) {
    std::map<int, Scene> by_id;
    std::map<std::pair<int, std::string>, std::vector<TrackPoint>> tracks;
    std::map<std::pair<int, std::int64_t>, ingest::WindContext> winds;

    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            if (line.rfind("scene_id,", 0) == 0) continue;
        }
        std::istringstream iss(line);
        std::string field;
        std::vector<std::string> f;
        while (std::getline(iss, field, ',')) f.push_back(field);
        if (f.size() != 8) throw std::runtime_error("bad scene row: " + line);

        const int scene_id = std::stoi(f[0]);
        TrackPoint p;
        p.t = std::stoll(f[1]);
        p.agent_id = f[2];
        p.x = std::stod(f[3]);
        p.y = std::stod(f[4]);
        p.z = std::stod(f[5]);
        ingest::WindContext w;
        w.u_along = std::stod(f[6]);
        w.u_cross = std::stod(f[7]);

        by_id[scene_id].scene_id = scene_id;
        winds[{scene_id, p.t}] = w;
        tracks[{scene_id, p.agent_id}].push_back(std::move(p));
    }

    std::vector<Scene> scenes;
    for (auto& [id, scene] : by_id) {
        std::int64_t t0 = 0, t1 = 0;
        bool first = true;
        for (auto& [key, pts] : tracks) {
            if (key.first != id) continue;
            for (const auto& p : pts) {
                t0 = first ? p.t : std::min(t0, p.t);
                t1 = first ? p.t : std::max(t1, p.t);
                first = false;
            }
        }
        scene.t0 = t0;
        scene.t1 = t1;
        scene.wind.assign(static_cast<std::size_t>(scene.duration_s()), {});
        for (std::int64_t t = t0; t <= t1; ++t) {
            auto it = winds.find({id, t});
            if (it != winds.end()) scene.wind[static_cast<std::size_t>(t - t0)] = it->second;
        }
        for (auto& [key, pts] : tracks) {
            if (key.first != id) continue;
            std::sort(pts.begin(), pts.end(),
                      [](const TrackPoint& a, const TrackPoint& b) { return a.t < b.t; });
            scene.agents.push_back({key.second, pts});
        }
        std::sort(scene.agents.begin(), scene.agents.end(),
                  [](const AgentTrack& a, const AgentTrack& b) { return a.agent_id < b.agent_id; });
        scenes.push_back(std::move(scene));
    }
    return scenes;
}

void write_scenes_file(const std::string& path, const std::vector<Scene>& scenes,
                       const std::string& stamp) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_scenes_csv(out, scenes, stamp);
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<Scene> read_scenes_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open scene file: " + path);
    return read_scenes_csv(in);
}

} // namespace airtraj::geo
