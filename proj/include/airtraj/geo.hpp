#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "airtraj/ingest.hpp"

namespace airtraj::geo {

// One 1 Hz sample in the runway-aligned local Cartesian frame, SI units.
struct TrackPoint {
    std::int64_t t = 0;    // seconds, integer grid
    std::string agent_id;  // segment-qualified id ("<id>" or "<id>#<k>" after a gap split)
    double x = 0.0;        // meters, +x along the runway axis
    double y = 0.0;        // meters
    double z = 0.0;        // meters MSL
};

struct AgentTrack {
    std::string agent_id;
    std::vector<TrackPoint> points; // time-ordered, consecutive seconds
};

// A contiguous multi-agent episode with its per-second wind context.
struct Scene {
    int scene_id = 0;
    std::int64_t t0 = 0; // first occupied second
    std::int64_t t1 = 0; // last occupied second, inclusive
    std::vector<AgentTrack> agents;           // sorted by agent_id
    std::vector<ingest::WindContext> wind;    // size t1 - t0 + 1

    std::int64_t duration_s() const { return t1 - t0 + 1; }
};

struct FrameConfig {
    double origin_lat = 40.7771;     // degrees
    double origin_lon = -79.9499;    // degrees
    double axis_azimuth_deg = 80.0;  // degrees true, +x direction
    double altitude_ceiling_ft = 6000.0;
    double radius_m = 5000.0;
    std::int64_t gap_split_s = 60;
};

struct CleanStats {
    std::size_t bad_position = 0;
    std::size_t duplicates = 0;
};

inline constexpr double kFootToMeter = 0.3048;

// Drops records with non-finite or out-of-range position fields, then exact
// duplicates on (aircraft_id, lat, lon, alt), first occurrence kept.
std::vector<ingest::RawTrackRecord> clean(const std::vector<ingest::RawTrackRecord>& records,
                                          CleanStats* stats = nullptr);

// Tangent-plane projection about the configured origin, rotated so +x points
// along axis_azimuth_deg and +y 90 degrees clockwise of it (viewed from above).
// z is altitude MSL in meters. Throws outside the +/-1 degree small-area bound.
void to_local(const ingest::RawTrackRecord& record, const FrameConfig& cfg,
              double* x, double* y, double* z);

// Inverse of to_local's horizontal map (z is returned as altitude_msl feet).
void to_geodetic(double x, double y, double z, const FrameConfig& cfg,
                 double* lat, double* lon, double* alt_ft);

// Region-of-interest crop: a point is removed when its altitude exceeds the
// ceiling OR its horizontal distance from the origin exceeds radius_m.
std::vector<TrackPoint> crop_region(const std::vector<TrackPoint>& points, const FrameConfig& cfg);

// Piecewise-linear resampling of one aircraft's samples onto the integer-second
// grid. Gaps wider than gap_split_s are not bridged; each contiguous segment
// becomes its own AgentTrack, suffixed "#k" for k > 0.
std::vector<AgentTrack> interpolate_1hz(const std::string& aircraft_id,
                                        std::vector<TrackPoint> samples,
                                        std::int64_t gap_split_s);

// Splits the 1 Hz point stream into scenes wherever no aircraft is present for
// more than gap_split_s seconds. Scene ids are dense from 0; spans are trimmed
// to their first/last occupied second.
std::vector<Scene> segment_scenes(const std::vector<TrackPoint>& points, const FrameConfig& cfg);

// Fills scene.wind with the nearest report per second (reports must be sorted
// and resolved to absolute epochs).
void attach_wind(Scene& scene, const std::vector<ingest::MetarReport>& reports,
                 double axis_azimuth_deg);

// Scene CSV: header scene_id,t,agent_id,x,y,z,u_along,u_cross; '#' comment
// lines allowed before the header. Rows ordered by (scene_id, t, agent_id).
void write_scenes_csv(std::ostream& out, const std::vector<Scene>& scenes,
                      const std::string& stamp = {});
std::vector<Scene> read_scenes_csv(std::istream& in);

void write_scenes_file(const std::string& path, const std::vector<Scene>& scenes,
                       const std::string& stamp = {});
std::vector<Scene> read_scenes_file(const std::string& path);

} // namespace airtraj::geo
